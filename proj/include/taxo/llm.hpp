#pragma once

#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "taxo/corpus.hpp"

namespace taxo {

enum class ReqKind {
  ExtractConcepts,
  InduceHierarchy,
  LabelCluster,
  AlignTitle,
  ExpandSiblings,
  ScoreConcept,
  VerifyRedundancy,
};

std::string to_string(ReqKind k);

struct LlmRequest {
  ReqKind kind;
  nlohmann::ordered_json payload;
  std::string template_id = "default";
  std::string lang = "en";
};

/// Schema-validated result. `data` is the parsed machine-readable block;
/// `raw_text` the full model output of the accepted attempt.
struct LlmResponse {
  nlohmann::json data;
  std::string raw_text;
  int attempts = 1;
};

/// Audit trail: one JSON record per completed request,
/// {kind, digest, prompt, response, attempts}.
class AuditLog {
 public:
  explicit AuditLog(std::filesystem::path path);
  void append(const std::string& kind, const std::string& digest,
              const std::string& prompt, const std::string& response, int attempts);
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::mutex mu_;
};

struct AuditRecord {
  std::string kind, digest, prompt, response;
  int attempts = 1;
};

std::vector<AuditRecord> read_audit(const std::filesystem::path& path);

/// Writes one fixture file per digest seen in an audit log (first record
/// wins), making the log replayable as a fixture set.
void fixtures_from_audit(const std::filesystem::path& audit_path,
                         const std::filesystem::path& fixtures_dir);

class Provider {
 public:
  virtual ~Provider() = default;
  virtual std::string name() const = 0;
  /// Raw model text for one attempt. Transport-level retries belong to the
  /// implementation; validation and repair re-prompts happen in complete().
  virtual std::string raw_complete(const LlmRequest& req, const std::string& prompt) = 0;

  void set_audit(AuditLog* audit) { audit_ = audit; }
  AuditLog* audit() const { return audit_; }

 private:
  AuditLog* audit_ = nullptr;
};

/// SHA-256 of the kind plus the key-sorted payload; the fixture and cache
/// key for a request.
std::string payload_digest(const LlmRequest& req);

/// Deterministic template fill for (kind, lang). Attempts beyond the first
/// carry a repair instruction. Throws when no template exists for the pair.
std::string render_prompt(const LlmRequest& req, int attempt = 1);

/// Sends the request, extracts the <<< ... >>> block, validates it against
/// the kind's response schema, and retries with a repair prompt up to 2
/// times. Every outcome is appended to the provider's audit log.
LlmResponse complete(Provider& provider, const LlmRequest& req);

// -- deterministic scripted provider ----------------------------------------

/// Offline stand-in: answers from fixture files (one per payload digest)
/// when present, otherwise from fixed rules that are pure functions of the
/// payload.
class MockProvider : public Provider {
 public:
  explicit MockProvider(std::filesystem::path fixtures_dir = {});
  std::string name() const override { return "mock"; }
  std::string raw_complete(const LlmRequest& req, const std::string& prompt) override;

 private:
  std::filesystem::path fixtures_dir_;
};

/// OpenAI-compatible chat-completion backend. Base URL, model, and key come
/// from the constructor; transport failures retry 3 times with backoff.
class HttpProvider : public Provider {
 public:
  HttpProvider(std::string base_url, std::string model, std::string api_key);
  std::string name() const override { return "remote:" + model_; }
  std::string raw_complete(const LlmRequest& req, const std::string& prompt) override;

 private:
  std::string base_url_, model_, api_key_;
};

// -- request builders ---------------------------------------------------------
// One place defines every payload shape, so fixtures written against a
// digest stay valid wherever the request is issued from.

LlmRequest make_extract_request(const Paper& paper, const std::string& lang = "en");
LlmRequest make_induce_request(const std::vector<std::string>& concepts,
                               bool is_merge_pass = false,
                               const std::string& lang = "en");

struct LabelCandidate {
  std::string surface;
  std::size_t count = 0;
  double concentration = 0.0;
};
LlmRequest make_label_request(const std::vector<LabelCandidate>& candidates,
                              const std::vector<std::string>& paper_titles,
                              const std::string& lang = "en");

struct PromptPaper {
  std::string title;
  std::string abstract_excerpt;  // capped at 400 characters
};
LlmRequest make_align_request(const std::string& root_title, const std::string& parent_title,
                              const std::string& candidate_title,
                              const std::vector<PromptPaper>& papers,
                              const std::string& lang = "en");
LlmRequest make_expand_request(const std::string& parent_title,
                               const std::vector<std::string>& sibling_titles,
                               const std::string& lang = "en");
LlmRequest make_score_request(const std::string& title, std::size_t paper_count,
                              const std::vector<std::string>& sample_titles,
                              const std::string& lang = "en");
LlmRequest make_verify_request(const std::string& a, const std::string& b,
                               const std::string& lang = "en");

/// Caps at 10 papers, 400 characters of abstract each.
std::vector<PromptPaper> prompt_papers(const Corpus& corpus,
                                       const std::vector<std::string>& paper_ids);

// -- typed accessors (valid after complete()) --------------------------------

std::vector<std::string> response_concepts(const LlmResponse& r);
std::string response_title(const LlmResponse& r);
std::vector<std::string> response_proposals(const LlmResponse& r);
int response_score(const LlmResponse& r);
bool response_redundant(const LlmResponse& r);
/// InduceHierarchy tree: {"label": ..., "children": [...]} under key "tree".
nlohmann::json response_tree(const LlmResponse& r);

}  // namespace taxo

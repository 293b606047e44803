#include "taxo/llm.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "taxo/util.hpp"

namespace taxo {

std::string to_string(ReqKind k) {
  switch (k) {
    case ReqKind::ExtractConcepts: return "ExtractConcepts";
    case ReqKind::InduceHierarchy: return "InduceHierarchy";
    case ReqKind::LabelCluster: return "LabelCluster";
    case ReqKind::AlignTitle: return "AlignTitle";
    case ReqKind::ExpandSiblings: return "ExpandSiblings";
    case ReqKind::ScoreConcept: return "ScoreConcept";
    case ReqKind::VerifyRedundancy: return "VerifyRedundancy";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Audit log
// ---------------------------------------------------------------------------

AuditLog::AuditLog(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  std::ofstream out(path_, std::ios::app);  // create if missing
}

void AuditLog::append(const std::string& kind, const std::string& digest,
                      const std::string& prompt, const std::string& response,
                      int attempts) {
  nlohmann::ordered_json j;
  j["kind"] = kind;
  j["digest"] = digest;
  j["prompt"] = prompt;
  j["response"] = response;
  j["attempts"] = attempts;
  const std::string line = j.dump() + "\n";
  std::lock_guard<std::mutex> lock(mu_);
  std::ofstream out(path_, std::ios::app | std::ios::binary);
  if (!out) fail("cannot append to audit log " + path_.string());
  out << line;
}

std::vector<AuditRecord> read_audit(const std::filesystem::path& path) {
  std::vector<AuditRecord> out;
  std::istringstream in(read_file(path));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail("bad audit record at line " + std::to_string(line_no) + ": " + e.what());
    }
    AuditRecord r;
    r.kind = j.at("kind").get<std::string>();
    r.digest = j.at("digest").get<std::string>();
    r.prompt = j.at("prompt").get<std::string>();
    r.response = j.at("response").get<std::string>();
    r.attempts = j.at("attempts").get<int>();
    out.push_back(std::move(r));
  }
  return out;
}

void fixtures_from_audit(const std::filesystem::path& audit_path,
                         const std::filesystem::path& fixtures_dir) {
  std::filesystem::create_directories(fixtures_dir);
  std::set<std::string> written;
  for (const AuditRecord& r : read_audit(audit_path)) {
    if (!written.insert(r.digest).second) continue;
    write_file_atomic(fixtures_dir / r.digest, r.response);
  }
}

// ---------------------------------------------------------------------------
// Digest, block extraction, schema validation
// ---------------------------------------------------------------------------

std::string payload_digest(const LlmRequest& req) {
  // Key-sorted copy gives a canonical serialization.
  const nlohmann::json sorted = req.payload;
  return sha256_hex(to_string(req.kind) + "\n" + sorted.dump());
}

namespace {

std::optional<nlohmann::json> extract_block(const std::string& raw) {
  const std::size_t open = raw.find("<<<");
  if (open == std::string::npos) return std::nullopt;
  const std::size_t close = raw.rfind(">>>");
  if (close == std::string::npos || close < open + 3) return std::nullopt;
  const std::string body = raw.substr(open + 3, close - open - 3);
  try {
    return nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;
  }
}

bool valid_tree_node(const nlohmann::json& j, int depth) {
  if (depth > 100 || !j.is_object()) return false;
  if (!j.contains("label") || !j["label"].is_string()) return false;
  if (j.contains("children")) {
    if (!j["children"].is_array()) return false;
    for (const auto& c : j["children"])
      if (!valid_tree_node(c, depth + 1)) return false;
  }
  return true;
}

bool string_array(const nlohmann::json& j) {
  if (!j.is_array()) return false;
  for (const auto& e : j)
    if (!e.is_string()) return false;
  return true;
}

bool valid_response(ReqKind kind, const nlohmann::json& j) {
  if (!j.is_object()) return false;
  switch (kind) {
    case ReqKind::ExtractConcepts:
      return j.contains("concepts") && string_array(j["concepts"]);
    case ReqKind::InduceHierarchy:
      return j.contains("tree") && valid_tree_node(j["tree"], 0);
    case ReqKind::LabelCluster:
    case ReqKind::AlignTitle:
      return j.contains("title") && j["title"].is_string() &&
             !normalize_text(j["title"].get<std::string>()).empty();
    case ReqKind::ExpandSiblings:
      return j.contains("proposals") && string_array(j["proposals"]);
    case ReqKind::ScoreConcept:
      return j.contains("score") && j["score"].is_number_integer() &&
             j["score"].get<int>() >= 1 && j["score"].get<int>() <= 10;
    case ReqKind::VerifyRedundancy:
      return j.contains("redundant") && j["redundant"].is_boolean();
  }
  return false;
}

void require_fields(const LlmRequest& req, std::initializer_list<const char*> fields) {
  for (const char* f : fields)
    if (!req.payload.contains(f))
      fail("request payload for " + to_string(req.kind) + " lacks '" + f + "'");
}

void validate_request(const LlmRequest& req) {
  switch (req.kind) {
    case ReqKind::ExtractConcepts: require_fields(req, {"id", "title", "abstract"}); break;
    case ReqKind::InduceHierarchy: require_fields(req, {"concepts"}); break;
    case ReqKind::LabelCluster: require_fields(req, {"candidates", "paper_titles"}); break;
    case ReqKind::AlignTitle:
      require_fields(req, {"root_title", "parent_title", "candidate_title", "papers"});
      break;
    case ReqKind::ExpandSiblings: require_fields(req, {"parent_title", "sibling_titles"}); break;
    case ReqKind::ScoreConcept: require_fields(req, {"title", "paper_count", "sample_titles"}); break;
    case ReqKind::VerifyRedundancy: require_fields(req, {"a", "b"}); break;
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Prompt rendering
// ---------------------------------------------------------------------------

namespace {

const char* kBlockHintConcepts =
    "Answer with exactly one block: <<<{\"concepts\": [\"...\"]}>>>";
const char* kBlockHintTree =
    "Answer with exactly one block: <<<{\"tree\": {\"label\": \"root\", \"children\": "
    "[{\"label\": \"...\", \"children\": []}]}}>>>";
const char* kBlockHintTitle = "Answer with exactly one block: <<<{\"title\": \"...\"}>>>";
const char* kBlockHintProposals =
    "Answer with exactly one block: <<<{\"proposals\": [\"...\"]}>>>";
const char* kBlockHintScore = "Answer with exactly one block: <<<{\"score\": N}>>> with N from 1 to 10.";
const char* kBlockHintBool =
    "Answer with exactly one block: <<<{\"redundant\": true}>>> or <<<{\"redundant\": false}>>>";

std::string render_en(const LlmRequest& req) {
  const auto& p = req.payload;
  std::ostringstream out;
  switch (req.kind) {
    case ReqKind::ExtractConcepts:
      out << "You are indexing a scientific paper collection.\n"
          << "Title: " << p["title"].get<std::string>() << "\n"
          << "Abstract: " << p["abstract"].get<std::string>() << "\n"
          << "List the key technical concepts this paper is about, most specific first.\n"
          << kBlockHintConcepts;
      break;
    case ReqKind::InduceHierarchy: {
      out << "Organize the following technical concepts into a hierarchy from general "
             "to specific. Use only the given concepts as labels.\nConcepts:\n";
      for (const auto& c : p["concepts"]) out << "- " << c.get<std::string>() << "\n";
      out << kBlockHintTree;
      break;
    }
    case ReqKind::LabelCluster: {
      out << "Choose the best heading for a group of papers.\nCandidate concepts:\n";
      for (const auto& c : p["candidates"])
        out << "- " << c["surface"].get<std::string>() << " (papers: " << c["count"]
            << ", concentration: " << c["concentration"] << ")\n";
      out << "Paper titles:\n";
      for (const auto& t : p["paper_titles"]) out << "- " << t.get<std::string>() << "\n";
      out << "Prefer a candidate concept; rephrase only if none fits.\n" << kBlockHintTitle;
      break;
    }
    case ReqKind::AlignTitle: {
      out << "Refine the heading of a taxonomy node.\n"
          << "Taxonomy root: " << p["root_title"].get<std::string>() << "\n"
          << "Parent heading: " << p["parent_title"].get<std::string>() << "\n"
          << "Current heading: " << p["candidate_title"].get<std::string>() << "\n"
          << "Papers under this node:\n";
      for (const auto& pp : p["papers"]) {
        out << "- " << pp["title"].get<std::string>();
        const std::string ab = pp["abstract"].get<std::string>();
        if (!ab.empty()) out << " :: " << ab;
        out << "\n";
      }
      out << "The heading must fit the root topic, stay consistent with the parent "
             "heading, and describe these papers.\n"
          << kBlockHintTitle;
      break;
    }
    case ReqKind::ExpandSiblings: {
      out << "A taxonomy node may be missing sibling categories.\n"
          << "Parent heading: " << p["parent_title"].get<std::string>() << "\n"
          << "Existing sibling topics:\n";
      for (const auto& s : p["sibling_titles"]) out << "- " << s.get<std::string>() << "\n";
      out << "Name missing technical topics at the same level of abstraction, with no "
             "conceptual overlap or granularity mismatch with the existing siblings. "
             "Return an empty list if nothing is missing.\n"
          << kBlockHintProposals;
      break;
    }
    case ReqKind::ScoreConcept: {
      out << "Rate this taxonomy heading from 1 to 10 for technical specificity, paper "
             "coverage, and semantic consistency.\n"
          << "Heading: " << p["title"].get<std::string>() << "\n"
          << "Papers under it: " << p["paper_count"] << "\nSample titles:\n";
      for (const auto& t : p["sample_titles"]) out << "- " << t.get<std::string>() << "\n";
      out << kBlockHintScore;
      break;
    }
    case ReqKind::VerifyRedundancy:
      out << "Do these two headings name the same concept?\n"
          << "A: " << p["a"].get<std::string>() << "\nB: " << p["b"].get<std::string>()
          << "\n"
          << kBlockHintBool;
      break;
  }
  return out.str();
}

}  // namespace

std::string render_prompt(const LlmRequest& req, int attempt) {
  validate_request(req);
  if (req.lang != "en")
    fail("no prompt template for kind " + to_string(req.kind) + ", lang '" + req.lang + "'");
  std::string prompt = render_en(req);
  if (attempt > 1)
    prompt = "The previous reply could not be parsed. Follow the output format "
             "exactly.\n\n" + prompt;
  return prompt;
}

LlmResponse complete(Provider& provider, const LlmRequest& req) {
  validate_request(req);
  const std::string digest = payload_digest(req);
  std::string last_raw, last_prompt;
  for (int attempt = 1; attempt <= 3; ++attempt) {
    const std::string prompt = render_prompt(req, attempt);
    const std::string raw = provider.raw_complete(req, prompt);
    last_raw = raw;
    last_prompt = prompt;
    const auto block = extract_block(raw);
    if (block && valid_response(req.kind, *block)) {
      if (provider.audit())
        provider.audit()->append(to_string(req.kind), digest, prompt, raw, attempt);
      return {*block, raw, attempt};
    }
  }
  if (provider.audit())
    provider.audit()->append(to_string(req.kind), digest, last_prompt, last_raw, 3);
  fail("invalid " + to_string(req.kind) + " response after 3 attempts; raw output: " +
       last_raw);
}

// ---------------------------------------------------------------------------
// Mock provider
// ---------------------------------------------------------------------------

MockProvider::MockProvider(std::filesystem::path fixtures_dir)
    : fixtures_dir_(std::move(fixtures_dir)) {
  if (!fixtures_dir_.empty() && !std::filesystem::exists(fixtures_dir_))
    fail("fixtures directory does not exist: " + fixtures_dir_.string());
}

namespace {

struct TokenStat {
  std::string original;  // first-seen casing
  std::size_t count = 0;
  std::size_t first_pos = 0;
};

/// Extraction keeps hyphens inside words so hyphenated terms stay whole.
std::vector<std::string> term_tokens(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c) != 0 || c >= 0x80 || c == '-') {
      cur.push_back(static_cast<char>(c));
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);
  for (std::string& t : out) {
    while (!t.empty() && t.front() == '-') t.erase(t.begin());
    while (!t.empty() && t.back() == '-') t.pop_back();
  }
  std::erase_if(out, [](const std::string& t) { return t.empty(); });
  return out;
}

std::vector<TokenStat> content_token_stats(const std::string& text) {
  std::map<std::string, TokenStat> stats;
  const std::vector<std::string> toks = term_tokens(text);
  for (std::size_t i = 0; i < toks.size(); ++i) {
    const std::string low = to_lower(toks[i]);
    if (low.size() < 2 || is_stopword(low)) continue;
    auto [it, fresh] = stats.emplace(low, TokenStat{toks[i], 0, i});
    ++it->second.count;
    if (fresh) it->second.first_pos = i;
  }
  std::vector<TokenStat> out;
  for (auto& [low, st] : stats) out.push_back(st);
  std::sort(out.begin(), out.end(), [](const TokenStat& a, const TokenStat& b) {
    if (a.count != b.count) return a.count > b.count;
    return a.first_pos < b.first_pos;
  });
  return out;
}

std::string head_noun(const std::string& title) {
  const std::vector<std::string> toks = tokenize_preserving_case(title);
  for (auto it = toks.rbegin(); it != toks.rend(); ++it)
    if (!is_stopword(to_lower(*it))) return *it;
  return toks.empty() ? std::string("topic") : toks.back();
}

nlohmann::ordered_json mock_rule(const LlmRequest& req) {
  const auto& p = req.payload;
  nlohmann::ordered_json out;
  switch (req.kind) {
    case ReqKind::ExtractConcepts: {
      const std::string text =
          p["title"].get<std::string>() + "\n" + p["abstract"].get<std::string>();
      std::vector<TokenStat> stats = content_token_stats(text);
      const bool frequent_only = !stats.empty() && stats.front().count >= 2;
      nlohmann::ordered_json concepts = nlohmann::ordered_json::array();
      for (const TokenStat& st : stats) {
        if (frequent_only && st.count < 2) break;
        concepts.push_back(st.original);
        if (concepts.size() >= 8) break;
      }
      out["concepts"] = std::move(concepts);
      break;
    }
    case ReqKind::InduceHierarchy: {
      std::vector<std::string> concepts;
      for (const auto& c : p["concepts"]) concepts.push_back(c.get<std::string>());
      // Group by leading token. The shortest member (the bare token when
      // present) heads its group; everything else nests below it.
      std::map<std::string, std::vector<std::string>> groups;
      for (const std::string& c : concepts) {
        const std::vector<std::string> toks = tokenize(c);
        groups[toks.empty() ? c : toks.front()].push_back(c);
      }
      nlohmann::ordered_json children = nlohmann::ordered_json::array();
      for (auto& [lead, members] : groups) {
        std::sort(members.begin(), members.end(), [](const std::string& a, const std::string& b) {
          if (a.size() != b.size()) return a.size() < b.size();
          return a < b;
        });
        nlohmann::ordered_json head;
        head["label"] = members.front();
        nlohmann::ordered_json kids = nlohmann::ordered_json::array();
        for (std::size_t i = 1; i < members.size(); ++i) {
          nlohmann::ordered_json k;
          k["label"] = members[i];
          k["children"] = nlohmann::ordered_json::array();
          kids.push_back(std::move(k));
        }
        head["children"] = std::move(kids);
        children.push_back(std::move(head));
      }
      nlohmann::ordered_json tree;
      tree["label"] = "root";
      tree["children"] = std::move(children);
      out["tree"] = std::move(tree);
      break;
    }
    case ReqKind::LabelCluster: {
      const auto& cands = p["candidates"];
      if (!cands.empty()) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < cands.size(); ++i)
          if (cands[i]["count"].get<std::size_t>() >
              cands[best]["count"].get<std::size_t>())
            best = i;
        out["title"] = cands[best]["surface"];
      } else {
        std::string joined;
        for (const auto& t : p["paper_titles"])
          joined += t.get<std::string>() + "\n";
        std::vector<TokenStat> stats = content_token_stats(joined);
        std::sort(stats.begin(), stats.end(), [](const TokenStat& a, const TokenStat& b) {
          if (a.count != b.count) return a.count > b.count;
          return to_lower(a.original) < to_lower(b.original);
        });
        out["title"] = stats.empty() ? std::string("topic") : stats.front().original;
      }
      break;
    }
    case ReqKind::AlignTitle: {
      const std::string candidate = p["candidate_title"].get<std::string>();
      const std::vector<std::string> cand_toks = tokenize(candidate);
      std::set<std::string> root_toks;
      for (const std::string& t : tokenize(p["root_title"].get<std::string>()))
        root_toks.insert(t);
      bool overlap = false;
      for (const std::string& t : cand_toks)
        if (root_toks.count(t)) {
          overlap = true;
          break;
        }
      out["title"] = overlap ? candidate
                             : head_noun(p["parent_title"].get<std::string>()) + " " + candidate;
      break;
    }
    case ReqKind::ExpandSiblings:
      out["proposals"] = nlohmann::ordered_json::array();
      break;
    case ReqKind::ScoreConcept: {
      const std::size_t toks = tokenize(p["title"].get<std::string>()).size();
      const int score = std::clamp(5 + static_cast<int>(std::min<std::size_t>(5, toks)), 1, 10);
      out["score"] = score;
      break;
    }
    case ReqKind::VerifyRedundancy: {
      std::set<std::string> a, b;
      for (const std::string& t : tokenize(p["a"].get<std::string>())) a.insert(t);
      for (const std::string& t : tokenize(p["b"].get<std::string>())) b.insert(t);
      out["redundant"] = (a == b);
      break;
    }
  }
  return out;
}

}  // namespace

std::string MockProvider::raw_complete(const LlmRequest& req, const std::string&) {
  if (!fixtures_dir_.empty()) {
    const std::filesystem::path fixture = fixtures_dir_ / payload_digest(req);
    if (std::filesystem::exists(fixture)) return read_file(fixture);
  }
  return "<<<" + mock_rule(req).dump() + ">>>";
}

// ---------------------------------------------------------------------------
// Request builders
// ---------------------------------------------------------------------------

LlmRequest make_extract_request(const Paper& paper, const std::string& lang) {
  LlmRequest req{ReqKind::ExtractConcepts, {}, "default", lang};
  req.payload["id"] = paper.id;
  req.payload["title"] = paper.title;
  req.payload["abstract"] = paper.abstract;
  return req;
}

LlmRequest make_induce_request(const std::vector<std::string>& concepts, bool is_merge_pass,
                               const std::string& lang) {
  LlmRequest req{ReqKind::InduceHierarchy, {}, "default", lang};
  req.payload["concepts"] = concepts;
  req.payload["merge"] = is_merge_pass;
  return req;
}

LlmRequest make_label_request(const std::vector<LabelCandidate>& candidates,
                              const std::vector<std::string>& paper_titles,
                              const std::string& lang) {
  LlmRequest req{ReqKind::LabelCluster, {}, "default", lang};
  nlohmann::ordered_json cands = nlohmann::ordered_json::array();
  for (const LabelCandidate& c : candidates) {
    nlohmann::ordered_json j;
    j["surface"] = c.surface;
    j["count"] = c.count;
    j["concentration"] = c.concentration;
    cands.push_back(std::move(j));
  }
  req.payload["candidates"] = std::move(cands);
  req.payload["paper_titles"] = paper_titles;
  return req;
}

LlmRequest make_align_request(const std::string& root_title, const std::string& parent_title,
                              const std::string& candidate_title,
                              const std::vector<PromptPaper>& papers,
                              const std::string& lang) {
  LlmRequest req{ReqKind::AlignTitle, {}, "default", lang};
  req.payload["root_title"] = root_title;
  req.payload["parent_title"] = parent_title;
  req.payload["candidate_title"] = candidate_title;
  nlohmann::ordered_json ps = nlohmann::ordered_json::array();
  for (const PromptPaper& p : papers) {
    nlohmann::ordered_json j;
    j["title"] = p.title;
    j["abstract"] = p.abstract_excerpt;
    ps.push_back(std::move(j));
  }
  req.payload["papers"] = std::move(ps);
  return req;
}

LlmRequest make_expand_request(const std::string& parent_title,
                               const std::vector<std::string>& sibling_titles,
                               const std::string& lang) {
  LlmRequest req{ReqKind::ExpandSiblings, {}, "default", lang};
  req.payload["parent_title"] = parent_title;
  req.payload["sibling_titles"] = sibling_titles;
  return req;
}

LlmRequest make_score_request(const std::string& title, std::size_t paper_count,
                              const std::vector<std::string>& sample_titles,
                              const std::string& lang) {
  LlmRequest req{ReqKind::ScoreConcept, {}, "default", lang};
  req.payload["title"] = title;
  req.payload["paper_count"] = paper_count;
  req.payload["sample_titles"] = sample_titles;
  return req;
}

LlmRequest make_verify_request(const std::string& a, const std::string& b,
                               const std::string& lang) {
  LlmRequest req{ReqKind::VerifyRedundancy, {}, "default", lang};
  req.payload["a"] = a;
  req.payload["b"] = b;
  return req;
}

std::vector<PromptPaper> prompt_papers(const Corpus& corpus,
                                       const std::vector<std::string>& paper_ids) {
  std::vector<std::string> ids = paper_ids;
  std::sort(ids.begin(), ids.end());
  std::vector<PromptPaper> out;
  for (const std::string& id : ids) {
    if (out.size() >= 10) break;
    const Paper& p = corpus.by_id(id);
    std::string ab = p.abstract;
    if (ab.size() > 400) {
      std::size_t cut = 400;
      while (cut > 0 && (static_cast<unsigned char>(ab[cut]) & 0xc0) == 0x80) --cut;
      ab.resize(cut);
    }
    out.push_back({p.title, ab});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Typed accessors
// ---------------------------------------------------------------------------

std::vector<std::string> response_concepts(const LlmResponse& r) {
  std::vector<std::string> out;
  for (const auto& c : r.data.at("concepts")) out.push_back(c.get<std::string>());
  return out;
}

std::string response_title(const LlmResponse& r) { return r.data.at("title").get<std::string>(); }

std::vector<std::string> response_proposals(const LlmResponse& r) {
  std::vector<std::string> out;
  for (const auto& c : r.data.at("proposals")) out.push_back(c.get<std::string>());
  return out;
}

int response_score(const LlmResponse& r) { return r.data.at("score").get<int>(); }

bool response_redundant(const LlmResponse& r) { return r.data.at("redundant").get<bool>(); }

nlohmann::json response_tree(const LlmResponse& r) { return r.data.at("tree"); }

}  // namespace taxo

#pragma once

#include <unistd.h>

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "taxo/llm.hpp"
#include "taxo/tree.hpp"
#include "taxo/util.hpp"

namespace taxo::testing {

/// Fresh directory under the system temp root, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<uint64_t> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("taxo-test-" + tag + "-" + std::to_string(::getpid()) + "-" +
             std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Provider returning a canned sequence of raw texts; wraps around.
class ScriptedProvider : public Provider {
 public:
  explicit ScriptedProvider(std::vector<std::string> responses)
      : responses_(std::move(responses)) {}
  std::string name() const override { return "scripted"; }
  std::string raw_complete(const LlmRequest&, const std::string&) override {
    if (responses_.empty()) return "";
    const std::string r = responses_[std::min(next_, responses_.size() - 1)];
    ++next_;
    return r;
  }
  std::size_t calls() const { return next_; }

 private:
  std::vector<std::string> responses_;
  std::size_t next_ = 0;
};

/// Provider that always throws, for error-path tests.
class FailingProvider : public Provider {
 public:
  std::string name() const override { return "failing"; }
  std::string raw_complete(const LlmRequest&, const std::string&) override {
    fail("scripted transport failure");
  }
};

/// Forwards to an inner provider while counting calls per request kind.
class CountingProvider : public Provider {
 public:
  explicit CountingProvider(Provider& inner) : inner_(inner) {}
  std::string name() const override { return inner_.name(); }
  std::string raw_complete(const LlmRequest& req, const std::string& prompt) override {
    ++counts_[static_cast<int>(req.kind)];
    return inner_.raw_complete(req, prompt);
  }
  std::size_t count(ReqKind kind) const {
    auto it = counts_.find(static_cast<int>(kind));
    return it == counts_.end() ? 0 : it->second;
  }

 private:
  Provider& inner_;
  std::map<int, std::size_t> counts_;
};

/// Random rooted tree with `n` nodes, titles drawn from a small vocabulary
/// (suffixed per sibling for distinctness), and every paper in `paper_ids`
/// attached to a random node.
inline TaxNode random_tree(uint64_t& state, std::size_t n,
                           const std::vector<std::string>& paper_ids) {
  static const char* kVocab[] = {"pruning",  "quantization", "distillation",
                                 "adapters", "sparsity",     "routing",
                                 "retrieval", "alignment",   "decoding"};
  std::vector<TaxNode*> nodes;
  TaxNode root;
  root.title = "root " + std::to_string(splitmix64(state) % 100);
  nodes.push_back(&root);
  for (std::size_t i = 1; i < n; ++i) {
    TaxNode* parent = nodes[splitmix64(state) % nodes.size()];
    TaxNode child;
    child.title = std::string(kVocab[splitmix64(state) % 9]) + " " +
                  std::to_string(parent->children.size()) + "-" + std::to_string(i);
    parent->children.push_back(std::move(child));
    // Pointers into vectors go stale on growth; rebuild the index.
    nodes.clear();
    walk_mut(root, [&](TaxNode& t, int) { nodes.push_back(&t); });
  }
  for (const std::string& p : paper_ids) {
    TaxNode* target = nodes[splitmix64(state) % nodes.size()];
    target->paper_ids.push_back(p);
  }
  walk_mut(root, [&](TaxNode& t, int) {
    std::sort(t.paper_ids.begin(), t.paper_ids.end());
  });
  assign_preorder_ids(root);
  return root;
}

inline std::vector<std::string> make_paper_ids(std::size_t n) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "p%03zu", i);
    ids.push_back(buf);
  }
  return ids;
}

/// Small random tree for edit-distance tests: titles may repeat across the
/// two trees so zero-cost substitutions occur.
inline TaxNode random_small_tree(uint64_t& state, std::size_t max_nodes) {
  static const char* kTitles[] = {"alpha", "beta",       "gamma",      "delta",
                                  "alpha beta", "beta alpha", "epsilon"};
  const std::size_t n = 1 + splitmix64(state) % max_nodes;
  std::vector<TaxNode*> nodes;
  TaxNode root;
  root.title = kTitles[splitmix64(state) % 7];
  nodes.push_back(&root);
  for (std::size_t i = 1; i < n; ++i) {
    TaxNode* parent = nodes[splitmix64(state) % nodes.size()];
    TaxNode child;
    child.title = kTitles[splitmix64(state) % 7];
    parent->children.push_back(std::move(child));
    nodes.clear();
    walk_mut(root, [&](TaxNode& t, int) { nodes.push_back(&t); });
  }
  return root;
}

}  // namespace taxo::testing

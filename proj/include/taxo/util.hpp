#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace taxo {

/// Error type carried by every failure in the library. The message is
/// expected to name the offending entity (paper id, line number, file).
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

[[noreturn]] inline void fail(const std::string& msg) { throw Error(msg); }

// ---------------------------------------------------------------------------
// Deterministic hashing / RNG. All randomized behavior in the library goes
// through these so results are identical across platforms and stdlibs.
// ---------------------------------------------------------------------------

uint64_t fnv1a64(std::string_view s);

inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// One mixed draw from a (seed, tag) pair without mutating a carried state.
inline uint64_t mix_seed(uint64_t seed, uint64_t tag) {
  uint64_t s = seed ^ (0x9e3779b97f4a7c15ULL * (tag + 1));
  return splitmix64(s);
}

/// Uniform double in [0, 1).
inline double next_unit(uint64_t& state) {
  return static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;
}

/// SHA-256 of a byte string, lowercase hex. Used for content digests,
/// fixture keys, and stage-trace chaining.
std::string sha256_hex(std::string_view data);

// ---------------------------------------------------------------------------
// Text handling
// ---------------------------------------------------------------------------

/// Lowercase tokens split on ASCII non-alphanumerics. Bytes >= 0x80 are kept
/// inside tokens so UTF-8 words survive intact.
std::vector<std::string> tokenize(std::string_view text);

/// Same split, original casing preserved.
std::vector<std::string> tokenize_preserving_case(std::string_view text);

/// Lowercased tokens joined by single spaces; canonical form used for title
/// comparison and sibling distinctness.
std::string normalize_text(std::string_view text);

bool is_stopword(const std::string& lowercase_token);

std::string to_lower(std::string_view s);

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

std::string read_file(const std::filesystem::path& path);

/// Write-temp-then-rename so readers never observe a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view data);

}  // namespace taxo

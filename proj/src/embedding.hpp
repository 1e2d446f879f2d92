#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "util.hpp"

namespace rankvocab {

enum class Metric { kCosine, kDistanceKernel };

Metric metric_from_string(const std::string& name);
const char* metric_name(Metric m);

// Immutable after load; safe for concurrent readers.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(int32_t dim) : dim_(dim) {}

  int32_t dim() const { return dim_; }
  int64_t size() const { return static_cast<int64_t>(words_.size()); }
  const std::vector<std::string>& words() const { return words_; }
  const std::string& word(int64_t i) const { return words_[static_cast<size_t>(i)]; }

  std::optional<int64_t> find(std::string_view word) const;
  bool contains(std::string_view word) const { return find(word).has_value(); }
  std::span<const double> row(int64_t i) const;

  /// Appends a new row. Returns false (and leaves the table unchanged) if the
  /// word is already present.
  bool add(const std::string& word, std::span<const double> vec);
  bool add(const std::string& word, std::initializer_list<double> vec) {
    return add(word, std::span<const double>(vec.begin(), vec.size()));
  }

  bool operator==(const EmbeddingTable& other) const;

 private:
  int32_t dim_ = 0;
  std::vector<std::string> words_;
  std::vector<double> matrix_;  // row-major, |words| x dim
  std::unordered_map<std::string, int64_t> index_;
};

struct EmbeddingLoadStats {
  int64_t duplicate_lines = 0;  // later occurrences of an already-seen word
  bool header_skipped = false;
};

/// Plain whitespace text, one `word v1 .. v_dim` per line. A leading
/// `count dim` header line (exactly two integer tokens) is skipped.
EmbeddingTable load_embeddings(const std::string& path, int32_t dim,
                               EmbeddingLoadStats* stats = nullptr);

void save_embeddings(const EmbeddingTable& table, const std::string& path);

/// Similarity in [0, 1]. Cosine clips negatives to 0; the distance kernel is
/// 1 / (1 + ||u - v||_2).
double similarity(std::span<const double> u, std::span<const double> v, Metric m);

struct SubTableResult {
  EmbeddingTable table;
  std::vector<std::string> missing;  // vocab words absent from the source table
};

/// Restricts the table to `vocab`, in vocab order. Absent words land in the
/// miss-list instead of failing.
SubTableResult sub_table(const EmbeddingTable& table, const std::vector<std::string>& vocab);

}  // namespace rankvocab

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "util.hpp"

namespace rankvocab {

enum class Split { kTrain, kTest };

struct Document {
  std::string label;
  Split split = Split::kTrain;
  std::vector<std::string> tokens;
};

struct Corpus {
  std::vector<Document> docs;
  std::vector<std::string> labels;  // insertion order of first appearance

  void add(Document doc);
  int64_t label_index(const std::string& label) const;  // -1 when absent
  int64_t num_in_split(Split s) const;

 private:
  std::unordered_map<std::string, int64_t> label_index_;
};

/// Lowercases, splits on maximal runs of non-alphanumeric characters, drops
/// empty tokens. Bytes >= 0x80 count as word characters so UTF-8 survives.
std::vector<std::string> tokenize(std::string_view text);

/// Deterministic suffix-rule lemmatizer (stemlike, documented approximate):
/// "sses"->"ss", "ies"->"y", "s"->"" (len>3, not "ss"), "ing"->"" (len>5),
/// "ed"->"" (len>4), iterated to a fixpoint so the result is stable.
std::string lemmatize(const std::string& token);

// `label` + `text` string fields per line, optional `split` (train|test;
// missing means train). Errors name the offending line.
Corpus ingest_jsonl(const std::string& path);
// <root>/<split>/<label>/<docfile>; entries sorted for determinism.
Corpus ingest_dirs(const std::string& root);
Corpus ingest(const std::string& path, const std::string& format);

/// One word per line, '#' comments and blank lines allowed.
std::unordered_set<std::string> load_stopword_file(const std::string& path);
const std::unordered_set<std::string>& default_stopwords();

struct TokenStats {
  std::unordered_map<std::string, int64_t> counts;  // over the processed train split
  int64_t total = 0;
};

struct PreprocessResult {
  Corpus corpus;
  TokenStats stats;
  std::vector<std::string> candidates;  // count >= min_count, count desc, lexicographic ties
};

PreprocessResult preprocess(const Corpus& corpus, const std::unordered_set<std::string>& stopwords,
                            int64_t min_count);

// Processed-corpus directory: corpus.jsonl, token_stats.tsv, candidates.tsv.
void save_processed(const PreprocessResult& pre, const std::string& dir);
Corpus load_processed_corpus(const std::string& dir);
TokenStats load_token_stats(const std::string& path);
void save_token_stats(const TokenStats& stats, const std::string& path);
/// First tab-separated field of every non-empty line.
std::vector<std::string> load_word_column(const std::string& path);
void save_word_list(const std::vector<std::string>& words, const std::string& path);

// Index 0 is padding, index 1 is OOV; words occupy 2..size+1.
struct Vocab {
  std::vector<std::string> words;

  static Vocab from_words(std::vector<std::string> words);
  int64_t size() const { return static_cast<int64_t>(words.size()); }
  int64_t total_indices() const { return size() + 2; }
  int64_t index_of(std::string_view word) const;  // 1 (OOV) when absent

 private:
  std::unordered_map<std::string, int64_t> index_;
};

/// Maps tokens to indices (OOV -> 1), truncates to maxlen, right-pads with 0.
std::vector<int64_t> encode(std::span<const std::string> tokens, const Vocab& vocab,
                            int64_t maxlen);

}  // namespace rankvocab

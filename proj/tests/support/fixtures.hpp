#pragma once

#include <string>
#include <vector>

#include "../../src/corpus.hpp"
#include "../../src/embedding.hpp"

namespace rankvocab::fixtures {

// 25 words per class; names end in digits so preprocessing never rewrites them.
std::vector<std::string> class_words(int cls);
std::vector<std::string> synthetic_words();  // both classes, class 0 first

/// Two-class corpus with disjoint per-class vocabularies (labels "pos"/"neg"),
/// 8-15 tokens per doc, every 5th doc in the test split. Linearly separable by
/// construction.
Corpus make_synthetic_corpus(int64_t num_docs, uint64_t seed);

/// Embeddings clustered by class along the first axis (+2 vs -2, +-0.3 noise),
/// covering every synthetic word.
EmbeddingTable make_synthetic_embeddings(int64_t dim, uint64_t seed);

}  // namespace rankvocab::fixtures

#include "fixtures.hpp"

#include "../../src/rng.hpp"
#include "../../src/util.hpp"

namespace rankvocab::fixtures {

std::vector<std::string> class_words(int cls) {
  std::vector<std::string> words;
  const char* stem = cls == 0 ? "redfruit" : "bluemetal";
  for (int i = 0; i < 25; i++) words.push_back(stem + std::to_string(i));
  return words;
}

std::vector<std::string> synthetic_words() {
  std::vector<std::string> all = class_words(0);
  for (const std::string& w : class_words(1)) all.push_back(w);
  return all;
}

Corpus make_synthetic_corpus(int64_t num_docs, uint64_t seed) {
  std::vector<std::string> pool[2] = {class_words(0), class_words(1)};
  Corpus c;
  CounterRng rng = CounterRng::keyed(seed, {streams::kSynth, 0});
  for (int64_t i = 0; i < num_docs; i++) {
    int cls = static_cast<int>(i % 2);
    Split split = (i % 5 == 4) ? Split::kTest : Split::kTrain;
    size_t len = 8 + static_cast<size_t>(rng.below(8));
    std::vector<std::string> tokens;
    for (size_t t = 0; t < len; t++)
      tokens.push_back(pool[cls][static_cast<size_t>(rng.below(pool[cls].size()))]);
    c.add({cls == 0 ? "pos" : "neg", split, std::move(tokens)});
  }
  return c;
}

EmbeddingTable make_synthetic_embeddings(int64_t dim, uint64_t seed) {
  EmbeddingTable table(static_cast<int32_t>(dim));
  for (int cls = 0; cls < 2; cls++) {
    double center = cls == 0 ? 2.0 : -2.0;
    for (const std::string& w : class_words(cls)) {
      CounterRng rng = CounterRng::keyed(seed, {streams::kSynth, 1, fnv1a64(w)});
      std::vector<double> vec(static_cast<size_t>(dim));
      for (auto& v : vec) v = rng.uniform(-0.3, 0.3);
      vec[0] += center;
      table.add(w, vec);
    }
  }
  return table;
}

}  // namespace rankvocab::fixtures

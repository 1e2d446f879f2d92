#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "embedding.hpp"
#include "model.hpp"
#include "wordrank.hpp"

namespace rankvocab {

struct TrainConfig {
  double lr = 1e-3;
  int64_t epochs = 5;
  int64_t batch_size = 32;
  uint64_t seed = 42;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  void validate() const;
};

struct EpochStats {
  double train_loss = 0;
  double train_accuracy = 0;
  double test_accuracy = 0;
  double seconds = 0;
};

struct RunReport {
  std::vector<EpochStats> epochs;
  std::vector<double> attention_means;  // per branch after training; empty for baselines
  int64_t params_total = 0;
};

std::string report_tsv(const RunReport& report);
std::string report_kv_text(const RunReport& report);
/// Writes `dir`/report.tsv and `dir`/report.txt.
void save_report(const RunReport& report, const std::string& dir);

struct EncodedCorpus {
  std::vector<std::vector<int64_t>> train_docs, test_docs;  // fixed-length index rows
  std::vector<int64_t> train_labels, test_labels;
  std::vector<std::string> label_names;
  int64_t num_classes() const { return static_cast<int64_t>(label_names.size()); }
};
EncodedCorpus encode_corpus(const Corpus& corpus, const Vocab& vocab, int64_t maxlen);

// Adaptive-moment optimizer. Owns per-tensor moment state; call step() with
// the same tensors in the same order every time.
class Adam {
 public:
  Adam(double lr, double beta1, double beta2, double eps);
  explicit Adam(const TrainConfig& tc) : Adam(tc.lr, tc.beta1, tc.beta2, tc.adam_eps) {}
  void step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads);

 private:
  double lr_, b1_, b2_, eps_;
  int64_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

/// Mini-batch training of the TextCNN. Deterministic given the seed: epoch
/// shuffles, dropout masks, batching, and update order are all reproducible.
/// The padding embedding row stays zero throughout.
RunReport train_model(ModelParams& params, const EncodedCorpus& data, const TrainConfig& tc);

/// Fraction of docs whose argmax logit (first index on ties) equals the label.
double evaluate_model(const ModelParams& params, const std::vector<std::vector<int64_t>>& docs,
                      const std::vector<int64_t>& labels);

// ---- linear baselines ----

struct LinearParams {
  Tensor weight;  // [C x F]
  Tensor bias;    // [C]
};

// One doc as (feature id, value) pairs, ids strictly increasing.
using SparseVec = std::vector<std::pair<int64_t, double>>;

/// Multinomial logistic regression loss with closed-form gradients; grad_w and
/// grad_b (when non-null) are accumulated into, not overwritten.
double lr_loss_grad(const LinearParams& lp, const SparseVec& x, int64_t label, Tensor* grad_w,
                    Tensor* grad_b);
int64_t lr_predict(const LinearParams& lp, const SparseVec& x);

/// Bag-of-words (ngram=1) or uni+bigram (ngram=2) counts + logistic
/// regression, trained by the same optimizer and schedule as the main model.
/// Bigram features are index pairs observed in the train split.
RunReport train_baseline_bow(const Corpus& corpus, const Vocab& vocab, int ngram,
                             const TrainConfig& tc, LinearParams* out_params = nullptr);

/// Mean non-pad embedding vector per doc (zero tokens -> zero vector) with a
/// softmax classifier on top; the embedding matrix stays frozen.
RunReport train_baseline_avgemb(const Corpus& corpus, const Vocab& vocab, const Tensor& embedding,
                                const TrainConfig& tc, LinearParams* out_params = nullptr);

/// Mean of the embedding rows of the non-pad indices; all-pad -> zero vector.
Tensor avg_embedding_vector(const Tensor& embedding, std::span<const int64_t> indices);

/// Baseline checkpoint: `dir`/checkpoint.txt manifest plus weight.bin /
/// bias.bin little-endian arrays. Round-trips bit-exactly.
void save_linear_checkpoint(const LinearParams& lp, const std::string& model_name,
                            const std::string& dir);
struct LinearCheckpoint {
  std::string model_name;
  LinearParams params;
};
LinearCheckpoint load_linear_checkpoint(const std::string& dir);

// ---- flat run configuration (the CLI/config-file key set) ----

struct RunConfig {
  std::string model = "textcnn";  // textcnn | bow | bigram | avgemb
  int64_t embed_dim = 100;
  int64_t maxlen = 70;
  std::vector<int64_t> filter_sizes = {2, 3, 4, 5};
  int64_t filters_per_size = 128;
  std::string attention = "additive";
  int64_t attention_dim = 64;
  double dropout_p = 0.2;
  bool trainable_embeddings = true;
  double lr = 1e-3;
  int64_t epochs = 5;
  int64_t batch_size = 32;
  uint64_t seed = 42;
  std::string metric = "cosine";
  int64_t graph_k = 50;
  bool symmetrize = false;
  double damping = 0.85;
  double tol = 1e-8;
  int64_t max_iter = 200;
};

/// Parses the canonical key set; unknown keys are an error.
RunConfig parse_run_config(const KvMap& kv);
/// Every key materialized, floats formatted to round-trip exactly.
KvMap dump_run_config(const RunConfig& rc);
ModelConfig to_model_config(const RunConfig& rc, int64_t vocab_size, int64_t num_classes);
TrainConfig to_train_config(const RunConfig& rc);

// ---- vocabulary-selection comparison harness ----

struct CompareRow {
  std::string method;  // "frequency" | "wordrank"
  int64_t k = 0;
  int64_t params_total = 0;
  double test_accuracy = 0;
  double seconds_per_epoch = 0;  // mean over epochs
};

std::string comparison_tsv(const std::vector<CompareRow>& rows);

/// For each K and each method, selects a vocabulary, trains the TextCNN from
/// scratch, and evaluates it. All cells share the seed in `rc`, so results do
/// not depend on `jobs`. Writes per-cell outputs (vocab.txt, report.*) and
/// comparison.tsv under out_dir; returns the table rows (frequency rows first,
/// each in the given K order).
std::vector<CompareRow> compare_vocab_methods(const Corpus& corpus, const TokenStats& stats,
                                              const std::vector<std::string>& candidates,
                                              const EmbeddingTable& pretrained,
                                              const std::vector<int64_t>& ks, const RunConfig& rc,
                                              int jobs, const std::string& out_dir);

}  // namespace rankvocab

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "embedding.hpp"
#include "tensor.hpp"

namespace rankvocab {

// Architecture knobs. vocab_size counts real words only; the embedding matrix
// carries two extra rows (0 = padding, frozen at zero; 1 = OOV, trainable).
struct ModelConfig {
  int64_t vocab_size = 0;
  int64_t num_classes = 0;
  int64_t embed_dim = 100;
  int64_t maxlen = 70;
  std::vector<int64_t> filter_sizes = {2, 3, 4, 5};
  int64_t filters_per_size = 128;
  std::string attention = "additive";  // "additive" | "dot"
  int64_t attention_dim = 64;
  double dropout_p = 0.2;
  bool trainable_embeddings = true;

  int64_t num_branches() const { return static_cast<int64_t>(filter_sizes.size()); }
  bool additive_attention() const { return attention == "additive"; }
  void validate() const;  // throws InvalidArgument on any broken invariant
};

struct ParamCounts {
  int64_t embedding = 0;
  int64_t conv = 0;
  int64_t attention = 0;
  int64_t classifier = 0;
  int64_t total = 0;
};
ParamCounts count_params(const ModelConfig& config);

struct ModelParams {
  ModelConfig config;
  Tensor embedding;                  // [(V+2) x D]
  std::vector<Tensor> conv_weights;  // per branch [F x h x D]
  std::vector<Tensor> conv_biases;   // per branch [F]
  Tensor attn_proj;                  // [A x F]  (additive only)
  Tensor attn_bias;                  // [A]      (additive only)
  Tensor attn_context;               // [A]      (additive only)
  Tensor attn_query;                 // [F]      (dot only)
  Tensor cls_weight;                 // [C x F]
  Tensor cls_bias;                   // [C]

  /// Visits every active parameter with its stable path name, in a fixed
  /// order: embedding, conv.<b>.{weight,bias}, attention.*, classifier.*.
  void for_each_param(const std::function<void(const std::string&, Tensor&)>& fn);
  void for_each_param(const std::function<void(const std::string&, const Tensor&)>& fn) const;
};

/// Allocates all parameter tensors at their configured shapes, zero-filled.
ModelParams zeros_params(const ModelConfig& config);

/// Embedding rows for vocab words found in `pretrained` (nullable) are copied;
/// missing words and the OOV row draw uniform values in [-0.05, 0.05] from a
/// stream keyed by the word itself, so a row's contents do not depend on where
/// the word sits in the vocabulary. Other weights use fan-scaled uniform init
/// (+-sqrt(6/(fan_in+fan_out))); all biases start at zero.
ModelParams init_params(const ModelConfig& config, std::span<const std::string> vocab_words,
                        const EmbeddingTable* pretrained, uint64_t seed);

// Tape handles for one staging of the parameters.
struct StagedParams {
  Var embedding;
  std::vector<Var> conv_weights;
  std::vector<Var> conv_biases;
  Var attn_proj, attn_bias, attn_context, attn_query;
  Var cls_weight, cls_bias;
};

/// Loads the parameters onto `tape`. With trainable=true every tensor becomes
/// a gradient leaf (the embedding obeys config.trainable_embeddings).
StagedParams stage_params(Tape& tape, const ModelParams& params, bool trainable);

struct DocForward {
  Var logits;                       // [C]
  Var attention;                    // [B'] over the branches actually run
  std::vector<Var> branch_vectors;  // B' pooled vectors, each [F]
};

/// One document through the network: embed -> spatial dropout -> per-branch
/// conv+relu+max-over-time -> attention-weighted sum -> linear classifier.
/// `seq` must be exactly config.maxlen indices. `branch_subset` (optional)
/// restricts the forward pass to those branch indices, e.g. to measure the
/// effect of pruning a low-attention branch.
DocForward forward_doc(Tape& tape, const StagedParams& staged, const ModelConfig& config,
                       std::span<const int64_t> seq, bool train, CounterRng* dropout_rng,
                       const std::vector<int64_t>* branch_subset = nullptr);

// Eval-mode forward outputs as plain tensors.
struct ForwardTrace {
  Tensor logits;             // [C]
  Tensor attention_weights;  // [B]
  std::vector<Tensor> branch_vectors;
};
ForwardTrace forward_eval(const ModelParams& params, std::span<const int64_t> seq,
                          const std::vector<int64_t>* branch_subset = nullptr);

/// Writes `dir`/checkpoint.txt (config + per-parameter file/shape entries) and
/// one <path>.bin per parameter holding its values as little-endian 64-bit
/// floats. Round-trips bit-exactly.
void save_checkpoint(const ModelParams& params, const std::string& dir);
ModelParams load_checkpoint(const std::string& dir);

// Raw little-endian 64-bit float array files, as used by checkpoints.
void write_doubles_le(const std::string& path, std::span<const double> v);
std::vector<double> read_doubles_le(const std::string& path, size_t expected);

}  // namespace rankvocab

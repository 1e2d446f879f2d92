#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "embedding.hpp"
#include "util.hpp"

namespace rankvocab {

struct Edge {
  int64_t dst = 0;  // node index
  double weight = 0.0;
};

// Directed k-NN word graph. Edge weights are similarities in (0, 1];
// zero-similarity pairs and self-edges are never stored.
struct SimilarityGraph {
  std::vector<std::string> nodes;
  std::vector<std::vector<Edge>> edges;  // outgoing, per node
  int64_t k = 0;                         // neighbor cap used at construction

  int64_t n() const { return static_cast<int64_t>(nodes.size()); }
  int64_t num_edges() const;
};

struct GraphBuildStats {
  std::vector<std::string> dropped;  // candidates absent from the table
};

/// Links every candidate to its k most-similar other candidates (ties broken
/// by candidate order). Candidates missing from the table are dropped into
/// `stats`. `symmetrize` adds reverse edges (same weight), which may push a
/// node past k outgoing edges. `jobs` <= 0 means one worker per core; the
/// result is identical for any worker count.
SimilarityGraph build_similarity_graph(const std::vector<std::string>& candidates,
                                       const EmbeddingTable& table, Metric metric, int64_t k,
                                       bool symmetrize = false, int jobs = 1,
                                       GraphBuildStats* stats = nullptr);

// Column-stochastic sparse matrix: columns[j] holds (row, probability) of
// node j's normalized outgoing weights. A dangling node's column is the
// implicit uniform 1/n, flagged rather than stored.
struct TransitionMatrix {
  int64_t n = 0;
  std::vector<std::vector<Edge>> columns;
  std::vector<bool> dangling;
};

TransitionMatrix to_transition_matrix(const SimilarityGraph& graph);

struct PagerankResult {
  std::vector<double> scores;  // positive, sums to 1
  int64_t iterations = 0;
  bool converged = false;
};

/// Power iteration r <- (1-d)/n + d*M*r from uniform r0; each iterate is
/// renormalized to sum 1; stops when the L1 step change drops below tol.
PagerankResult pagerank(const TransitionMatrix& m, double damping = 0.85, double tol = 1e-8,
                        int64_t max_iter = 200);

inline constexpr int64_t kExactSolveCap = 500;

/// Dense oracle: solves (I - d*M) r = (1-d)/n * 1 by Gaussian elimination
/// with partial pivoting. Requires n <= cap and d < 1.
std::vector<double> pagerank_exact(const TransitionMatrix& m, double damping = 0.85,
                                   int64_t cap = kExactSolveCap);

/// Top-K nodes by score, descending; ties broken by candidate order.
std::vector<std::string> select_vocab_wordrank(const std::vector<double>& scores,
                                               const SimilarityGraph& graph, int64_t k);

/// Top-K words by count, descending; lexicographic tie-break.
std::vector<std::string> select_vocab_frequency(const TokenStats& stats, int64_t k);

// Rank file: `word<TAB>score<TAB>rank` lines, descending score.
void save_ranks(const SimilarityGraph& graph, const std::vector<double>& scores,
                const std::string& path);
std::vector<std::pair<std::string, double>> load_ranks(const std::string& path);

// Debug dump: `src<TAB>dst<TAB>weight` lines.
void save_graph_tsv(const SimilarityGraph& graph, const std::string& path);

}  // namespace rankvocab

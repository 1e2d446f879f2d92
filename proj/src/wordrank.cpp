#include "wordrank.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <thread>
#include <unordered_set>

namespace rankvocab {

int64_t SimilarityGraph::num_edges() const {
  int64_t total = 0;
  for (const auto& out : edges) total += static_cast<int64_t>(out.size());
  return total;
}

SimilarityGraph build_similarity_graph(const std::vector<std::string>& candidates,
                                       const EmbeddingTable& table, Metric metric, int64_t k,
                                       bool symmetrize, int jobs, GraphBuildStats* stats) {
  if (k < 1) throw InvalidArgument("neighbor count k must be >= 1");
  SimilarityGraph g;
  g.k = k;
  std::vector<int64_t> rows;  // table row per surviving node
  std::unordered_set<std::string> seen;
  for (const std::string& w : candidates) {
    if (!seen.insert(w).second) throw InvalidArgument("duplicate candidate word '" + w + "'");
    if (auto row = table.find(w)) {
      g.nodes.push_back(w);
      rows.push_back(*row);
    } else if (stats) {
      stats->dropped.push_back(w);
    }
  }
  int64_t n = g.n();
  if (n < 2)
    throw InvalidArgument("need at least 2 candidates with embeddings, got " + std::to_string(n));
  g.edges.resize(static_cast<size_t>(n));

  auto build_row = [&](int64_t i) {
    // (similarity, neighbor) pairs; keep the k largest, earlier candidates
    // winning ties.
    std::vector<std::pair<double, int64_t>> sims;
    sims.reserve(static_cast<size_t>(n - 1));
    std::span<const double> u = table.row(rows[static_cast<size_t>(i)]);
    for (int64_t j = 0; j < n; j++) {
      if (j == i) continue;
      double s = similarity(u, table.row(rows[static_cast<size_t>(j)]), metric);
      if (s > 0.0) sims.emplace_back(s, j);
    }
    auto better = [](const std::pair<double, int64_t>& a, const std::pair<double, int64_t>& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    };
    size_t keep = std::min<size_t>(static_cast<size_t>(k), sims.size());
    std::partial_sort(sims.begin(), sims.begin() + static_cast<ptrdiff_t>(keep), sims.end(), better);
    auto& out = g.edges[static_cast<size_t>(i)];
    out.reserve(keep);
    for (size_t e = 0; e < keep; e++) out.push_back({sims[e].second, sims[e].first});
  };

  int workers = jobs > 0 ? jobs : static_cast<int>(std::thread::hardware_concurrency());
  if (workers < 1) workers = 1;
  workers = static_cast<int>(std::min<int64_t>(workers, n));
  if (workers <= 1) {
    for (int64_t i = 0; i < n; i++) build_row(i);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; t++) {
      pool.emplace_back([&, t] {
        for (int64_t i = t; i < n; i += workers) build_row(i);
      });
    }
    for (auto& th : pool) th.join();
  }

  if (symmetrize) {
    std::vector<std::set<int64_t>> have(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; i++)
      for (const Edge& e : g.edges[static_cast<size_t>(i)]) have[static_cast<size_t>(i)].insert(e.dst);
    for (int64_t i = 0; i < n; i++) {
      for (const Edge& e : g.edges[static_cast<size_t>(i)]) {
        if (!have[static_cast<size_t>(e.dst)].count(i)) {
          g.edges[static_cast<size_t>(e.dst)].push_back({i, e.weight});
          have[static_cast<size_t>(e.dst)].insert(i);
        }
      }
    }
  }
  return g;
}

TransitionMatrix to_transition_matrix(const SimilarityGraph& graph) {
  TransitionMatrix m;
  m.n = graph.n();
  m.columns.resize(static_cast<size_t>(m.n));
  m.dangling.resize(static_cast<size_t>(m.n), false);
  for (int64_t j = 0; j < m.n; j++) {
    const auto& out = graph.edges[static_cast<size_t>(j)];
    double total = 0.0;
    for (const Edge& e : out) total += e.weight;
    if (out.empty() || total <= 0.0) {
      m.dangling[static_cast<size_t>(j)] = true;
      continue;
    }
    auto& col = m.columns[static_cast<size_t>(j)];
    col.reserve(out.size());
    for (const Edge& e : out) col.push_back({e.dst, e.weight / total});
  }
  return m;
}

PagerankResult pagerank(const TransitionMatrix& m, double damping, double tol, int64_t max_iter) {
  if (m.n == 0) throw InvalidArgument("pagerank needs at least one node");
  if (!(damping >= 0.0 && damping <= 1.0)) throw InvalidArgument("damping must be in [0, 1]");
  if (!(tol > 0.0)) throw InvalidArgument("tolerance must be positive");
  if (max_iter < 1) throw InvalidArgument("max_iter must be >= 1");

  size_t n = static_cast<size_t>(m.n);
  double inv_n = 1.0 / static_cast<double>(m.n);
  std::vector<double> r(n, inv_n), next(n);
  PagerankResult res;
  for (int64_t it = 1; it <= max_iter; it++) {
    double dangling_mass = 0.0;
    for (size_t j = 0; j < n; j++)
      if (m.dangling[j]) dangling_mass += r[j];
    double base = (1.0 - damping) * inv_n + damping * dangling_mass * inv_n;
    std::fill(next.begin(), next.end(), base);
    for (size_t j = 0; j < n; j++) {
      double rj = r[j];
      for (const Edge& e : m.columns[j]) next[static_cast<size_t>(e.dst)] += damping * e.weight * rj;
    }
    double sum = std::accumulate(next.begin(), next.end(), 0.0);
    for (double& v : next) v /= sum;
    double delta = 0.0;
    for (size_t i = 0; i < n; i++) delta += std::abs(next[i] - r[i]);
    r.swap(next);
    res.iterations = it;
    if (delta < tol) {
      res.converged = true;
      break;
    }
  }
  res.scores = std::move(r);
  return res;
}

std::vector<double> pagerank_exact(const TransitionMatrix& m, double damping, int64_t cap) {
  if (m.n == 0) throw InvalidArgument("pagerank needs at least one node");
  if (m.n > cap)
    throw InvalidArgument("exact solver capped at " + std::to_string(cap) + " nodes, got " +
                          std::to_string(m.n));
  if (!(damping >= 0.0 && damping < 1.0))
    throw InvalidArgument("exact solver requires damping in [0, 1)");

  size_t n = static_cast<size_t>(m.n);
  double inv_n = 1.0 / static_cast<double>(m.n);
  // A = I - d*M with dangling columns densified to 1/n.
  std::vector<double> a(n * n, 0.0);
  for (size_t i = 0; i < n; i++) a[i * n + i] = 1.0;
  for (size_t j = 0; j < n; j++) {
    if (m.dangling[j]) {
      for (size_t i = 0; i < n; i++) a[i * n + j] -= damping * inv_n;
    } else {
      for (const Edge& e : m.columns[j]) a[static_cast<size_t>(e.dst) * n + j] -= damping * e.weight;
    }
  }
  std::vector<double> b(n, (1.0 - damping) * inv_n);

  // Gaussian elimination with partial pivoting.
  for (size_t col = 0; col < n; col++) {
    size_t pivot = col;
    for (size_t i = col + 1; i < n; i++)
      if (std::abs(a[i * n + col]) > std::abs(a[pivot * n + col])) pivot = i;
    if (a[pivot * n + col] == 0.0) throw InvalidArgument("singular transition system");
    if (pivot != col) {
      for (size_t c = 0; c < n; c++) std::swap(a[pivot * n + c], a[col * n + c]);
      std::swap(b[pivot], b[col]);
    }
    double d = a[col * n + col];
    for (size_t i = col + 1; i < n; i++) {
      double f = a[i * n + col] / d;
      if (f == 0.0) continue;
      for (size_t c = col; c < n; c++) a[i * n + c] -= f * a[col * n + c];
      b[i] -= f * b[col];
    }
  }
  std::vector<double> r(n);
  for (size_t ii = n; ii-- > 0;) {
    double acc = b[ii];
    for (size_t c = ii + 1; c < n; c++) acc -= a[ii * n + c] * r[c];
    r[ii] = acc / a[ii * n + ii];
  }
  double sum = std::accumulate(r.begin(), r.end(), 0.0);
  for (double& v : r) v /= sum;
  return r;
}

namespace {

std::vector<int64_t> order_by_score(const std::vector<double>& scores) {
  std::vector<int64_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int64_t a, int64_t b) {
    return scores[static_cast<size_t>(a)] > scores[static_cast<size_t>(b)];
  });
  return idx;
}

}  // namespace

std::vector<std::string> select_vocab_wordrank(const std::vector<double>& scores,
                                               const SimilarityGraph& graph, int64_t k) {
  if (static_cast<int64_t>(scores.size()) != graph.n())
    throw InvalidArgument("score count does not match graph size");
  if (k < 1 || k > graph.n())
    throw InvalidArgument("selection size " + std::to_string(k) + " out of range [1, " +
                          std::to_string(graph.n()) + "]");
  std::vector<int64_t> idx = order_by_score(scores);
  std::vector<std::string> out;
  out.reserve(static_cast<size_t>(k));
  for (int64_t i = 0; i < k; i++) out.push_back(graph.nodes[static_cast<size_t>(idx[static_cast<size_t>(i)])]);
  return out;
}

std::vector<std::string> select_vocab_frequency(const TokenStats& stats, int64_t k) {
  int64_t n = static_cast<int64_t>(stats.counts.size());
  if (k < 1 || k > n)
    throw InvalidArgument("selection size " + std::to_string(k) + " out of range [1, " +
                          std::to_string(n) + "]");
  std::vector<std::pair<std::string, int64_t>> rows(stats.counts.begin(), stats.counts.end());
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<std::string> out;
  out.reserve(static_cast<size_t>(k));
  for (int64_t i = 0; i < k; i++) out.push_back(rows[static_cast<size_t>(i)].first);
  return out;
}

void save_ranks(const SimilarityGraph& graph, const std::vector<double>& scores,
                const std::string& path) {
  if (static_cast<int64_t>(scores.size()) != graph.n())
    throw InvalidArgument("score count does not match graph size");
  std::vector<int64_t> idx = order_by_score(scores);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write rank file: " + path);
  for (size_t pos = 0; pos < idx.size(); pos++) {
    int64_t i = idx[pos];
    out << graph.nodes[static_cast<size_t>(i)] << '\t' << format_g(scores[static_cast<size_t>(i)], 17)
        << '\t' << (pos + 1) << '\n';
  }
}

std::vector<std::pair<std::string, double>> load_ranks(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open rank file: " + path);
  std::vector<std::pair<std::string, double>> rows;
  std::string line;
  int64_t lineno = 0;
  while (std::getline(in, line)) {
    lineno++;
    if (trim(line).empty()) continue;
    std::vector<std::string> cols = split(line, '\t');
    double score = 0;
    if (cols.size() < 3 || !parse_double(cols[1], &score))
      throw ParseError(path + ":" + std::to_string(lineno) + ": expected word<TAB>score<TAB>rank");
    rows.emplace_back(cols[0], score);
  }
  return rows;
}

void save_graph_tsv(const SimilarityGraph& graph, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write graph file: " + path);
  for (int64_t i = 0; i < graph.n(); i++) {
    for (const Edge& e : graph.edges[static_cast<size_t>(i)]) {
      out << graph.nodes[static_cast<size_t>(i)] << '\t' << graph.nodes[static_cast<size_t>(e.dst)]
          << '\t' << format_g(e.weight, 17) << '\n';
    }
  }
}

}  // namespace rankvocab

#include "embedding.hpp"

#include <cmath>
#include <fstream>

namespace rankvocab {

Metric metric_from_string(const std::string& name) {
  if (name == "cosine") return Metric::kCosine;
  if (name == "wmd" || name == "distance_kernel") return Metric::kDistanceKernel;
  throw InvalidArgument("unknown metric '" + name + "' (expected cosine or wmd)");
}

const char* metric_name(Metric m) {
  return m == Metric::kCosine ? "cosine" : "wmd";
}

std::optional<int64_t> EmbeddingTable::find(std::string_view word) const {
  auto it = index_.find(std::string(word));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::span<const double> EmbeddingTable::row(int64_t i) const {
  return {matrix_.data() + static_cast<size_t>(i) * dim_, static_cast<size_t>(dim_)};
}

bool EmbeddingTable::add(const std::string& word, std::span<const double> vec) {
  if (static_cast<int32_t>(vec.size()) != dim_) {
    throw InvalidArgument("vector length " + std::to_string(vec.size()) +
                          " does not match table dim " + std::to_string(dim_));
  }
  if (index_.count(word)) return false;
  index_.emplace(word, static_cast<int64_t>(words_.size()));
  words_.push_back(word);
  matrix_.insert(matrix_.end(), vec.begin(), vec.end());
  return true;
}

bool EmbeddingTable::operator==(const EmbeddingTable& other) const {
  return dim_ == other.dim_ && words_ == other.words_ && matrix_ == other.matrix_;
}

namespace {

bool looks_like_header(const std::vector<std::string>& toks) {
  if (toks.size() != 2) return false;
  int64_t a, b;
  return parse_int(toks[0], &a) && parse_int(toks[1], &b);
}

}  // namespace

EmbeddingTable load_embeddings(const std::string& path, int32_t dim, EmbeddingLoadStats* stats) {
  if (dim <= 0) throw InvalidArgument("embedding dim must be positive");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open embeddings file: " + path);

  EmbeddingTable table(dim);
  EmbeddingLoadStats local;
  std::string line;
  std::vector<double> vec(static_cast<size_t>(dim));
  int64_t lineno = 0;
  bool first_content_line = true;
  while (std::getline(in, line)) {
    lineno++;
    if (trim(line).empty()) continue;
    std::vector<std::string> toks = split_ws(line);
    if (first_content_line) {
      first_content_line = false;
      if (looks_like_header(toks)) {
        local.header_skipped = true;
        continue;
      }
    }
    if (static_cast<int32_t>(toks.size()) != dim + 1) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": expected word + " +
                       std::to_string(dim) + " values, got " + std::to_string(toks.size()) +
                       " tokens");
    }
    for (int32_t j = 0; j < dim; j++) {
      double v;
      if (!parse_double(toks[static_cast<size_t>(j) + 1], &v) || !std::isfinite(v)) {
        throw ParseError(path + ":" + std::to_string(lineno) + ": non-numeric value '" +
                         toks[static_cast<size_t>(j) + 1] + "'");
      }
      vec[static_cast<size_t>(j)] = v;
    }
    if (!table.add(toks[0], vec)) local.duplicate_lines++;  // first occurrence wins
  }
  if (table.size() == 0) throw ParseError(path + ": no embedding vectors found");
  if (stats) *stats = local;
  return table;
}

void save_embeddings(const EmbeddingTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write embeddings file: " + path);
  for (int64_t i = 0; i < table.size(); i++) {
    out << table.word(i);
    for (double v : table.row(i)) out << ' ' << format_g(v, 17);
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

double similarity(std::span<const double> u, std::span<const double> v, Metric m) {
  if (u.size() != v.size()) {
    throw InvalidArgument("vector length mismatch: " + std::to_string(u.size()) + " vs " +
                          std::to_string(v.size()));
  }
  if (m == Metric::kCosine) {
    double dot = 0, nu = 0, nv = 0;
    for (size_t i = 0; i < u.size(); i++) {
      dot += u[i] * v[i];
      nu += u[i] * u[i];
      nv += v[i] * v[i];
    }
    if (nu == 0.0 || nv == 0.0) throw InvalidArgument("cosine similarity of zero vector");
    double c = dot / (std::sqrt(nu) * std::sqrt(nv));
    if (c < 0.0) c = 0.0;  // anti-similar words contribute no link mass
    if (c > 1.0) c = 1.0;
    return c;
  }
  double d2 = 0;
  for (size_t i = 0; i < u.size(); i++) {
    double d = u[i] - v[i];
    d2 += d * d;
  }
  return 1.0 / (1.0 + std::sqrt(d2));
}

SubTableResult sub_table(const EmbeddingTable& table, const std::vector<std::string>& vocab) {
  SubTableResult res;
  res.table = EmbeddingTable(table.dim());
  for (const std::string& w : vocab) {
    if (auto i = table.find(w)) {
      res.table.add(w, table.row(*i));
    } else {
      res.missing.push_back(w);
    }
  }
  return res;
}

}  // namespace rankvocab

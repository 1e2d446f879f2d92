// rankvocab command-line tool. Talks to the library exclusively through the
// public C API so it exercises the same surface as any external consumer.
#include <CLI11.hpp>
#include <rankvocab.h>

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace fs = std::filesystem;

namespace {

constexpr double kGradTolerance = 1e-4;

std::string fmt_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Ordered key=value manifest; insertion order is preserved on disk.
struct Manifest {
  std::vector<std::pair<std::string, std::string>> entries;

  void put(const std::string& key, const std::string& value) { entries.emplace_back(key, value); }

  void put_digest(const std::string& key, const std::string& path) {
    char hex[17];
    if (rv_file_digest(path.c_str(), hex) == RV_OK) put(key + ".digest", hex);
  }

  bool write(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) return false;
    for (const auto& [k, v] : entries) out << k << '=' << v << '\n';
    return bool(out);
  }
};

int fail_status(rv_status st) {
  std::cerr << "error: " << rv_last_error() << '\n';
  switch (st) {
    case RV_ERR_NO_CONVERGE:
      return 3;
    case RV_ERR_INTERNAL:
      return 4;
    default:
      return 2;  // invalid arguments, unreadable/unparsable inputs
  }
}

int fail_msg(const std::string& msg) {
  std::cerr << "error: " << msg << '\n';
  return 2;
}

bool echo_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  std::cout << in.rdbuf();
  return true;
}

std::string read_file(const std::string& path, bool* ok) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    *ok = false;
    return "";
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  *ok = true;
  return buf.str();
}

// Later lines win during resolution, which yields the documented precedence:
// --set > dedicated flags > config file > RANKVOCAB_SEED > built-in defaults.
struct ConfigBuilder {
  std::string text;

  void seed_from_env() {
    if (const char* env = std::getenv("RANKVOCAB_SEED")) {
      text += "seed=";
      text += env;
      text += '\n';
    }
  }
  bool file(const std::string& path) {
    bool ok = false;
    std::string body = read_file(path, &ok);
    if (!ok) return false;
    text += body;
    if (!body.empty() && body.back() != '\n') text += '\n';
    return true;
  }
  void line(const std::string& key, const std::string& value) {
    text += key;
    text += '=';
    text += value;
    text += '\n';
  }
  void sets(const std::vector<std::string>& pairs) {
    for (const std::string& p : pairs) {
      text += p;
      text += '\n';
    }
  }
};

// Canonical full config rendering, or empty on failure (status in *st).
std::string resolve(const std::string& merged, rv_status* st) {
  std::vector<char> buf(1 << 16);
  int64_t needed = 0;
  *st = rv_resolve_config(merged.c_str(), buf.data(), static_cast<int64_t>(buf.size()), &needed);
  if (*st != RV_OK) return "";
  return std::string(buf.data());
}

void put_resolved(Manifest& m, const std::string& canonical) {
  std::istringstream in(canonical);
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) m.put("resolved." + line.substr(0, line.find('=')),
                             line.substr(line.find('=') + 1));
}

void put_tool_header(Manifest& m, const std::string& command) {
  m.put("tool", "rankvocab");
  m.put("version", rv_version());
  m.put("command", command);
}

// ---- prep ------------------------------------------------------------------

struct PrepArgs {
  std::string corpus, format = "jsonl", stopwords, out;
  int64_t min_count = 1;
};

int run_prep(const PrepArgs& a) {
  std::error_code ec;
  fs::create_directories(a.out, ec);
  if (ec) return fail_msg("cannot create output directory " + a.out);

  Manifest m;
  put_tool_header(m, "prep");
  m.put("arg.corpus", a.corpus);
  m.put("arg.format", a.format);
  if (!a.stopwords.empty()) m.put("arg.stopwords", a.stopwords);
  m.put("arg.min_count", std::to_string(a.min_count));
  m.put("arg.out", a.out);
  m.put_digest("input.corpus", a.corpus);
  if (!a.stopwords.empty()) m.put_digest("input.stopwords", a.stopwords);
  if (!m.write(a.out + "/manifest.txt")) return fail_msg("cannot write manifest in " + a.out);

  int64_t counts[3] = {0, 0, 0};
  rv_status st = rv_prep(a.corpus.c_str(), a.format.c_str(),
                         a.stopwords.empty() ? nullptr : a.stopwords.c_str(), a.min_count,
                         a.out.c_str(), counts);
  if (st != RV_OK) return fail_status(st);
  std::cout << "docs=" << counts[0] << " train_docs=" << counts[1]
            << " candidates=" << counts[2] << '\n';
  return 0;
}

// ---- rank ------------------------------------------------------------------

struct RankArgs {
  std::string candidates, embeddings, metric = "cosine", out, graph_out;
  int64_t dim = 100, k = 20, max_iter = 200;
  double damping = 0.85, tol = 1e-8;
  int jobs = 1;
  bool symmetrize = false, exact = false, strict = false;
};

int run_rank(const RankArgs& a) {
  Manifest m;
  put_tool_header(m, "rank");
  m.put("arg.candidates", a.candidates);
  m.put("arg.embeddings", a.embeddings);
  m.put("arg.dim", std::to_string(a.dim));
  m.put("arg.metric", a.metric);
  m.put("arg.k", std::to_string(a.k));
  m.put("arg.damping", fmt_g17(a.damping));
  m.put("arg.tol", fmt_g17(a.tol));
  m.put("arg.max_iter", std::to_string(a.max_iter));
  m.put("arg.symmetrize", a.symmetrize ? "true" : "false");
  m.put("arg.exact", a.exact ? "true" : "false");
  m.put("arg.jobs", std::to_string(a.jobs));
  if (!a.graph_out.empty()) m.put("arg.graph_out", a.graph_out);
  m.put("arg.out", a.out);
  m.put_digest("input.candidates", a.candidates);
  m.put_digest("input.embeddings", a.embeddings);
  if (!m.write(a.out + ".manifest")) return fail_msg("cannot write manifest " + a.out + ".manifest");

  rv_embeddings* emb = nullptr;
  rv_words* words = nullptr;
  rv_graph* graph = nullptr;
  rv_ranks* ranks = nullptr;
  auto cleanup = [&] {
    rv_ranks_free(ranks);
    rv_graph_free(graph);
    rv_words_free(words);
    rv_embeddings_free(emb);
  };

  rv_status st = rv_embeddings_load(a.embeddings.c_str(), static_cast<int32_t>(a.dim), &emb);
  if (st == RV_OK) st = rv_words_load(a.candidates.c_str(), &words);
  if (st == RV_OK)
    st = rv_graph_build(words, emb, a.metric.c_str(), a.k, a.symmetrize ? 1 : 0, a.jobs, &graph);
  if (st == RV_OK && !a.graph_out.empty()) st = rv_graph_save(graph, a.graph_out.c_str());
  if (st == RV_OK)
    st = a.exact ? rv_pagerank_exact(graph, a.damping, &ranks)
                 : rv_pagerank(graph, a.damping, a.tol, a.max_iter, &ranks);
  if (st == RV_OK) st = rv_ranks_save(ranks, a.out.c_str());
  if (st != RV_OK) {
    cleanup();
    return fail_status(st);
  }

  bool converged = rv_ranks_converged(ranks) != 0;
  std::cout << "nodes=" << rv_graph_num_nodes(graph) << " edges=" << rv_graph_num_edges(graph)
            << " dropped=" << rv_graph_num_dropped(graph)
            << " iterations=" << rv_ranks_iterations(ranks)
            << " converged=" << (converged ? "true" : "false") << '\n';
  cleanup();
  if (a.strict && !converged) {
    std::cerr << "error: power iteration did not converge within the iteration cap\n";
    return 3;
  }
  return 0;
}

// ---- select ----------------------------------------------------------------

struct SelectArgs {
  std::string ranks, freqs, out;
  int64_t k = 0;
};

int run_select(const SelectArgs& a) {
  Manifest m;
  put_tool_header(m, "select");
  if (!a.ranks.empty()) m.put("arg.ranks", a.ranks);
  if (!a.freqs.empty()) m.put("arg.freqs", a.freqs);
  m.put("arg.k", std::to_string(a.k));
  m.put("arg.out", a.out);
  if (!a.ranks.empty()) m.put_digest("input.ranks", a.ranks);
  if (!a.freqs.empty()) m.put_digest("input.freqs", a.freqs);
  if (!m.write(a.out + ".manifest")) return fail_msg("cannot write manifest " + a.out + ".manifest");

  rv_status st = a.ranks.empty() ? rv_select_frequent(a.freqs.c_str(), a.k, a.out.c_str())
                                 : rv_select_ranked(a.ranks.c_str(), a.k, a.out.c_str());
  if (st != RV_OK) return fail_status(st);
  std::cout << "selected=" << a.k << " out=" << a.out << '\n';
  return 0;
}

// ---- train -----------------------------------------------------------------

struct TrainArgs {
  std::string corpus, vocab, embeddings, config, model, out;
  std::string seed;  // kept textual so "unset" is distinguishable
  std::vector<std::string> sets;
};

void put_processed_corpus_digests(Manifest& m, const std::string& dir) {
  m.put_digest("input.corpus.corpus_jsonl", dir + "/corpus.jsonl");
  m.put_digest("input.corpus.token_stats", dir + "/token_stats.tsv");
  m.put_digest("input.corpus.candidates", dir + "/candidates.tsv");
}

int run_train(const TrainArgs& a) {
  ConfigBuilder cb;
  cb.seed_from_env();
  if (!a.config.empty() && !cb.file(a.config)) return fail_msg("cannot read config " + a.config);
  if (!a.model.empty()) cb.line("model", a.model);
  if (!a.seed.empty()) cb.line("seed", a.seed);
  cb.sets(a.sets);

  rv_status st = RV_OK;
  std::string canonical = resolve(cb.text, &st);
  if (st != RV_OK) return fail_status(st);

  std::error_code ec;
  fs::create_directories(a.out, ec);
  if (ec) return fail_msg("cannot create output directory " + a.out);

  Manifest m;
  put_tool_header(m, "train");
  m.put("arg.corpus", a.corpus);
  m.put("arg.vocab", a.vocab);
  if (!a.embeddings.empty()) m.put("arg.embeddings", a.embeddings);
  m.put("arg.out", a.out);
  put_processed_corpus_digests(m, a.corpus);
  m.put_digest("input.vocab", a.vocab);
  if (!a.embeddings.empty()) m.put_digest("input.embeddings", a.embeddings);
  if (!a.config.empty()) m.put_digest("input.config", a.config);
  put_resolved(m, canonical);
  if (!m.write(a.out + "/manifest.txt")) return fail_msg("cannot write manifest in " + a.out);

  st = rv_train(a.corpus.c_str(), a.vocab.c_str(),
                a.embeddings.empty() ? nullptr : a.embeddings.c_str(), canonical.c_str(),
                a.out.c_str());
  if (st != RV_OK) return fail_status(st);
  if (!echo_file(a.out + "/report.tsv")) return fail_msg("training report missing in " + a.out);
  return 0;
}

// ---- compare ---------------------------------------------------------------

struct CompareArgs {
  std::string corpus, embeddings, ks, config, out;
  std::string seed;
  std::vector<std::string> sets;
  int jobs = 1;
};

int run_compare(const CompareArgs& a) {
  ConfigBuilder cb;
  cb.seed_from_env();
  if (!a.config.empty() && !cb.file(a.config)) return fail_msg("cannot read config " + a.config);
  if (!a.seed.empty()) cb.line("seed", a.seed);
  cb.sets(a.sets);

  rv_status st = RV_OK;
  std::string canonical = resolve(cb.text, &st);
  if (st != RV_OK) return fail_status(st);

  std::error_code ec;
  fs::create_directories(a.out, ec);
  if (ec) return fail_msg("cannot create output directory " + a.out);

  Manifest m;
  put_tool_header(m, "compare");
  m.put("arg.corpus", a.corpus);
  m.put("arg.embeddings", a.embeddings);
  m.put("arg.ks", a.ks);
  m.put("arg.jobs", std::to_string(a.jobs));
  m.put("arg.out", a.out);
  put_processed_corpus_digests(m, a.corpus);
  m.put_digest("input.embeddings", a.embeddings);
  if (!a.config.empty()) m.put_digest("input.config", a.config);
  put_resolved(m, canonical);
  if (!m.write(a.out + "/manifest.txt")) return fail_msg("cannot write manifest in " + a.out);

  st = rv_compare(a.corpus.c_str(), a.embeddings.c_str(), a.ks.c_str(), canonical.c_str(), a.jobs,
                  a.out.c_str());
  if (st != RV_OK) return fail_status(st);
  if (!echo_file(a.out + "/comparison.tsv"))
    return fail_msg("comparison table missing in " + a.out);
  return 0;
}

// ---- gradcheck -------------------------------------------------------------

struct GradArgs {
  std::string seed;
  double eps = 1e-5;
  std::string out;
};

int run_gradcheck(const GradArgs& a) {
  uint64_t seed = 42;
  std::string seed_text = a.seed;
  if (seed_text.empty())
    if (const char* env = std::getenv("RANKVOCAB_SEED")) seed_text = env;
  if (!seed_text.empty()) {
    try {
      seed = std::stoull(seed_text);
    } catch (...) {
      return fail_msg("bad seed '" + seed_text + "'");
    }
  }

  if (!a.out.empty()) {
    Manifest m;
    put_tool_header(m, "gradcheck");
    m.put("arg.seed", std::to_string(seed));
    m.put("arg.eps", fmt_g17(a.eps));
    m.put("arg.out", a.out);
    if (!m.write(a.out + ".manifest"))
      return fail_msg("cannot write manifest " + a.out + ".manifest");
  }

  double max_rel = 0.0;
  rv_status st = rv_grad_check_model(seed, a.eps, &max_rel);
  if (st != RV_OK) return fail_status(st);

  bool ok = max_rel < kGradTolerance;
  std::ostringstream line;
  line << "max_rel_err=" << max_rel << " tolerance=" << kGradTolerance
       << " status=" << (ok ? "ok" : "fail");
  std::cout << line.str() << '\n';
  if (!a.out.empty()) {
    std::ofstream f(a.out, std::ios::binary | std::ios::trunc);
    f << line.str() << '\n';
    if (!f) return fail_msg("cannot write " + a.out);
  }
  return ok ? 0 : 4;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"WordRank vocabulary selection and attention-TextCNN training"};
  app.require_subcommand(1);

  PrepArgs prep;
  CLI::App* cmd_prep = app.add_subcommand("prep", "Ingest and preprocess a raw corpus");
  cmd_prep->add_option("--corpus", prep.corpus, "Raw corpus (jsonl file or directory tree)")
      ->required();
  cmd_prep->add_option("--format", prep.format, "Corpus format: jsonl or dirs")
      ->check(CLI::IsMember({"jsonl", "dirs"}));
  cmd_prep->add_option("--stopwords", prep.stopwords,
                       "Stopword file (one word per line; default: built-in English list)");
  cmd_prep->add_option("--min-count", prep.min_count, "Minimum train-split count for candidates")
      ->check(CLI::PositiveNumber);
  cmd_prep->add_option("--out", prep.out, "Processed-corpus output directory")->required();

  RankArgs rank;
  CLI::App* cmd_rank = app.add_subcommand("rank", "Build the word graph and run PageRank");
  cmd_rank->add_option("--candidates", rank.candidates, "Candidate word list (TSV, first column)")
      ->required();
  cmd_rank->add_option("--embeddings", rank.embeddings, "Word-vector text file")->required();
  cmd_rank->add_option("--dim", rank.dim, "Embedding dimension")->check(CLI::PositiveNumber);
  cmd_rank->add_option("--metric", rank.metric, "Similarity metric: cosine or wmd")
      ->check(CLI::IsMember({"cosine", "wmd"}));
  cmd_rank->add_option("--k", rank.k, "Neighbors per node")->check(CLI::PositiveNumber);
  cmd_rank->add_option("--damping", rank.damping, "PageRank damping factor");
  cmd_rank->add_option("--tol", rank.tol, "L1 convergence tolerance");
  cmd_rank->add_option("--max-iter", rank.max_iter, "Power-iteration cap")
      ->check(CLI::PositiveNumber);
  cmd_rank->add_option("--jobs", rank.jobs, "Worker threads for graph construction");
  cmd_rank->add_flag("--symmetrize", rank.symmetrize, "Add reverse edges");
  cmd_rank->add_flag("--exact", rank.exact, "Use the dense linear-solve oracle");
  cmd_rank->add_flag("--strict", rank.strict, "Exit 3 when power iteration fails to converge");
  cmd_rank->add_option("--graph-out", rank.graph_out, "Also dump the graph as TSV");
  cmd_rank->add_option("--out", rank.out, "Rank TSV output path")->required();

  SelectArgs sel;
  CLI::App* cmd_select = app.add_subcommand("select", "Take the top-K words of a ranking");
  CLI::Option* opt_ranks =
      cmd_select->add_option("--ranks", sel.ranks, "Rank TSV from the rank command");
  CLI::Option* opt_freqs =
      cmd_select->add_option("--freqs", sel.freqs, "Token-stats TSV from the prep command");
  opt_ranks->excludes(opt_freqs);
  cmd_select->add_option("--k", sel.k, "Vocabulary size to keep")
      ->required()
      ->check(CLI::PositiveNumber);
  cmd_select->add_option("--out", sel.out, "Word-list output path")->required();

  TrainArgs train;
  CLI::App* cmd_train = app.add_subcommand("train", "Train a model on a processed corpus");
  cmd_train->add_option("--corpus", train.corpus, "Processed-corpus directory (from prep)")
      ->required();
  cmd_train->add_option("--vocab", train.vocab, "Vocabulary word list")->required();
  cmd_train->add_option("--embeddings", train.embeddings, "Pretrained vectors (optional)");
  cmd_train->add_option("--config", train.config, "key=value config file");
  cmd_train->add_option("--model", train.model, "textcnn | bow | bigram | avgemb");
  cmd_train->add_option("--seed", train.seed, "Run seed");
  cmd_train->add_option("--set", train.sets, "Config override key=value (repeatable)");
  cmd_train->add_option("--out", train.out, "Run output directory")->required();

  CompareArgs cmp;
  CLI::App* cmd_compare =
      app.add_subcommand("compare", "Frequency-vs-WordRank vocabulary comparison grid");
  cmd_compare->add_option("--corpus", cmp.corpus, "Processed-corpus directory (from prep)")
      ->required();
  cmd_compare->add_option("--embeddings", cmp.embeddings, "Word-vector text file")->required();
  cmd_compare->add_option("--ks", cmp.ks, "Comma-separated vocabulary sizes")->required();
  cmd_compare->add_option("--config", cmp.config, "key=value config file");
  cmd_compare->add_option("--seed", cmp.seed, "Run seed");
  cmd_compare->add_option("--set", cmp.sets, "Config override key=value (repeatable)");
  cmd_compare->add_option("--jobs", cmp.jobs, "Parallel cells");
  cmd_compare->add_option("--out", cmp.out, "Comparison output directory")->required();

  GradArgs grad;
  CLI::App* cmd_grad =
      app.add_subcommand("gradcheck", "Finite-difference check of the full model gradient");
  cmd_grad->add_option("--seed", grad.seed, "Check seed");
  cmd_grad->add_option("--eps", grad.eps, "Central-difference step");
  cmd_grad->add_option("--out", grad.out, "Also write the result line to this file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (*cmd_prep) return run_prep(prep);
  if (*cmd_rank) return run_rank(rank);
  if (*cmd_select) {
    if (sel.ranks.empty() == sel.freqs.empty())
      return fail_msg("select needs exactly one of --ranks or --freqs");
    return run_select(sel);
  }
  if (*cmd_train) return run_train(train);
  if (*cmd_compare) return run_compare(cmp);
  if (*cmd_grad) return run_gradcheck(grad);
  return fail_msg("no command given");
}

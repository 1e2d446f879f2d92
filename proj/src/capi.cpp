#include "rankvocab.h"

#include <algorithm>
#include <cstring>
#include <string>
#include <unordered_set>
#include <vector>

#include "corpus.hpp"
#include "embedding.hpp"
#include "model.hpp"
#include "rng.hpp"
#include "tensor.hpp"
#include "train.hpp"
#include "util.hpp"
#include "wordrank.hpp"

namespace rv = rankvocab;

struct rv_embeddings {
  rv::EmbeddingTable table;
};

struct rv_words {
  std::vector<std::string> words;
};

struct rv_graph {
  rv::SimilarityGraph graph;
  int64_t dropped = 0;
};

struct rv_ranks {
  std::vector<std::string> nodes;
  rv::PagerankResult result;
};

namespace {

thread_local std::string t_err;

void need(bool ok, const std::string& msg) {
  if (!ok) throw rv::InvalidArgument(msg);
}

template <typename F>
rv_status guarded(F&& fn) {
  try {
    fn();
    return RV_OK;
  } catch (const rv::InvalidArgument& e) {
    t_err = e.what();
    return RV_ERR_INVALID;
  } catch (const rv::IoError& e) {
    t_err = e.what();
    return RV_ERR_IO;
  } catch (const rv::ParseError& e) {
    t_err = e.what();
    return RV_ERR_PARSE;
  } catch (const std::exception& e) {
    t_err = e.what();
    return RV_ERR_INTERNAL;
  } catch (...) {
    t_err = "unknown failure";
    return RV_ERR_INTERNAL;
  }
}

rv::RunConfig config_from_text(const char* config_text) {
  need(config_text != nullptr, "config_text must not be NULL");
  return rv::parse_run_config(rv::parse_kv_text(config_text));
}

std::string cstr(const char* s, const char* what) {
  need(s != nullptr, std::string(what) + " must not be NULL");
  return s;
}

}  // namespace

extern "C" {

const char* rv_version(void) { return "0.1.0"; }

const char* rv_last_error(void) { return t_err.c_str(); }

rv_status rv_file_digest(const char* path, char out_hex[17]) {
  return guarded([&] {
    need(out_hex != nullptr, "out_hex must not be NULL");
    uint64_t d = rv::fnv1a64_file(cstr(path, "path"));
    static const char* hex = "0123456789abcdef";
    for (int i = 0; i < 16; i++) out_hex[i] = hex[(d >> (60 - 4 * i)) & 0xf];
    out_hex[16] = '\0';
  });
}

/* ---- embeddings ---- */

rv_status rv_embeddings_load(const char* path, int32_t dim, rv_embeddings** out) {
  if (out) *out = nullptr;
  return guarded([&] {
    need(out != nullptr, "out must not be NULL");
    auto* h = new rv_embeddings;
    try {
      h->table = rv::load_embeddings(cstr(path, "path"), dim);
    } catch (...) {
      delete h;
      throw;
    }
    *out = h;
  });
}

void rv_embeddings_free(rv_embeddings* e) { delete e; }

int64_t rv_embeddings_size(const rv_embeddings* e) { return e ? e->table.size() : 0; }

int32_t rv_embeddings_dim(const rv_embeddings* e) { return e ? e->table.dim() : 0; }

int rv_embeddings_contains(const rv_embeddings* e, const char* word) {
  return e && word && e->table.contains(word) ? 1 : 0;
}

rv_status rv_embeddings_similarity(const rv_embeddings* e, const char* word_a,
                                   const char* word_b, const char* metric, double* out) {
  return guarded([&] {
    need(e != nullptr, "embeddings handle must not be NULL");
    need(out != nullptr, "out must not be NULL");
    rv::Metric m = rv::metric_from_string(cstr(metric, "metric"));
    auto ia = e->table.find(cstr(word_a, "word_a"));
    auto ib = e->table.find(cstr(word_b, "word_b"));
    need(ia.has_value(), "word not in table: " + std::string(word_a));
    need(ib.has_value(), "word not in table: " + std::string(word_b));
    *out = rv::similarity(e->table.row(*ia), e->table.row(*ib), m);
  });
}

/* ---- word lists ---- */

rv_status rv_words_load(const char* path, rv_words** out) {
  if (out) *out = nullptr;
  return guarded([&] {
    need(out != nullptr, "out must not be NULL");
    auto words = rv::load_word_column(cstr(path, "path"));
    *out = new rv_words{std::move(words)};
  });
}

void rv_words_free(rv_words* w) { delete w; }

int64_t rv_words_count(const rv_words* w) {
  return w ? static_cast<int64_t>(w->words.size()) : 0;
}

const char* rv_words_get(const rv_words* w, int64_t i) {
  if (!w || i < 0 || i >= static_cast<int64_t>(w->words.size())) return nullptr;
  return w->words[static_cast<size_t>(i)].c_str();
}

rv_status rv_words_save(const rv_words* w, const char* path) {
  return guarded([&] {
    need(w != nullptr, "words handle must not be NULL");
    rv::save_word_list(w->words, cstr(path, "path"));
  });
}

/* ---- graph + pagerank ---- */

rv_status rv_graph_build(const rv_words* candidates, const rv_embeddings* table,
                         const char* metric, int64_t k, int symmetrize, int jobs,
                         rv_graph** out) {
  if (out) *out = nullptr;
  return guarded([&] {
    need(out != nullptr, "out must not be NULL");
    need(candidates != nullptr, "candidates handle must not be NULL");
    need(table != nullptr, "embeddings handle must not be NULL");
    rv::Metric m = rv::metric_from_string(cstr(metric, "metric"));
    rv::GraphBuildStats stats;
    auto* h = new rv_graph;
    try {
      h->graph = rv::build_similarity_graph(candidates->words, table->table, m, k,
                                            symmetrize != 0, jobs, &stats);
    } catch (...) {
      delete h;
      throw;
    }
    h->dropped = static_cast<int64_t>(stats.dropped.size());
    *out = h;
  });
}

void rv_graph_free(rv_graph* g) { delete g; }

int64_t rv_graph_num_nodes(const rv_graph* g) { return g ? g->graph.n() : 0; }

int64_t rv_graph_num_edges(const rv_graph* g) { return g ? g->graph.num_edges() : 0; }

int64_t rv_graph_num_dropped(const rv_graph* g) { return g ? g->dropped : 0; }

rv_status rv_graph_save(const rv_graph* g, const char* path) {
  return guarded([&] {
    need(g != nullptr, "graph handle must not be NULL");
    rv::save_graph_tsv(g->graph, cstr(path, "path"));
  });
}

rv_status rv_pagerank(const rv_graph* g, double damping, double tol, int64_t max_iter,
                      rv_ranks** out) {
  if (out) *out = nullptr;
  return guarded([&] {
    need(out != nullptr, "out must not be NULL");
    need(g != nullptr, "graph handle must not be NULL");
    rv::TransitionMatrix m = rv::to_transition_matrix(g->graph);
    auto* h = new rv_ranks;
    try {
      h->result = rv::pagerank(m, damping, tol, max_iter);
    } catch (...) {
      delete h;
      throw;
    }
    h->nodes = g->graph.nodes;
    *out = h;
  });
}

rv_status rv_pagerank_exact(const rv_graph* g, double damping, rv_ranks** out) {
  if (out) *out = nullptr;
  return guarded([&] {
    need(out != nullptr, "out must not be NULL");
    need(g != nullptr, "graph handle must not be NULL");
    rv::TransitionMatrix m = rv::to_transition_matrix(g->graph);
    auto* h = new rv_ranks;
    try {
      h->result.scores = rv::pagerank_exact(m, damping);
    } catch (...) {
      delete h;
      throw;
    }
    h->result.converged = true;
    h->result.iterations = 0;
    h->nodes = g->graph.nodes;
    *out = h;
  });
}

void rv_ranks_free(rv_ranks* r) { delete r; }

int rv_ranks_converged(const rv_ranks* r) { return r && r->result.converged ? 1 : 0; }

int64_t rv_ranks_iterations(const rv_ranks* r) { return r ? r->result.iterations : 0; }

rv_status rv_ranks_score(const rv_ranks* r, int64_t i, double* out) {
  return guarded([&] {
    need(r != nullptr, "ranks handle must not be NULL");
    need(out != nullptr, "out must not be NULL");
    need(i >= 0 && i < static_cast<int64_t>(r->result.scores.size()),
         "rank index out of range: " + std::to_string(i));
    *out = r->result.scores[static_cast<size_t>(i)];
  });
}

rv_status rv_ranks_save(const rv_ranks* r, const char* path) {
  return guarded([&] {
    need(r != nullptr, "ranks handle must not be NULL");
    rv::SimilarityGraph g;
    g.nodes = r->nodes;
    rv::save_ranks(g, r->result.scores, cstr(path, "path"));
  });
}

/* ---- pipeline operations ---- */

rv_status rv_prep(const char* corpus_path, const char* format,
                  const char* stopwords_path_or_null, int64_t min_count, const char* out_dir,
                  int64_t out_counts[3]) {
  return guarded([&] {
    rv::Corpus corpus = rv::ingest(cstr(corpus_path, "corpus_path"), cstr(format, "format"));
    std::unordered_set<std::string> stopwords =
        stopwords_path_or_null ? rv::load_stopword_file(stopwords_path_or_null)
                               : rv::default_stopwords();
    rv::PreprocessResult pre = rv::preprocess(corpus, stopwords, min_count);
    rv::save_processed(pre, cstr(out_dir, "out_dir"));
    if (out_counts) {
      out_counts[0] = static_cast<int64_t>(pre.corpus.docs.size());
      out_counts[1] = pre.corpus.num_in_split(rv::Split::kTrain);
      out_counts[2] = static_cast<int64_t>(pre.candidates.size());
    }
  });
}

rv_status rv_select_ranked(const char* ranks_path, int64_t k, const char* out_path) {
  return guarded([&] {
    auto rows = rv::load_ranks(cstr(ranks_path, "ranks_path"));
    need(k >= 1, "k must be positive");
    need(k <= static_cast<int64_t>(rows.size()),
         "k=" + std::to_string(k) + " exceeds the " + std::to_string(rows.size()) +
             " ranked words");
    std::stable_sort(rows.begin(), rows.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    std::vector<std::string> words;
    words.reserve(static_cast<size_t>(k));
    for (int64_t i = 0; i < k; i++) words.push_back(rows[static_cast<size_t>(i)].first);
    rv::save_word_list(words, cstr(out_path, "out_path"));
  });
}

rv_status rv_select_frequent(const char* stats_path, int64_t k, const char* out_path) {
  return guarded([&] {
    rv::TokenStats stats = rv::load_token_stats(cstr(stats_path, "stats_path"));
    std::vector<std::string> words = rv::select_vocab_frequency(stats, k);
    rv::save_word_list(words, cstr(out_path, "out_path"));
  });
}

rv_status rv_train(const char* corpus_dir, const char* vocab_path,
                   const char* embeddings_path_or_null, const char* config_text,
                   const char* out_dir) {
  return guarded([&] {
    rv::RunConfig rc = config_from_text(config_text);
    rv::Corpus corpus = rv::load_processed_corpus(cstr(corpus_dir, "corpus_dir"));
    std::vector<std::string> words = rv::load_word_column(cstr(vocab_path, "vocab_path"));
    rv::Vocab vocab = rv::Vocab::from_words(words);
    rv::TrainConfig tc = rv::to_train_config(rc);
    std::string out = cstr(out_dir, "out_dir");

    rv::EmbeddingTable pretrained;
    bool have_pretrained = embeddings_path_or_null != nullptr;
    if (have_pretrained)
      pretrained = rv::load_embeddings(embeddings_path_or_null,
                                       static_cast<int32_t>(rc.embed_dim));

    rv::RunReport report;
    if (rc.model == "textcnn") {
      rv::ModelConfig mc = rv::to_model_config(rc, vocab.size(),
                                               static_cast<int64_t>(corpus.labels.size()));
      rv::ModelParams params =
          rv::init_params(mc, words, have_pretrained ? &pretrained : nullptr, rc.seed);
      rv::EncodedCorpus data = rv::encode_corpus(corpus, vocab, mc.maxlen);
      report = rv::train_model(params, data, tc);
      rv::save_report(report, out);
      rv::save_checkpoint(params, out + "/checkpoint");
    } else if (rc.model == "bow" || rc.model == "bigram") {
      rv::LinearParams lp;
      report = rv::train_baseline_bow(corpus, vocab, rc.model == "bow" ? 1 : 2, tc, &lp);
      rv::save_report(report, out);
      rv::save_linear_checkpoint(lp, rc.model, out + "/checkpoint");
    } else if (rc.model == "avgemb") {
      rv::ModelConfig mc = rv::to_model_config(rc, vocab.size(),
                                               static_cast<int64_t>(corpus.labels.size()));
      rv::ModelParams params =
          rv::init_params(mc, words, have_pretrained ? &pretrained : nullptr, rc.seed);
      rv::LinearParams lp;
      report = rv::train_baseline_avgemb(corpus, vocab, params.embedding, tc, &lp);
      rv::save_report(report, out);
      rv::save_linear_checkpoint(lp, rc.model, out + "/checkpoint");
    } else {
      need(false, "unknown model '" + rc.model + "'");
    }
  });
}

rv_status rv_compare(const char* corpus_dir, const char* embeddings_path, const char* ks_csv,
                     const char* config_text, int jobs, const char* out_dir) {
  return guarded([&] {
    rv::RunConfig rc = config_from_text(config_text);
    std::string dir = cstr(corpus_dir, "corpus_dir");
    rv::Corpus corpus = rv::load_processed_corpus(dir);
    rv::TokenStats stats = rv::load_token_stats(dir + "/token_stats.tsv");
    std::vector<std::string> candidates = rv::load_word_column(dir + "/candidates.tsv");
    rv::EmbeddingTable emb = rv::load_embeddings(cstr(embeddings_path, "embeddings_path"),
                                                 static_cast<int32_t>(rc.embed_dim));
    std::vector<int64_t> ks;
    for (const std::string& part : rv::split(cstr(ks_csv, "ks_csv"), ',')) {
      int64_t k = 0;
      need(rv::parse_int(rv::trim(part), &k), "bad K value '" + part + "'");
      ks.push_back(k);
    }
    need(!ks.empty(), "ks_csv must name at least one K");
    rv::compare_vocab_methods(corpus, stats, candidates, emb, ks, rc, jobs,
                              cstr(out_dir, "out_dir"));
  });
}

rv_status rv_grad_check_model(uint64_t seed, double eps, double* out_max_rel_err) {
  return guarded([&] {
    need(out_max_rel_err != nullptr, "out_max_rel_err must not be NULL");
    need(eps > 0, "eps must be positive");

    rv::ModelConfig mc;
    mc.vocab_size = 10;
    mc.num_classes = 3;
    mc.embed_dim = 5;
    mc.maxlen = 8;
    mc.filter_sizes = {2, 3};
    mc.filters_per_size = 4;
    mc.attention_dim = 3;
    mc.dropout_p = 0.25;

    std::vector<std::string> words;
    for (int64_t i = 0; i < mc.vocab_size; i++) words.push_back("w" + std::to_string(i));
    rv::ModelParams mp = rv::init_params(mc, words, nullptr, seed);

    rv::CounterRng synth = rv::CounterRng::keyed(seed, {rv::streams::kSynth, 7});
    std::vector<std::vector<int64_t>> docs;
    std::vector<int64_t> labels;
    for (int d = 0; d < 3; d++) {
      std::vector<int64_t> doc;
      for (int64_t t = 0; t < mc.maxlen; t++)
        doc.push_back(static_cast<int64_t>(synth.below(static_cast<uint64_t>(mc.vocab_size + 2))));
      docs.push_back(std::move(doc));
      labels.push_back(static_cast<int64_t>(synth.below(3)));
    }

    std::vector<rv::Tensor> init;
    mp.for_each_param([&](const std::string&, const rv::Tensor& t) { init.push_back(t); });

    auto f = [&](const std::vector<rv::Tensor>& ps, std::vector<rv::Tensor>* grads) -> double {
      rv::ModelParams cur = rv::zeros_params(mc);
      size_t pi = 0;
      cur.for_each_param([&](const std::string&, rv::Tensor& t) { t = ps[pi++]; });
      rv::Tape tape;
      rv::StagedParams sp = rv::stage_params(tape, cur, true);
      std::vector<rv::Var> losses;
      for (size_t d = 0; d < docs.size(); d++) {
        rv::CounterRng drop =
            rv::CounterRng::keyed(seed, {rv::streams::kDropout, 0, static_cast<uint64_t>(d)});
        rv::DocForward fw = rv::forward_doc(tape, sp, mc, docs[d], true, &drop);
        losses.push_back(tape.cross_entropy(fw.logits, labels[d]));
      }
      rv::Var loss = tape.scale(tape.add_n(losses), 1.0 / static_cast<double>(losses.size()));
      if (grads) {
        tape.backward(loss);
        std::vector<rv::Var> leaves = {sp.embedding};
        for (size_t b = 0; b < sp.conv_weights.size(); b++) {
          leaves.push_back(sp.conv_weights[b]);
          leaves.push_back(sp.conv_biases[b]);
        }
        leaves.push_back(sp.attn_proj);
        leaves.push_back(sp.attn_bias);
        leaves.push_back(sp.attn_context);
        leaves.push_back(sp.cls_weight);
        leaves.push_back(sp.cls_bias);
        grads->clear();
        for (rv::Var v : leaves) grads->push_back(tape.grad(v));
      }
      return tape.value(loss)[0];
    };

    rv::GradCheckReport rep = rv::grad_check(f, init, eps, 50, seed);
    *out_max_rel_err = rep.max_rel_err;
  });
}

rv_status rv_resolve_config(const char* config_text, char* buf, int64_t buf_len,
                            int64_t* out_needed) {
  return guarded([&] {
    rv::RunConfig rc = config_from_text(config_text);
    std::string text = rv::dump_kv(rv::dump_run_config(rc));
    int64_t needed = static_cast<int64_t>(text.size()) + 1;
    if (out_needed) *out_needed = needed;
    need(buf != nullptr, "buf must not be NULL");
    need(buf_len >= needed,
         "buffer of " + std::to_string(buf_len) + " bytes cannot hold " +
             std::to_string(needed));
    std::memcpy(buf, text.c_str(), static_cast<size_t>(needed));
  });
}

rv_status rv_count_params(const char* config_text, int64_t vocab_size, int64_t num_classes,
                          int64_t out_counts[5]) {
  return guarded([&] {
    need(out_counts != nullptr, "out_counts must not be NULL");
    rv::RunConfig rc = config_from_text(config_text);
    rv::ModelConfig mc = rv::to_model_config(rc, vocab_size, num_classes);
    rv::ParamCounts pc = rv::count_params(mc);
    out_counts[0] = pc.embedding;
    out_counts[1] = pc.conv;
    out_counts[2] = pc.attention;
    out_counts[3] = pc.classifier;
    out_counts[4] = pc.total;
  });
}

}  // extern "C"

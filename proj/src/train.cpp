#include "train.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <mutex>
#include <numeric>
#include <set>
#include <thread>

#include "rng.hpp"

namespace rankvocab {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw InvalidArgument(msg);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string epoch_key(size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04zu", i + 1);
  return std::string("epoch.") + buf;
}

// Leaf Vars in the same fixed order as ModelParams::for_each_param.
std::vector<Var> staged_in_order(const StagedParams& sp, const ModelConfig& c) {
  std::vector<Var> leaves = {sp.embedding};
  for (size_t b = 0; b < sp.conv_weights.size(); b++) {
    leaves.push_back(sp.conv_weights[b]);
    leaves.push_back(sp.conv_biases[b]);
  }
  if (c.additive_attention()) {
    leaves.push_back(sp.attn_proj);
    leaves.push_back(sp.attn_bias);
    leaves.push_back(sp.attn_context);
  } else {
    leaves.push_back(sp.attn_query);
  }
  leaves.push_back(sp.cls_weight);
  leaves.push_back(sp.cls_bias);
  return leaves;
}

int64_t argmax_first(const std::vector<double>& v) {
  int64_t best = 0;
  for (size_t i = 1; i < v.size(); i++)
    if (v[i] > v[static_cast<size_t>(best)]) best = static_cast<int64_t>(i);
  return best;
}

}  // namespace

void TrainConfig::validate() const {
  require(lr >= 0.0, "lr must be >= 0");
  require(epochs >= 1, "epochs must be >= 1");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(beta1 >= 0.0 && beta1 < 1.0, "beta1 must be in [0, 1)");
  require(beta2 >= 0.0 && beta2 < 1.0, "beta2 must be in [0, 1)");
  require(adam_eps > 0.0, "adam epsilon must be positive");
}

std::string report_tsv(const RunReport& report) {
  std::string out = "epoch\ttrain_loss\ttrain_accuracy\ttest_accuracy\tseconds\n";
  for (size_t i = 0; i < report.epochs.size(); i++) {
    const EpochStats& e = report.epochs[i];
    out += std::to_string(i + 1);
    out += '\t';
    out += format_g(e.train_loss, 17);
    out += '\t';
    out += format_g(e.train_accuracy, 17);
    out += '\t';
    out += format_g(e.test_accuracy, 17);
    out += '\t';
    out += format_g(e.seconds, 17);
    out += '\n';
  }
  return out;
}

std::string report_kv_text(const RunReport& report) {
  KvMap kv;
  kv["epochs"] = std::to_string(report.epochs.size());
  kv["params_total"] = std::to_string(report.params_total);
  for (size_t i = 0; i < report.epochs.size(); i++) {
    const EpochStats& e = report.epochs[i];
    std::string p = epoch_key(i);
    kv[p + ".train_loss"] = format_g(e.train_loss, 17);
    kv[p + ".train_accuracy"] = format_g(e.train_accuracy, 17);
    kv[p + ".test_accuracy"] = format_g(e.test_accuracy, 17);
    kv[p + ".seconds"] = format_g(e.seconds, 17);
  }
  for (size_t b = 0; b < report.attention_means.size(); b++)
    kv["attention_mean." + std::to_string(b)] = format_g(report.attention_means[b], 17);
  return dump_kv(kv);
}

void save_report(const RunReport& report, const std::string& dir) {
  std::filesystem::create_directories(dir);
  write_text_file(dir + "/report.tsv", report_tsv(report));
  write_text_file(dir + "/report.txt", report_kv_text(report));
}

EncodedCorpus encode_corpus(const Corpus& corpus, const Vocab& vocab, int64_t maxlen) {
  EncodedCorpus ec;
  ec.label_names = corpus.labels;
  for (const Document& d : corpus.docs) {
    std::vector<int64_t> row = encode(d.tokens, vocab, maxlen);
    int64_t li = corpus.label_index(d.label);
    if (d.split == Split::kTrain) {
      ec.train_docs.push_back(std::move(row));
      ec.train_labels.push_back(li);
    } else {
      ec.test_docs.push_back(std::move(row));
      ec.test_labels.push_back(li);
    }
  }
  return ec;
}

Adam::Adam(double lr, double beta1, double beta2, double eps)
    : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {}

void Adam::step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads) {
  require(params.size() == grads.size(), "optimizer: param/grad count mismatch");
  if (m_.empty()) {
    for (const Tensor* p : params) {
      m_.push_back(Tensor::zeros(p->shape));
      v_.push_back(Tensor::zeros(p->shape));
    }
  }
  require(m_.size() == params.size(), "optimizer: parameter count changed between steps");
  t_++;
  double bc1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  for (size_t i = 0; i < params.size(); i++) {
    Tensor& p = *params[i];
    const Tensor& g = *grads[i];
    require(p.same_shape(g), "optimizer: grad shape mismatch at parameter " + std::to_string(i));
    require(p.same_shape(m_[i]), "optimizer: parameter shape changed between steps");
    for (size_t j = 0; j < p.data.size(); j++) {
      double gj = g[j];
      m_[i][j] = b1_ * m_[i][j] + (1.0 - b1_) * gj;
      v_[i][j] = b2_ * v_[i][j] + (1.0 - b2_) * gj * gj;
      double mhat = m_[i][j] / bc1;
      double vhat = v_[i][j] / bc2;
      p[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

RunReport train_model(ModelParams& params, const EncodedCorpus& data, const TrainConfig& tc) {
  tc.validate();
  const ModelConfig& mc = params.config;
  require(!data.train_docs.empty(), "train split is empty");
  require(!data.test_docs.empty(), "test split is empty");
  require(data.num_classes() == mc.num_classes,
          "corpus has " + std::to_string(data.num_classes()) + " labels but config.num_classes is " +
              std::to_string(mc.num_classes));

  std::vector<Tensor*> param_ptrs;
  std::vector<std::string> param_names;
  params.for_each_param([&](const std::string& name, Tensor& t) {
    param_names.push_back(name);
    param_ptrs.push_back(&t);
  });

  Adam opt(tc);
  RunReport report;
  report.params_total = count_params(mc).total;

  std::vector<size_t> order(data.train_docs.size());
  for (int64_t e = 0; e < tc.epochs; e++) {
    auto t0 = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), size_t{0});
    CounterRng shuffle_rng = CounterRng::keyed(tc.seed, {streams::kShuffle, static_cast<uint64_t>(e)});
    shuffle_in_place(order, shuffle_rng);

    double loss_sum = 0.0;
    size_t bs = static_cast<size_t>(tc.batch_size);
    for (size_t start = 0; start < order.size(); start += bs) {
      size_t end = std::min(start + bs, order.size());
      Tape tape;
      StagedParams sp = stage_params(tape, params, true);
      std::vector<Var> losses;
      for (size_t i = start; i < end; i++) {
        size_t di = order[i];
        CounterRng drop = CounterRng::keyed(
            tc.seed, {streams::kDropout, static_cast<uint64_t>(e), static_cast<uint64_t>(di)});
        DocForward fw = forward_doc(tape, sp, mc, data.train_docs[di], true, &drop);
        losses.push_back(tape.cross_entropy(fw.logits, data.train_labels[di]));
      }
      Var batch_loss = tape.scale(tape.add_n(losses), 1.0 / static_cast<double>(losses.size()));
      tape.backward(batch_loss);
      loss_sum += tape.value(batch_loss)[0] * static_cast<double>(losses.size());

      std::vector<Var> leaves = staged_in_order(sp, mc);
      std::vector<Tensor> grads;
      grads.reserve(leaves.size());
      for (Var v : leaves) grads.push_back(tape.grad(v));
      // the pad row never learns
      for (int64_t j = 0; j < mc.embed_dim; j++) grads[0][static_cast<size_t>(j)] = 0.0;
      std::vector<const Tensor*> grad_ptrs;
      for (const Tensor& g : grads) grad_ptrs.push_back(&g);
      opt.step(param_ptrs, grad_ptrs);
    }

    EpochStats es;
    es.train_loss = loss_sum / static_cast<double>(data.train_docs.size());
    es.train_accuracy = evaluate_model(params, data.train_docs, data.train_labels);
    es.test_accuracy = evaluate_model(params, data.test_docs, data.test_labels);
    es.seconds = seconds_since(t0);
    report.epochs.push_back(es);
  }

  report.attention_means.assign(static_cast<size_t>(mc.num_branches()), 0.0);
  for (const auto& doc : data.train_docs) {
    ForwardTrace tr = forward_eval(params, doc);
    for (size_t b = 0; b < report.attention_means.size(); b++)
      report.attention_means[b] += tr.attention_weights[b];
  }
  for (double& m : report.attention_means) m /= static_cast<double>(data.train_docs.size());
  return report;
}

double evaluate_model(const ModelParams& params, const std::vector<std::vector<int64_t>>& docs,
                      const std::vector<int64_t>& labels) {
  require(!docs.empty(), "evaluation split is empty");
  require(docs.size() == labels.size(), "doc/label count mismatch");
  int64_t correct = 0;
  for (size_t i = 0; i < docs.size(); i++) {
    ForwardTrace tr = forward_eval(params, docs[i]);
    if (argmax_first(tr.logits.data) == labels[i]) correct++;
  }
  return static_cast<double>(correct) / static_cast<double>(docs.size());
}

// ---- linear baselines ----

namespace {

std::vector<double> lr_logits(const LinearParams& lp, const SparseVec& x) {
  int64_t c_count = lp.weight.shape[0];
  int64_t f_count = lp.weight.shape[1];
  std::vector<double> logits(static_cast<size_t>(c_count));
  for (int64_t c = 0; c < c_count; c++) logits[static_cast<size_t>(c)] = lp.bias[static_cast<size_t>(c)];
  for (const auto& [f, v] : x) {
    require(f >= 0 && f < f_count, "feature id " + std::to_string(f) + " out of range");
    for (int64_t c = 0; c < c_count; c++)
      logits[static_cast<size_t>(c)] += lp.weight[static_cast<size_t>(c * f_count + f)] * v;
  }
  return logits;
}

}  // namespace

double lr_loss_grad(const LinearParams& lp, const SparseVec& x, int64_t label, Tensor* grad_w,
                    Tensor* grad_b) {
  int64_t c_count = lp.weight.shape[0];
  int64_t f_count = lp.weight.shape[1];
  require(label >= 0 && label < c_count, "label " + std::to_string(label) + " out of range");
  std::vector<double> logits = lr_logits(lp, x);
  double mx = *std::max_element(logits.begin(), logits.end());
  double se = 0.0;
  for (double l : logits) se += std::exp(l - mx);
  double lse = std::log(se);
  double loss = mx + lse - logits[static_cast<size_t>(label)];
  if (grad_w || grad_b) {
    for (int64_t c = 0; c < c_count; c++) {
      double p = std::exp(logits[static_cast<size_t>(c)] - mx - lse);
      double d = p - (c == label ? 1.0 : 0.0);
      if (grad_b) (*grad_b)[static_cast<size_t>(c)] += d;
      if (grad_w)
        for (const auto& [f, v] : x) (*grad_w)[static_cast<size_t>(c * f_count + f)] += d * v;
    }
  }
  return loss;
}

int64_t lr_predict(const LinearParams& lp, const SparseVec& x) {
  return argmax_first(lr_logits(lp, x));
}

Tensor avg_embedding_vector(const Tensor& embedding, std::span<const int64_t> indices) {
  require(embedding.shape.size() == 2, "embedding must be a matrix");
  int64_t rows = embedding.shape[0];
  int64_t dim = embedding.shape[1];
  Tensor out = Tensor::zeros({dim});
  int64_t used = 0;
  for (int64_t i : indices) {
    require(i >= 0 && i < rows, "embedding index " + std::to_string(i) + " out of range");
    if (i == 0) continue;  // pad
    const double* row = embedding.data.data() + i * dim;
    for (int64_t j = 0; j < dim; j++) out[static_cast<size_t>(j)] += row[j];
    used++;
  }
  if (used > 0)
    for (double& v : out.data) v /= static_cast<double>(used);
  return out;
}

void save_linear_checkpoint(const LinearParams& lp, const std::string& model_name,
                            const std::string& dir) {
  require(lp.weight.shape.size() == 2 && lp.bias.shape.size() == 1 &&
              lp.weight.shape[0] == lp.bias.shape[0],
          "malformed linear parameters");
  std::filesystem::create_directories(dir);
  KvMap kv;
  kv["format"] = "rankvocab-linear-checkpoint-v1";
  kv["model"] = model_name;
  kv["classes"] = std::to_string(lp.weight.shape[0]);
  kv["features"] = std::to_string(lp.weight.shape[1]);
  kv["param.weight.file"] = "weight.bin";
  kv["param.bias.file"] = "bias.bin";
  write_text_file(dir + "/checkpoint.txt", dump_kv(kv));
  write_doubles_le(dir + "/weight.bin", lp.weight.data);
  write_doubles_le(dir + "/bias.bin", lp.bias.data);
}

LinearCheckpoint load_linear_checkpoint(const std::string& dir) {
  KvMap kv = parse_kv_file(dir + "/checkpoint.txt");
  if (kv_lookup(kv, "format") != "rankvocab-linear-checkpoint-v1")
    throw ParseError(dir + ": not a linear checkpoint");
  LinearCheckpoint ck;
  ck.model_name = kv_lookup(kv, "model");
  int64_t c = kv_int(kv, "classes", 0);
  int64_t f = kv_int(kv, "features", 0);
  require(c >= 1 && f >= 1, "bad checkpoint dimensions");
  ck.params.weight = Tensor::from({c, f}, read_doubles_le(dir + "/" + kv_lookup(kv, "param.weight.file"),
                                                          static_cast<size_t>(c * f)));
  ck.params.bias = Tensor::from({c}, read_doubles_le(dir + "/" + kv_lookup(kv, "param.bias.file"),
                                                     static_cast<size_t>(c)));
  return ck;
}

namespace {

struct SplitFeatures {
  std::vector<SparseVec> train_x, test_x;
  std::vector<int64_t> train_y, test_y;
};

double linear_accuracy(const LinearParams& lp, const std::vector<SparseVec>& xs,
                       const std::vector<int64_t>& ys) {
  int64_t correct = 0;
  for (size_t i = 0; i < xs.size(); i++)
    if (lr_predict(lp, xs[i]) == ys[i]) correct++;
  return static_cast<double>(correct) / static_cast<double>(xs.size());
}

RunReport train_linear(const SplitFeatures& fd, int64_t num_classes, int64_t num_features,
                       const TrainConfig& tc, LinearParams* out_params) {
  tc.validate();
  require(!fd.train_x.empty(), "train split is empty");
  require(!fd.test_x.empty(), "test split is empty");
  LinearParams lp{Tensor::zeros({num_classes, num_features}), Tensor::zeros({num_classes})};
  Adam opt(tc);
  RunReport report;
  report.params_total = num_classes * num_features + num_classes;

  std::vector<size_t> order(fd.train_x.size());
  for (int64_t e = 0; e < tc.epochs; e++) {
    auto t0 = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), size_t{0});
    CounterRng shuffle_rng = CounterRng::keyed(tc.seed, {streams::kShuffle, static_cast<uint64_t>(e)});
    shuffle_in_place(order, shuffle_rng);

    double loss_sum = 0.0;
    size_t bs = static_cast<size_t>(tc.batch_size);
    for (size_t start = 0; start < order.size(); start += bs) {
      size_t end = std::min(start + bs, order.size());
      Tensor gw = Tensor::zeros(lp.weight.shape);
      Tensor gb = Tensor::zeros(lp.bias.shape);
      for (size_t i = start; i < end; i++) {
        size_t di = order[i];
        loss_sum += lr_loss_grad(lp, fd.train_x[di], fd.train_y[di], &gw, &gb);
      }
      double inv = 1.0 / static_cast<double>(end - start);
      for (double& v : gw.data) v *= inv;
      for (double& v : gb.data) v *= inv;
      opt.step({&lp.weight, &lp.bias}, {&gw, &gb});
    }

    EpochStats es;
    es.train_loss = loss_sum / static_cast<double>(fd.train_x.size());
    es.train_accuracy = linear_accuracy(lp, fd.train_x, fd.train_y);
    es.test_accuracy = linear_accuracy(lp, fd.test_x, fd.test_y);
    es.seconds = seconds_since(t0);
    report.epochs.push_back(es);
  }
  if (out_params) *out_params = std::move(lp);
  return report;
}

std::vector<int64_t> token_indices(const std::vector<std::string>& tokens, const Vocab& vocab) {
  std::vector<int64_t> idx;
  idx.reserve(tokens.size());
  for (const std::string& t : tokens) idx.push_back(vocab.index_of(t));
  return idx;
}

}  // namespace

RunReport train_baseline_bow(const Corpus& corpus, const Vocab& vocab, int ngram,
                             const TrainConfig& tc, LinearParams* out_params) {
  require(ngram == 1 || ngram == 2, "ngram must be 1 or 2");
  require(!corpus.labels.empty(), "corpus has no labels");

  // bigram feature ids follow the unigram block; pairs collected on train only
  int64_t num_features = vocab.total_indices();
  std::map<std::pair<int64_t, int64_t>, int64_t> pair_ids;
  if (ngram == 2) {
    std::set<std::pair<int64_t, int64_t>> pairs;
    for (const Document& d : corpus.docs) {
      if (d.split != Split::kTrain) continue;
      std::vector<int64_t> idx = token_indices(d.tokens, vocab);
      for (size_t i = 0; i + 1 < idx.size(); i++) pairs.insert({idx[i], idx[i + 1]});
    }
    for (const auto& p : pairs) pair_ids[p] = num_features++;
  }

  auto features = [&](const Document& d) {
    std::map<int64_t, double> acc;
    std::vector<int64_t> idx = token_indices(d.tokens, vocab);
    for (int64_t i : idx) acc[i] += 1.0;
    if (ngram == 2) {
      for (size_t i = 0; i + 1 < idx.size(); i++) {
        auto it = pair_ids.find({idx[i], idx[i + 1]});
        if (it != pair_ids.end()) acc[it->second] += 1.0;
      }
    }
    return SparseVec(acc.begin(), acc.end());
  };

  SplitFeatures fd;
  for (const Document& d : corpus.docs) {
    if (d.split == Split::kTrain) {
      fd.train_x.push_back(features(d));
      fd.train_y.push_back(corpus.label_index(d.label));
    } else {
      fd.test_x.push_back(features(d));
      fd.test_y.push_back(corpus.label_index(d.label));
    }
  }
  return train_linear(fd, static_cast<int64_t>(corpus.labels.size()), num_features, tc, out_params);
}

RunReport train_baseline_avgemb(const Corpus& corpus, const Vocab& vocab, const Tensor& embedding,
                                const TrainConfig& tc, LinearParams* out_params) {
  require(embedding.shape.size() == 2 && embedding.shape[0] == vocab.total_indices(),
          "embedding matrix does not match the vocabulary");
  require(!corpus.labels.empty(), "corpus has no labels");
  int64_t dim = embedding.shape[1];

  SplitFeatures fd;
  for (const Document& d : corpus.docs) {
    std::vector<int64_t> idx = token_indices(d.tokens, vocab);
    Tensor vec = avg_embedding_vector(embedding, idx);
    SparseVec x;
    x.reserve(static_cast<size_t>(dim));
    for (int64_t j = 0; j < dim; j++) x.push_back({j, vec[static_cast<size_t>(j)]});
    if (d.split == Split::kTrain) {
      fd.train_x.push_back(std::move(x));
      fd.train_y.push_back(corpus.label_index(d.label));
    } else {
      fd.test_x.push_back(std::move(x));
      fd.test_y.push_back(corpus.label_index(d.label));
    }
  }
  return train_linear(fd, static_cast<int64_t>(corpus.labels.size()), dim, tc, out_params);
}

// ---- run configuration ----

namespace {

bool parse_bool_value(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw InvalidArgument("config key '" + key + "': expected true/false, got '" + v + "'");
}

int64_t parse_int_value(const std::string& key, const std::string& v) {
  int64_t out = 0;
  if (!parse_int(v, &out))
    throw InvalidArgument("config key '" + key + "': expected integer, got '" + v + "'");
  return out;
}

double parse_double_value(const std::string& key, const std::string& v) {
  double out = 0;
  if (!parse_double(v, &out))
    throw InvalidArgument("config key '" + key + "': expected number, got '" + v + "'");
  return out;
}

}  // namespace

RunConfig parse_run_config(const KvMap& kv) {
  RunConfig rc;
  for (const auto& [key, value] : kv) {
    if (key == "model") {
      if (value != "textcnn" && value != "bow" && value != "bigram" && value != "avgemb")
        throw InvalidArgument("config key 'model': expected textcnn|bow|bigram|avgemb, got '" +
                              value + "'");
      rc.model = value;
    } else if (key == "embed_dim") {
      rc.embed_dim = parse_int_value(key, value);
    } else if (key == "maxlen") {
      rc.maxlen = parse_int_value(key, value);
    } else if (key == "filter_sizes") {
      rc.filter_sizes.clear();
      for (const std::string& part : split(value, ','))
        rc.filter_sizes.push_back(parse_int_value(key, trim(part)));
    } else if (key == "filters_per_size") {
      rc.filters_per_size = parse_int_value(key, value);
    } else if (key == "attention") {
      rc.attention = value;
    } else if (key == "attention_dim") {
      rc.attention_dim = parse_int_value(key, value);
    } else if (key == "dropout_p") {
      rc.dropout_p = parse_double_value(key, value);
    } else if (key == "trainable_embeddings") {
      rc.trainable_embeddings = parse_bool_value(key, value);
    } else if (key == "lr") {
      rc.lr = parse_double_value(key, value);
    } else if (key == "epochs") {
      rc.epochs = parse_int_value(key, value);
    } else if (key == "batch_size") {
      rc.batch_size = parse_int_value(key, value);
    } else if (key == "seed") {
      int64_t s = parse_int_value(key, value);
      if (s < 0) throw InvalidArgument("config key 'seed': must be non-negative");
      rc.seed = static_cast<uint64_t>(s);
    } else if (key == "metric") {
      metric_from_string(value);  // validates
      rc.metric = value;
    } else if (key == "graph_k") {
      rc.graph_k = parse_int_value(key, value);
    } else if (key == "symmetrize") {
      rc.symmetrize = parse_bool_value(key, value);
    } else if (key == "damping") {
      rc.damping = parse_double_value(key, value);
    } else if (key == "tol") {
      rc.tol = parse_double_value(key, value);
    } else if (key == "max_iter") {
      rc.max_iter = parse_int_value(key, value);
    } else {
      throw InvalidArgument("unknown config key '" + key + "'");
    }
  }
  return rc;
}

KvMap dump_run_config(const RunConfig& rc) {
  KvMap kv;
  kv["model"] = rc.model;
  kv["embed_dim"] = std::to_string(rc.embed_dim);
  kv["maxlen"] = std::to_string(rc.maxlen);
  std::string sizes;
  for (size_t i = 0; i < rc.filter_sizes.size(); i++) {
    if (i) sizes += ',';
    sizes += std::to_string(rc.filter_sizes[i]);
  }
  kv["filter_sizes"] = sizes;
  kv["filters_per_size"] = std::to_string(rc.filters_per_size);
  kv["attention"] = rc.attention;
  kv["attention_dim"] = std::to_string(rc.attention_dim);
  kv["dropout_p"] = format_g(rc.dropout_p, 17);
  kv["trainable_embeddings"] = rc.trainable_embeddings ? "true" : "false";
  kv["lr"] = format_g(rc.lr, 17);
  kv["epochs"] = std::to_string(rc.epochs);
  kv["batch_size"] = std::to_string(rc.batch_size);
  kv["seed"] = std::to_string(rc.seed);
  kv["metric"] = rc.metric;
  kv["graph_k"] = std::to_string(rc.graph_k);
  kv["symmetrize"] = rc.symmetrize ? "true" : "false";
  kv["damping"] = format_g(rc.damping, 17);
  kv["tol"] = format_g(rc.tol, 17);
  kv["max_iter"] = std::to_string(rc.max_iter);
  return kv;
}

ModelConfig to_model_config(const RunConfig& rc, int64_t vocab_size, int64_t num_classes) {
  ModelConfig mc;
  mc.vocab_size = vocab_size;
  mc.num_classes = num_classes;
  mc.embed_dim = rc.embed_dim;
  mc.maxlen = rc.maxlen;
  mc.filter_sizes = rc.filter_sizes;
  mc.filters_per_size = rc.filters_per_size;
  mc.attention = rc.attention;
  mc.attention_dim = rc.attention_dim;
  mc.dropout_p = rc.dropout_p;
  mc.trainable_embeddings = rc.trainable_embeddings;
  return mc;
}

TrainConfig to_train_config(const RunConfig& rc) {
  TrainConfig tc;
  tc.lr = rc.lr;
  tc.epochs = rc.epochs;
  tc.batch_size = rc.batch_size;
  tc.seed = rc.seed;
  return tc;
}

// ---- comparison harness ----

std::string comparison_tsv(const std::vector<CompareRow>& rows) {
  std::string out = "method\tK\tparams_total\ttest_accuracy\tseconds_per_epoch\n";
  for (const CompareRow& r : rows) {
    out += r.method;
    out += '\t';
    out += std::to_string(r.k);
    out += '\t';
    out += std::to_string(r.params_total);
    out += '\t';
    out += format_g(r.test_accuracy, 17);
    out += '\t';
    out += format_g(r.seconds_per_epoch, 17);
    out += '\n';
  }
  return out;
}

std::vector<CompareRow> compare_vocab_methods(const Corpus& corpus, const TokenStats& stats,
                                              const std::vector<std::string>& candidates,
                                              const EmbeddingTable& pretrained,
                                              const std::vector<int64_t>& ks, const RunConfig& rc,
                                              int jobs, const std::string& out_dir) {
  require(!ks.empty(), "at least one K required");
  for (int64_t k : ks)
    require(k >= 1 && k <= static_cast<int64_t>(candidates.size()),
            "K=" + std::to_string(k) + " is outside [1, " + std::to_string(candidates.size()) +
                "] candidates");
  std::filesystem::create_directories(out_dir);

  GraphBuildStats gstats;
  SimilarityGraph graph = build_similarity_graph(candidates, pretrained,
                                                 metric_from_string(rc.metric), rc.graph_k,
                                                 rc.symmetrize, jobs, &gstats);
  TransitionMatrix tm = to_transition_matrix(graph);
  PagerankResult pr = pagerank(tm, rc.damping, rc.tol, rc.max_iter);
  for (int64_t k : ks)
    require(k <= graph.n(), "K=" + std::to_string(k) + " exceeds the " +
                                std::to_string(graph.n()) + " ranked words (" +
                                std::to_string(gstats.dropped.size()) +
                                " candidates missing from the embeddings)");

  struct CellSpec {
    std::string method;
    int64_t k;
  };
  std::vector<CellSpec> specs;
  for (int64_t k : ks) specs.push_back({"frequency", k});
  for (int64_t k : ks) specs.push_back({"wordrank", k});
  std::vector<CompareRow> rows(specs.size());

  auto run_cell = [&](size_t ci) {
    const CellSpec& cs = specs[ci];
    std::vector<std::string> words = cs.method == "frequency"
                                         ? select_vocab_frequency(stats, cs.k)
                                         : select_vocab_wordrank(pr.scores, graph, cs.k);
    Vocab vocab = Vocab::from_words(words);
    ModelConfig mc = to_model_config(rc, static_cast<int64_t>(words.size()),
                                     static_cast<int64_t>(corpus.labels.size()));
    TrainConfig tc = to_train_config(rc);
    ModelParams mp = init_params(mc, words, &pretrained, tc.seed);
    EncodedCorpus data = encode_corpus(corpus, vocab, mc.maxlen);
    RunReport rep = train_model(mp, data, tc);

    double mean_seconds = 0;
    for (const EpochStats& e : rep.epochs) mean_seconds += e.seconds;
    mean_seconds /= static_cast<double>(rep.epochs.size());
    rows[ci] = {cs.method, cs.k, rep.params_total, rep.epochs.back().test_accuracy, mean_seconds};

    std::string cell_dir = out_dir + "/" + cs.method + "_" + std::to_string(cs.k);
    std::filesystem::create_directories(cell_dir);
    save_word_list(words, cell_dir + "/vocab.txt");
    save_report(rep, cell_dir);
  };

  int workers = jobs;
  if (workers <= 0) workers = static_cast<int>(std::thread::hardware_concurrency());
  if (workers < 1) workers = 1;
  workers = std::min<int>(workers, static_cast<int>(specs.size()));
  if (workers <= 1) {
    for (size_t ci = 0; ci < specs.size(); ci++) run_cell(ci);
  } else {
    std::atomic<size_t> next{0};
    std::mutex err_mu;
    std::exception_ptr first_err;
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; w++) {
      pool.emplace_back([&] {
        for (;;) {
          size_t ci = next.fetch_add(1);
          if (ci >= specs.size()) return;
          try {
            run_cell(ci);
          } catch (...) {
            std::lock_guard<std::mutex> lock(err_mu);
            if (!first_err) first_err = std::current_exception();
            next.store(specs.size());  // stop scheduling further cells
            return;
          }
        }
      });
    }
    for (std::thread& t : pool) t.join();
    if (first_err) std::rethrow_exception(first_err);
  }

  write_text_file(out_dir + "/comparison.tsv", comparison_tsv(rows));
  return rows;
}

}  // namespace rankvocab

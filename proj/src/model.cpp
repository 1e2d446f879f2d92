#include "model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <unordered_set>

#include "rng.hpp"
#include "util.hpp"

namespace rankvocab {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw InvalidArgument(msg);
}

std::string dims_str(const std::vector<int64_t>& shape) {
  std::string s;
  for (size_t i = 0; i < shape.size(); i++) {
    if (i) s += 'x';
    s += std::to_string(shape[i]);
  }
  return s;
}

std::vector<int64_t> parse_dims(const std::string& s) {
  std::vector<int64_t> dims;
  for (const std::string& part : split(s, 'x')) {
    int64_t d = 0;
    if (!parse_int(part, &d)) throw ParseError("bad shape string '" + s + "'");
    dims.push_back(d);
  }
  return dims;
}

}  // namespace

void write_doubles_le(const std::string& path, std::span<const double> v) {
  std::vector<unsigned char> buf(v.size() * 8);
  for (size_t i = 0; i < v.size(); i++) {
    uint64_t bits = std::bit_cast<uint64_t>(v[i]);
    for (int b = 0; b < 8; b++)
      buf[i * 8 + static_cast<size_t>(b)] = static_cast<unsigned char>((bits >> (8 * b)) & 0xff);
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!f) throw IoError("short write to " + path);
}

std::vector<double> read_doubles_le(const std::string& path, size_t expected) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(f)),
                                 std::istreambuf_iterator<char>());
  if (buf.size() != expected * 8)
    throw ParseError(path + ": expected " + std::to_string(expected * 8) + " bytes, found " +
                     std::to_string(buf.size()));
  std::vector<double> v(expected);
  for (size_t i = 0; i < expected; i++) {
    uint64_t bits = 0;
    for (int b = 0; b < 8; b++)
      bits |= static_cast<uint64_t>(buf[i * 8 + static_cast<size_t>(b)]) << (8 * b);
    v[i] = std::bit_cast<double>(bits);
  }
  return v;
}

void ModelConfig::validate() const {
  require(vocab_size >= 1, "vocab_size must be positive");
  require(num_classes >= 1, "num_classes must be positive");
  require(embed_dim >= 1, "embed_dim must be positive");
  require(maxlen >= 1, "maxlen must be positive");
  require(filters_per_size >= 1, "filters_per_size must be positive");
  require(!filter_sizes.empty(), "at least one filter size required");
  std::unordered_set<int64_t> seen;
  for (int64_t h : filter_sizes) {
    require(h >= 1, "filter sizes must be positive");
    require(h <= maxlen, "filter size " + std::to_string(h) + " exceeds maxlen " +
                             std::to_string(maxlen));
    require(seen.insert(h).second, "filter sizes must be distinct");
  }
  require(dropout_p >= 0.0 && dropout_p < 1.0, "dropout_p must be in [0, 1)");
  require(attention == "additive" || attention == "dot",
          "attention must be 'additive' or 'dot', got '" + attention + "'");
  if (attention == "additive") require(attention_dim >= 1, "attention_dim must be positive");
}

ParamCounts count_params(const ModelConfig& c) {
  c.validate();
  ParamCounts pc;
  pc.embedding = (c.vocab_size + 2) * c.embed_dim;
  for (int64_t h : c.filter_sizes)
    pc.conv += c.filters_per_size * h * c.embed_dim + c.filters_per_size;
  // additive: projection + bias + context; dot: just the query vector
  pc.attention = c.additive_attention()
                     ? c.attention_dim * c.filters_per_size + 2 * c.attention_dim
                     : c.filters_per_size;
  pc.classifier = c.num_classes * c.filters_per_size + c.num_classes;
  pc.total = pc.embedding + pc.conv + pc.attention + pc.classifier;
  return pc;
}

void ModelParams::for_each_param(const std::function<void(const std::string&, Tensor&)>& fn) {
  fn("embedding", embedding);
  for (size_t b = 0; b < conv_weights.size(); b++) {
    fn("conv." + std::to_string(b) + ".weight", conv_weights[b]);
    fn("conv." + std::to_string(b) + ".bias", conv_biases[b]);
  }
  if (config.additive_attention()) {
    fn("attention.proj", attn_proj);
    fn("attention.bias", attn_bias);
    fn("attention.context", attn_context);
  } else {
    fn("attention.query", attn_query);
  }
  fn("classifier.weight", cls_weight);
  fn("classifier.bias", cls_bias);
}

void ModelParams::for_each_param(
    const std::function<void(const std::string&, const Tensor&)>& fn) const {
  const_cast<ModelParams*>(this)->for_each_param(
      [&fn](const std::string& name, Tensor& t) { fn(name, t); });
}

ModelParams zeros_params(const ModelConfig& c) {
  c.validate();
  ModelParams mp;
  mp.config = c;
  mp.embedding = Tensor::zeros({c.vocab_size + 2, c.embed_dim});
  for (int64_t h : c.filter_sizes) {
    mp.conv_weights.push_back(Tensor::zeros({c.filters_per_size, h, c.embed_dim}));
    mp.conv_biases.push_back(Tensor::zeros({c.filters_per_size}));
  }
  if (c.additive_attention()) {
    mp.attn_proj = Tensor::zeros({c.attention_dim, c.filters_per_size});
    mp.attn_bias = Tensor::zeros({c.attention_dim});
    mp.attn_context = Tensor::zeros({c.attention_dim});
  } else {
    mp.attn_query = Tensor::zeros({c.filters_per_size});
  }
  mp.cls_weight = Tensor::zeros({c.num_classes, c.filters_per_size});
  mp.cls_bias = Tensor::zeros({c.num_classes});
  return mp;
}

ModelParams init_params(const ModelConfig& c, std::span<const std::string> vocab_words,
                        const EmbeddingTable* pretrained, uint64_t seed) {
  require(static_cast<int64_t>(vocab_words.size()) == c.vocab_size,
          "vocab has " + std::to_string(vocab_words.size()) + " words but config.vocab_size is " +
              std::to_string(c.vocab_size));
  if (pretrained && pretrained->dim() != c.embed_dim)
    throw InvalidArgument("pretrained embeddings have dim " + std::to_string(pretrained->dim()) +
                          " but config.embed_dim is " + std::to_string(c.embed_dim));
  ModelParams mp = zeros_params(c);

  const int64_t d = c.embed_dim;
  auto fill_row = [&](int64_t row, CounterRng rng) {
    double* p = mp.embedding.data.data() + row * d;
    for (int64_t j = 0; j < d; j++) p[j] = rng.uniform(-0.05, 0.05);
  };
  // row 0 (pad) stays zero; row 1 is the OOV row
  fill_row(1, CounterRng::keyed(seed, {streams::kEmbedInit, 2, 0}));
  for (size_t i = 0; i < vocab_words.size(); i++) {
    int64_t row = static_cast<int64_t>(i) + 2;
    const std::string& w = vocab_words[i];
    std::optional<int64_t> hit = pretrained ? pretrained->find(w) : std::nullopt;
    if (hit) {
      std::span<const double> src = pretrained->row(*hit);
      std::copy(src.begin(), src.end(), mp.embedding.data.begin() + row * d);
    } else {
      // keyed by the word itself so the row is independent of vocab order
      fill_row(row, CounterRng::keyed(seed, {streams::kEmbedInit, 1, fnv1a64(w)}));
    }
  }

  auto glorot = [&](Tensor& t, int64_t fan_in, int64_t fan_out, uint64_t stream) {
    double lim = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    CounterRng rng = CounterRng::keyed(seed, {streams::kParamInit, stream});
    for (double& v : t.data) v = rng.uniform(-lim, lim);
  };
  for (size_t b = 0; b < mp.conv_weights.size(); b++)
    glorot(mp.conv_weights[b], c.filter_sizes[b] * c.embed_dim, c.filters_per_size,
           static_cast<uint64_t>(b));
  if (c.additive_attention()) {
    glorot(mp.attn_proj, c.filters_per_size, c.attention_dim, 100);
    glorot(mp.attn_context, c.attention_dim, 1, 101);
  } else {
    glorot(mp.attn_query, c.filters_per_size, 1, 102);
  }
  glorot(mp.cls_weight, c.filters_per_size, c.num_classes, 200);
  return mp;
}

StagedParams stage_params(Tape& tape, const ModelParams& params, bool trainable) {
  StagedParams sp;
  bool emb_grad = trainable && params.config.trainable_embeddings;
  sp.embedding = tape.leaf(params.embedding, emb_grad);
  for (size_t b = 0; b < params.conv_weights.size(); b++) {
    sp.conv_weights.push_back(tape.leaf(params.conv_weights[b], trainable));
    sp.conv_biases.push_back(tape.leaf(params.conv_biases[b], trainable));
  }
  if (params.config.additive_attention()) {
    sp.attn_proj = tape.leaf(params.attn_proj, trainable);
    sp.attn_bias = tape.leaf(params.attn_bias, trainable);
    sp.attn_context = tape.leaf(params.attn_context, trainable);
  } else {
    sp.attn_query = tape.leaf(params.attn_query, trainable);
  }
  sp.cls_weight = tape.leaf(params.cls_weight, trainable);
  sp.cls_bias = tape.leaf(params.cls_bias, trainable);
  return sp;
}

DocForward forward_doc(Tape& tape, const StagedParams& staged, const ModelConfig& config,
                       std::span<const int64_t> seq, bool train, CounterRng* dropout_rng,
                       const std::vector<int64_t>* branch_subset) {
  require(static_cast<int64_t>(seq.size()) == config.maxlen,
          "sequence length " + std::to_string(seq.size()) + " != maxlen " +
              std::to_string(config.maxlen));
  const int64_t num_branches = config.num_branches();
  std::vector<int64_t> branches;
  if (branch_subset) {
    require(!branch_subset->empty(), "branch subset must be nonempty");
    for (int64_t b : *branch_subset)
      require(b >= 0 && b < num_branches, "branch index " + std::to_string(b) + " out of range");
    branches = *branch_subset;
  } else {
    for (int64_t b = 0; b < num_branches; b++) branches.push_back(b);
  }

  Var x = tape.embed_rows(staged.embedding, seq);  // [L x D]
  x = tape.spatial_dropout(x, config.dropout_p, train, dropout_rng);

  std::vector<Var> pooled;
  for (int64_t b : branches) {
    size_t bi = static_cast<size_t>(b);
    Var conv = tape.conv1d_valid(x, staged.conv_weights[bi], staged.conv_biases[bi]);
    pooled.push_back(tape.max_over_time(tape.relu(conv)));  // [F]
  }

  std::vector<Var> scores;
  if (config.additive_attention()) {
    for (Var p : pooled) {
      Var h = tape.tanh(tape.add(tape.matvec(staged.attn_proj, p), staged.attn_bias));
      scores.push_back(tape.dot(staged.attn_context, h));
    }
  } else {
    double inv_sqrt_f = 1.0 / std::sqrt(static_cast<double>(config.filters_per_size));
    for (Var p : pooled)
      scores.push_back(tape.scale(tape.dot(staged.attn_query, p), inv_sqrt_f));
  }
  Var alpha = tape.softmax(tape.stack_scalars(scores));
  Var z = tape.weighted_sum(pooled, alpha);
  Var logits = tape.add(tape.matvec(staged.cls_weight, z), staged.cls_bias);
  return {logits, alpha, std::move(pooled)};
}

ForwardTrace forward_eval(const ModelParams& params, std::span<const int64_t> seq,
                          const std::vector<int64_t>* branch_subset) {
  Tape tape;
  StagedParams staged = stage_params(tape, params, false);
  DocForward f = forward_doc(tape, staged, params.config, seq, false, nullptr, branch_subset);
  ForwardTrace trace;
  trace.logits = tape.value(f.logits);
  trace.attention_weights = tape.value(f.attention);
  for (Var v : f.branch_vectors) trace.branch_vectors.push_back(tape.value(v));
  return trace;
}

void save_checkpoint(const ModelParams& params, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const ModelConfig& c = params.config;
  KvMap kv;
  kv["format"] = "rankvocab-checkpoint-v1";
  kv["config.vocab_size"] = std::to_string(c.vocab_size);
  kv["config.num_classes"] = std::to_string(c.num_classes);
  kv["config.embed_dim"] = std::to_string(c.embed_dim);
  kv["config.maxlen"] = std::to_string(c.maxlen);
  std::string sizes;
  for (size_t i = 0; i < c.filter_sizes.size(); i++) {
    if (i) sizes += ',';
    sizes += std::to_string(c.filter_sizes[i]);
  }
  kv["config.filter_sizes"] = sizes;
  kv["config.filters_per_size"] = std::to_string(c.filters_per_size);
  kv["config.attention"] = c.attention;
  kv["config.attention_dim"] = std::to_string(c.attention_dim);
  kv["config.dropout_p"] = format_g(c.dropout_p, 17);
  kv["config.trainable_embeddings"] = c.trainable_embeddings ? "true" : "false";
  params.for_each_param([&](const std::string& name, const Tensor& t) {
    kv["param." + name + ".file"] = name + ".bin";
    kv["param." + name + ".shape"] = dims_str(t.shape);
    write_doubles_le(dir + "/" + name + ".bin", t.data);
  });
  write_text_file(dir + "/checkpoint.txt", dump_kv(kv));
}

ModelParams load_checkpoint(const std::string& dir) {
  KvMap kv = parse_kv_file(dir + "/checkpoint.txt");
  if (kv_lookup(kv, "format") != "rankvocab-checkpoint-v1")
    throw ParseError(dir + "/checkpoint.txt: unrecognized checkpoint format");
  ModelConfig c;
  c.vocab_size = kv_int(kv, "config.vocab_size", -1);
  c.num_classes = kv_int(kv, "config.num_classes", -1);
  c.embed_dim = kv_int(kv, "config.embed_dim", -1);
  c.maxlen = kv_int(kv, "config.maxlen", -1);
  c.filter_sizes.clear();
  for (const std::string& part : split(kv_lookup(kv, "config.filter_sizes"), ',')) {
    int64_t h = 0;
    if (!parse_int(trim(part), &h)) throw ParseError("bad config.filter_sizes entry '" + part + "'");
    c.filter_sizes.push_back(h);
  }
  c.filters_per_size = kv_int(kv, "config.filters_per_size", -1);
  c.attention = kv_lookup(kv, "config.attention");
  c.attention_dim = kv_int(kv, "config.attention_dim", -1);
  c.dropout_p = kv_double(kv, "config.dropout_p", -1.0);
  c.trainable_embeddings = kv_bool(kv, "config.trainable_embeddings", true);

  ModelParams mp = zeros_params(c);
  mp.for_each_param([&](const std::string& name, Tensor& t) {
    auto file_it = kv.find("param." + name + ".file");
    auto shape_it = kv.find("param." + name + ".shape");
    if (file_it == kv.end() || shape_it == kv.end())
      throw ParseError(dir + "/checkpoint.txt: missing entries for parameter '" + name + "'");
    if (parse_dims(shape_it->second) != t.shape)
      throw ParseError("checkpoint shape " + shape_it->second + " for '" + name +
                       "' does not match configured shape " + t.shape_str());
    t.data = read_doubles_le(dir + "/" + file_it->second, t.data.size());
  });
  return mp;
}

}  // namespace rankvocab

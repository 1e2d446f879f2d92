#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <filesystem>

#include "../src/model.hpp"
#include "../src/rng.hpp"
#include "../src/util.hpp"

using namespace rankvocab;
namespace fs = std::filesystem;

namespace {

ModelConfig tiny_config() {
  ModelConfig c;
  c.vocab_size = 6;
  c.num_classes = 3;
  c.embed_dim = 4;
  c.maxlen = 6;
  c.filter_sizes = {2, 3};
  c.filters_per_size = 3;
  c.attention_dim = 2;
  c.dropout_p = 0.0;
  return c;
}

std::vector<std::string> tiny_vocab() {
  return {"alpha", "beta", "gamma", "delta", "epsilon", "zeta"};
}

struct TempDir {
  fs::path root;
  TempDir() : root(fs::temp_directory_path() / ("rv_model_" + std::to_string(::getpid()))) {
    fs::create_directories(root);
  }
  ~TempDir() { fs::remove_all(root); }
  std::string path(const std::string& rel) { return (root / rel).string(); }
};

}  // namespace

TEST_CASE("config validation rejects each broken invariant") {
  ModelConfig base = tiny_config();
  CHECK_NOTHROW(base.validate());
  auto broken = [&](auto mutate) {
    ModelConfig c = tiny_config();
    mutate(c);
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
  };
  broken([](ModelConfig& c) { c.vocab_size = 0; });
  broken([](ModelConfig& c) { c.num_classes = 0; });
  broken([](ModelConfig& c) { c.embed_dim = 0; });
  broken([](ModelConfig& c) { c.filters_per_size = 0; });
  broken([](ModelConfig& c) { c.filter_sizes = {}; });
  broken([](ModelConfig& c) { c.filter_sizes = {2, 2}; });
  broken([](ModelConfig& c) { c.filter_sizes = {0}; });
  broken([](ModelConfig& c) { c.filter_sizes = {7}; });  // exceeds maxlen 6
  broken([](ModelConfig& c) { c.dropout_p = 1.0; });
  broken([](ModelConfig& c) { c.dropout_p = -0.1; });
  broken([](ModelConfig& c) { c.attention = "multihead"; });
  broken([](ModelConfig& c) { c.attention_dim = 0; });
}

TEST_CASE("parameter counts are exact and additive") {
  ModelConfig c;
  c.vocab_size = 10000;
  c.num_classes = 20;
  c.embed_dim = 100;
  ParamCounts pc = count_params(c);
  CHECK(pc.embedding == 1000200);  // (V+2)*D including pad and OOV rows
  // defaults: filters [2,3,4,5] x 128, D=100 -> 128*(2+3+4+5)*100 + 4*128
  CHECK(pc.conv == 128 * 14 * 100 + 4 * 128);
  CHECK(pc.attention == 64 * 128 + 64 + 64);
  CHECK(pc.classifier == 20 * 128 + 20);
  CHECK(pc.total == pc.embedding + pc.conv + pc.attention + pc.classifier);

  SUBCASE("embedding term scales linearly in V with slope D") {
    ModelConfig c20 = c, c30 = c;
    c20.vocab_size = 20000;
    c30.vocab_size = 30000;
    CHECK(count_params(c20).total - count_params(c).total == 1000000);
    CHECK(count_params(c30).total - count_params(c20).total == 1000000);
  }

  SUBCASE("wide configuration lands in the published band and shrinks >5x") {
    ModelConfig wide = c;
    wide.filter_sizes = {3, 4, 5, 6, 7};
    wide.filters_per_size = 200;
    ParamCounts small = count_params(wide);
    CHECK(small.total == 1518148);
    CHECK(small.total >= 1200000);
    CHECK(small.total <= 1800000);
    ModelConfig big = wide;
    big.vocab_size = 75000;
    CHECK(static_cast<double>(count_params(big).total) / static_cast<double>(small.total) > 5.0);
  }

  SUBCASE("dot attention stores only the query vector") {
    ModelConfig dot = c;
    dot.attention = "dot";
    CHECK(count_params(dot).attention == 128);
  }
}

TEST_CASE("initialization copies pretrained rows and keys the rest by word") {
  ModelConfig c = tiny_config();
  c.embed_dim = 3;
  EmbeddingTable pre(3);
  pre.add("alpha", {0.1, 0.2, 0.3});
  pre.add("gamma", {-1.0, 0.5, 2.0});
  ModelParams mp = init_params(c, tiny_vocab(), &pre, 42);

  // pad row frozen at zero
  for (int64_t j = 0; j < 3; j++) CHECK(mp.embedding[static_cast<size_t>(j)] == 0.0);
  // pretrained rows copied exactly (vocab rows start at 2)
  CHECK(mp.embedding[2 * 3 + 0] == 0.1);
  CHECK(mp.embedding[2 * 3 + 2] == 0.3);
  CHECK(mp.embedding[4 * 3 + 0] == -1.0);
  // missing rows and OOV land strictly inside [-0.05, 0.05] and are not zero
  for (int64_t row : {1, 3, 5, 6, 7}) {
    double norm = 0;
    for (int64_t j = 0; j < 3; j++) {
      double v = mp.embedding[static_cast<size_t>(row * 3 + j)];
      CHECK(std::abs(v) <= 0.05);
      norm += std::abs(v);
    }
    CHECK(norm > 0.0);
  }

  SUBCASE("a word's row does not depend on its position in the vocab") {
    std::vector<std::string> shuffled = {"zeta", "alpha", "delta", "gamma", "beta", "epsilon"};
    ModelParams other = init_params(c, shuffled, &pre, 42);
    auto row_of = [](const ModelParams& m, int64_t row) {
      return std::vector<double>(m.embedding.data.begin() + row * 3,
                                 m.embedding.data.begin() + (row + 1) * 3);
    };
    // beta: index 1 in tiny_vocab (row 3), index 4 in shuffled (row 6)
    CHECK(row_of(mp, 3) == row_of(other, 6));
    // zeta: row 7 vs row 2
    CHECK(row_of(mp, 7) == row_of(other, 2));
    CHECK(row_of(mp, 1) == row_of(other, 1));  // OOV row
    CHECK(mp.conv_weights[0].data == other.conv_weights[0].data);
    CHECK(mp.cls_weight.data == other.cls_weight.data);
  }

  SUBCASE("different seeds change the random rows") {
    ModelParams other = init_params(c, tiny_vocab(), &pre, 43);
    CHECK(mp.embedding.data != other.embedding.data);
    CHECK(mp.embedding[2 * 3 + 0] == other.embedding[2 * 3 + 0]);  // copied row unaffected
  }
}

TEST_CASE("initialization errors") {
  ModelConfig c = tiny_config();
  EmbeddingTable wrong_dim(7);
  CHECK_THROWS_AS(init_params(c, tiny_vocab(), &wrong_dim, 1), InvalidArgument);
  std::vector<std::string> short_vocab = {"a", "b"};
  CHECK_THROWS_AS(init_params(c, short_vocab, nullptr, 1), InvalidArgument);
}

TEST_CASE("glorot weights respect the fan-scaled bound") {
  ModelConfig c = tiny_config();
  ModelParams mp = init_params(c, tiny_vocab(), nullptr, 7);
  double lim0 = std::sqrt(6.0 / (2 * 4 + 3));  // branch 0: fan_in=h*D, fan_out=F
  double max_abs = 0;
  for (double v : mp.conv_weights[0].data) max_abs = std::max(max_abs, std::abs(v));
  CHECK(max_abs <= lim0);
  CHECK(max_abs > 0.25 * lim0);
  for (double v : mp.conv_biases[0].data) CHECK(v == 0.0);
  for (double v : mp.cls_bias.data) CHECK(v == 0.0);
  for (double v : mp.attn_bias.data) CHECK(v == 0.0);
}

TEST_CASE("eval forward is deterministic and ignores dropout") {
  ModelConfig c = tiny_config();
  ModelParams mp = init_params(c, tiny_vocab(), nullptr, 3);
  std::vector<int64_t> seq = {2, 5, 1, 7, 0, 0};
  ForwardTrace a = forward_eval(mp, seq);
  ForwardTrace b = forward_eval(mp, seq);
  CHECK(a.logits.data == b.logits.data);
  CHECK(a.attention_weights.data == b.attention_weights.data);

  ModelParams dropped = mp;
  dropped.config.dropout_p = 0.7;
  ForwardTrace d = forward_eval(dropped, seq);
  CHECK(a.logits.data == d.logits.data);

  CHECK(a.logits.shape == std::vector<int64_t>{3});
  CHECK(a.attention_weights.shape == std::vector<int64_t>{2});
  REQUIRE(a.branch_vectors.size() == 2);
  CHECK(a.branch_vectors[0].shape == std::vector<int64_t>{3});

  std::vector<int64_t> bad_len = {2, 3};
  CHECK_THROWS_AS(forward_eval(mp, bad_len), InvalidArgument);
  std::vector<int64_t> bad_index = {2, 5, 1, 99, 0, 0};
  CHECK_THROWS_AS(forward_eval(mp, bad_index), InvalidArgument);
}

TEST_CASE("attention weights form a distribution") {
  ModelConfig c = tiny_config();
  c.filter_sizes = {2, 3, 4};
  ModelParams mp = init_params(c, tiny_vocab(), nullptr, 11);
  CounterRng seq_rng = CounterRng::keyed(9, {streams::kSynth, 0});
  for (int trial = 0; trial < 50; trial++) {
    std::vector<int64_t> seq(6);
    for (auto& s : seq) s = static_cast<int64_t>(seq_rng.below(8));
    ForwardTrace tr = forward_eval(mp, seq);
    double total = 0;
    for (double a : tr.attention_weights.data) {
      CHECK(a > 0.0);
      CHECK(a < 1.0);
      total += a;
    }
    CHECK(std::abs(total - 1.0) <= 1e-9);
  }
}

TEST_CASE("a single branch gets attention weight exactly 1") {
  ModelConfig c = tiny_config();
  c.filter_sizes = {3};
  ModelParams mp = init_params(c, tiny_vocab(), nullptr, 5);
  std::vector<int64_t> seq = {2, 3, 4, 5, 6, 7};
  ForwardTrace tr = forward_eval(mp, seq);
  REQUIRE(tr.attention_weights.data.size() == 1);
  CHECK(tr.attention_weights[0] == 1.0);
  // z == P0, so logits are exactly W_c P0 + b_c; spot-check via branch vector
  CHECK(tr.branch_vectors[0].shape == std::vector<int64_t>{3});
}

TEST_CASE("identical branch vectors split attention uniformly") {
  ModelConfig c = tiny_config();
  c.filter_sizes = {2, 3, 4, 5};
  c.maxlen = 6;
  ModelParams mp = init_params(c, tiny_vocab(), nullptr, 8);
  // zero conv weights + equal biases make every pooled vector the same
  for (auto& w : mp.conv_weights) std::fill(w.data.begin(), w.data.end(), 0.0);
  for (auto& b : mp.conv_biases) std::fill(b.data.begin(), b.data.end(), 0.3);
  std::vector<int64_t> seq = {2, 3, 4, 0, 0, 0};
  ForwardTrace tr = forward_eval(mp, seq);
  for (double a : tr.attention_weights.data) CHECK(a == 0.25);
  for (const Tensor& p : tr.branch_vectors)
    for (double v : p.data) CHECK(v == 0.3);
}

TEST_CASE("zero context vector scores branches equally") {
  ModelConfig c = tiny_config();  // two branches
  ModelParams mp = init_params(c, tiny_vocab(), nullptr, 13);
  std::fill(mp.attn_context.data.begin(), mp.attn_context.data.end(), 0.0);
  std::vector<int64_t> seq = {2, 3, 4, 5, 6, 7};
  ForwardTrace tr = forward_eval(mp, seq);
  CHECK(tr.attention_weights[0] == 0.5);
  CHECK(tr.attention_weights[1] == 0.5);
}

TEST_CASE("dot attention matches a hand computation") {
  ModelConfig c = tiny_config();
  c.attention = "dot";
  c.filters_per_size = 1;
  c.num_classes = 2;
  ModelParams mp = zeros_params(c);
  // conv output = bias everywhere, so pooled scalars are 3 and 5
  mp.conv_biases[0][0] = 3.0;
  mp.conv_biases[1][0] = 5.0;
  mp.attn_query[0] = 0.5;  // e = (1.5, 2.5) after the 1/sqrt(F)=1 scaling
  mp.cls_weight[0] = 1.0;
  mp.cls_weight[1] = -1.0;
  mp.cls_bias[0] = 0.25;
  mp.cls_bias[1] = -0.25;
  std::vector<int64_t> seq = {0, 0, 0, 0, 0, 0};
  ForwardTrace tr = forward_eval(mp, seq);
  double a1 = std::exp(2.5) / (std::exp(1.5) + std::exp(2.5));
  CHECK(tr.attention_weights[1] == doctest::Approx(a1).epsilon(1e-12));
  double z = (1.0 - a1) * 3.0 + a1 * 5.0;
  CHECK(tr.logits[0] == doctest::Approx(z + 0.25).epsilon(1e-12));
  CHECK(tr.logits[1] == doctest::Approx(-z - 0.25).epsilon(1e-12));
}

TEST_CASE("a branch with vanishing attention can be pruned harmlessly") {
  ModelConfig c = tiny_config();
  c.attention_dim = 1;
  c.num_classes = 2;
  ModelParams mp = init_params(c, tiny_vocab(), nullptr, 21);
  // keep embeddings tiny so conv activations hug the biases
  for (auto& v : mp.embedding.data) v *= 0.01;
  for (auto& v : mp.conv_weights[0].data) v *= 0.1;
  for (auto& v : mp.conv_weights[1].data) v *= 0.1;
  std::fill(mp.conv_biases[0].data.begin(), mp.conv_biases[0].data.end(), 1.0);
  std::fill(mp.conv_biases[1].data.begin(), mp.conv_biases[1].data.end(), -10.0);
  std::fill(mp.attn_proj.data.begin(), mp.attn_proj.data.end(), 1.0);
  mp.attn_bias[0] = 0.0;
  mp.attn_context[0] = 20.0;

  std::vector<int64_t> seq = {2, 3, 4, 5, 6, 7};
  ForwardTrace full = forward_eval(mp, seq);
  REQUIRE(full.attention_weights.data.size() == 2);
  CHECK(full.attention_weights[1] < 1e-6);

  std::vector<int64_t> keep = {0};
  ForwardTrace pruned = forward_eval(mp, seq, &keep);
  REQUIRE(pruned.logits.data.size() == full.logits.data.size());
  double max_diff = 0;
  for (size_t i = 0; i < full.logits.data.size(); i++)
    max_diff = std::max(max_diff, std::abs(full.logits[i] - pruned.logits[i]));
  CHECK(max_diff < 1e-4);
}

TEST_CASE("checkpoints round-trip bit-exactly") {
  TempDir d;
  ModelConfig c = tiny_config();
  c.dropout_p = 0.2;
  ModelParams mp = init_params(c, tiny_vocab(), nullptr, 77);
  save_checkpoint(mp, d.path("ckpt"));
  ModelParams back = load_checkpoint(d.path("ckpt"));

  CHECK(back.config.vocab_size == c.vocab_size);
  CHECK(back.config.filter_sizes == c.filter_sizes);
  CHECK(back.config.attention == c.attention);
  CHECK(back.config.dropout_p == c.dropout_p);
  bool all_equal = true;
  size_t seen = 0;
  back.for_each_param([&](const std::string& name, Tensor& t) {
    seen++;
    mp.for_each_param([&](const std::string& name2, Tensor& t2) {
      if (name == name2) all_equal = all_equal && t.data == t2.data && t.shape == t2.shape;
    });
  });
  CHECK(all_equal);
  CHECK(seen == 10);  // embedding + 2x(conv w,b) + 3 attention + 2 classifier

  SUBCASE("awkward values survive the trip") {
    mp.embedding[5] = -2.5e-300;
    mp.cls_weight[0] = 0.1;
    mp.attn_proj[1] = 1.0 / 3.0;
    save_checkpoint(mp, d.path("ckpt2"));
    ModelParams again = load_checkpoint(d.path("ckpt2"));
    CHECK(again.embedding[5] == -2.5e-300);
    CHECK(again.cls_weight[0] == 0.1);
    CHECK(again.attn_proj[1] == 1.0 / 3.0);
  }

  SUBCASE("dot-attention checkpoints carry the query") {
    ModelConfig dc = tiny_config();
    dc.attention = "dot";
    ModelParams dm = init_params(dc, tiny_vocab(), nullptr, 78);
    save_checkpoint(dm, d.path("dot"));
    ModelParams dback = load_checkpoint(d.path("dot"));
    CHECK(dback.attn_query.data == dm.attn_query.data);
  }

  CHECK_THROWS_AS(load_checkpoint(d.path("nope")), IoError);
}

TEST_CASE("full model loss passes the gradient check") {
  ModelConfig c = tiny_config();
  c.dropout_p = 0.25;
  ModelParams tmpl = init_params(c, tiny_vocab(), nullptr, 17);
  std::vector<Tensor> params;
  std::vector<std::string> names;
  tmpl.for_each_param([&](const std::string& name, Tensor& t) {
    names.push_back(name);
    params.push_back(t);
  });
  std::vector<int64_t> seq = {2, 4, 1, 6, 0, 0};
  int64_t label = 1;

  auto f = [&](const std::vector<Tensor>& ps, std::vector<Tensor>* grads) -> double {
    ModelParams mp = zeros_params(c);
    size_t k = 0;
    mp.for_each_param([&](const std::string&, Tensor& t) { t = ps[k++]; });
    Tape tape;
    StagedParams sp = stage_params(tape, mp, true);
    CounterRng drop = CounterRng::keyed(11, {streams::kDropout, 0, 0});
    DocForward fw = forward_doc(tape, sp, c, seq, true, &drop);
    Var loss = tape.cross_entropy(fw.logits, label);
    if (grads) {
      tape.backward(loss);
      std::vector<Var> leaves = {sp.embedding};
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
      for (Var v : leaves) grads->push_back(tape.grad(v));
    }
    return tape.value(loss)[0];
  };

  GradCheckReport rep = grad_check(f, params, 1e-5, 60, 321);
  CHECK(rep.max_rel_err < 1e-4);
  CHECK(rep.checked > 100);
}

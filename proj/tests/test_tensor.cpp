#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>

#include "../src/tensor.hpp"

using namespace rankvocab;

namespace {

Tensor random_tensor(std::vector<int64_t> shape, CounterRng& rng, double lo = -1.0,
                     double hi = 1.0) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

// Runs grad_check against a tape graph built by `builder` over leaf Vars for
// each parameter; the builder must return a scalar loss Var.
GradCheckReport check_builder(std::vector<Tensor> params,
                              const std::function<Var(Tape&, const std::vector<Var>&)>& builder,
                              double eps = 1e-5) {
  auto f = [&](const std::vector<Tensor>& ps, std::vector<Tensor>* grads) {
    Tape t;
    std::vector<Var> vars;
    vars.reserve(ps.size());
    for (const Tensor& p : ps) vars.push_back(t.leaf(p, true));
    Var loss = builder(t, vars);
    double v = t.value(loss)[0];
    if (grads) {
      t.backward(loss);
      grads->clear();
      for (Var var : vars) grads->push_back(t.grad(var));
    }
    return v;
  };
  return grad_check(f, std::move(params), eps, 64, 123);
}

// loss = sum(out .* coeffs) with fixed pseudo-random coeffs, so every output
// coordinate influences the loss with a distinct weight.
Var weighted_loss(Tape& t, Var out, uint64_t key) {
  CounterRng rng = CounterRng::keyed(key, {streams::kGradCheck, 77});
  Tensor c = random_tensor(t.value(out).shape, rng, 0.1, 1.0);
  return t.sum(t.mul(out, t.leaf(std::move(c))));
}

}  // namespace

TEST_CASE("tensor shape bookkeeping") {
  Tensor t = Tensor::zeros({2, 3});
  CHECK(t.numel() == 6);
  CHECK(t.shape_str() == "[2x3]");
  CHECK(Tensor::scalar(4.5).numel() == 1);
  CHECK_THROWS_AS(Tensor::from({2, 2}, {1, 2, 3}), InvalidArgument);
  CHECK_THROWS_AS(Tensor::zeros({0, 3}), InvalidArgument);
}

TEST_CASE("matmul with an identity factor is a copy") {
  Tape t;
  Var eye = t.leaf(Tensor::from({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1}));
  Var b = t.leaf(Tensor::from({3, 2}, {1, 2, 3, 4, 5, 6}));
  Var c = t.matmul(eye, b);
  CHECK(t.value(c).shape == std::vector<int64_t>{3, 2});
  for (size_t i = 0; i < 6; i++) CHECK(t.value(c)[i] == t.value(b)[i]);

  Var bad = t.leaf(Tensor::zeros({4, 2}));
  CHECK_THROWS_WITH_AS(t.matmul(eye, bad) /* message names both shapes */,
                       doctest::Contains("[3x3]"), InvalidArgument);
}

TEST_CASE("relu values and the zero subgradient") {
  Tape t;
  Var x = t.leaf(Tensor::row_vector({-1, 0, 2}), true);
  Var y = t.relu(x);
  CHECK(t.value(y).data == std::vector<double>{0, 0, 2});
  t.backward(t.sum(y));
  CHECK(t.grad(x).data == std::vector<double>{0, 0, 1});
}

TEST_CASE("tanh at zero has unit gradient") {
  Tape t;
  Var x = t.leaf(Tensor::row_vector({0}), true);
  Var y = t.tanh(x);
  CHECK(t.value(y)[0] == 0.0);
  t.backward(t.sum(y));
  CHECK(t.grad(x)[0] == 1.0);
}

TEST_CASE("x + x backpropagates exactly 2") {
  Tape t;
  Var x = t.leaf(Tensor::row_vector({1.5, -2.0}), true);
  t.backward(t.sum(t.add(x, x)));
  CHECK(t.grad(x).data == std::vector<double>{2, 2});
}

TEST_CASE("hand-computed sliding-window convolution") {
  Tape t;
  Var in = t.leaf(Tensor::from({3, 1}, {1, 2, 3}));
  Var w = t.leaf(Tensor::from({1, 2, 1}, {1, 1}));
  Var b = t.leaf(Tensor::row_vector({0}));
  Var out = t.conv1d_valid(in, w, b);
  REQUIRE(t.value(out).shape == std::vector<int64_t>{2, 1});
  CHECK(t.value(out)[0] == 3);  // 1 + 2
  CHECK(t.value(out)[1] == 5);  // 2 + 3
}

TEST_CASE("convolution of zero input broadcasts the bias") {
  Tape t;
  Var in = t.leaf(Tensor::zeros({4, 3}));
  CounterRng rng = CounterRng::keyed(3, {streams::kGradCheck, 1});
  Var w = t.leaf(random_tensor({2, 2, 3}, rng));
  Var b = t.leaf(Tensor::row_vector({0.5, -1.5}));
  Var out = t.conv1d_valid(in, w, b);
  REQUIRE(t.value(out).shape == std::vector<int64_t>{3, 2});
  for (int64_t r = 0; r < 3; r++) {
    CHECK(t.value(out)[static_cast<size_t>(r * 2)] == 0.5);
    CHECK(t.value(out)[static_cast<size_t>(r * 2 + 1)] == -1.5);
  }
}

TEST_CASE("convolution output shape follows L - h + 1") {
  Tape t;
  Var in = t.leaf(Tensor::zeros({70, 10}));
  Var w = t.leaf(Tensor::zeros({128, 3, 10}));
  Var b = t.leaf(Tensor::zeros({128}));
  CHECK(t.value(t.conv1d_valid(in, w, b)).shape == std::vector<int64_t>{68, 128});

  Var wide = t.leaf(Tensor::zeros({1, 71, 10}));
  Var b1 = t.leaf(Tensor::zeros({1}));
  CHECK_THROWS_AS(t.conv1d_valid(in, wide, b1), InvalidArgument);
}

TEST_CASE("max over time keeps first argmax and routes its gradient") {
  Tape t;
  Var x = t.leaf(Tensor::from({3, 1}, {3, 7, 7}), true);
  Var y = t.max_over_time(x);
  CHECK(t.value(y)[0] == 7);
  t.backward(t.sum(y));
  CHECK(t.grad(x).data == std::vector<double>{0, 1, 0});

  Tape t1;
  Var single = t1.leaf(Tensor::from({1, 4}, {1, 2, 3, 4}));
  CHECK(t1.value(t1.max_over_time(single)).data == std::vector<double>{1, 2, 3, 4});
}

TEST_CASE("softmax is stable, normalized, and shift-invariant") {
  Tape t;
  Var big = t.softmax(t.leaf(Tensor::row_vector({1000, 0})));
  CHECK(std::isfinite(t.value(big)[0]));
  CHECK(t.value(big)[0] == doctest::Approx(1.0));
  CHECK(t.value(big)[1] == doctest::Approx(0.0));

  Var u = t.softmax(t.leaf(Tensor::row_vector({2, 2, 2})));
  for (size_t i = 0; i < 3; i++) CHECK(t.value(u)[i] == doctest::Approx(1.0 / 3));

  Var a = t.softmax(t.leaf(Tensor::row_vector({0.5, -1, 2})));
  Var b = t.softmax(t.leaf(Tensor::row_vector({0.5 + 3, -1 + 3, 2 + 3})));
  double sum = 0;
  for (size_t i = 0; i < 3; i++) {
    CHECK(t.value(a)[i] == doctest::Approx(t.value(b)[i]).epsilon(1e-12));
    sum += t.value(a)[i];
  }
  CHECK(std::abs(sum - 1.0) < 1e-12);
}

TEST_CASE("cross entropy values and gradient structure") {
  Tape t;
  Var logits = t.leaf(Tensor::row_vector({1, 1, 1, 1}), true);
  Var loss = t.cross_entropy(logits, 2);
  CHECK(t.value(loss)[0] == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  t.backward(loss);
  double gsum = 0;
  for (size_t i = 0; i < 4; i++) gsum += t.grad(logits)[i];
  CHECK(std::abs(gsum) < 1e-12);
  CHECK(t.grad(logits)[2] < 0);  // softmax - onehot at the true class

  Tape t2;
  Var confident = t2.leaf(Tensor::row_vector({10, -10}));
  CHECK(t2.value(t2.cross_entropy(confident, 0))[0] < 1e-4);
  CHECK_THROWS_AS(t2.cross_entropy(confident, 2), InvalidArgument);
  CHECK_THROWS_AS(t2.cross_entropy(confident, -1), InvalidArgument);
}

TEST_CASE("spatial dropout: identity cases and whole-channel masks") {
  Tape t;
  CounterRng rng = CounterRng::keyed(9, {streams::kDropout, 0, 0});
  Var x = t.leaf(Tensor::from({3, 4}, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12}));

  Var same_eval = t.spatial_dropout(x, 0.5, false, nullptr);
  CHECK(same_eval.id == x.id);  // identity returns the same node
  Var same_p0 = t.spatial_dropout(x, 0.0, true, &rng);
  CHECK(same_p0.id == x.id);
  CHECK_THROWS_AS(t.spatial_dropout(x, 1.0, true, &rng), InvalidArgument);
  CHECK_THROWS_AS(t.spatial_dropout(x, -0.1, true, &rng), InvalidArgument);

  // Every channel is either fully zero or fully scaled by 1/(1-p).
  bool saw_zero = false, saw_kept = false;
  for (int trial = 0; trial < 64; trial++) {
    Var y = t.spatial_dropout(x, 0.5, true, &rng);
    for (int64_t d = 0; d < 4; d++) {
      double r0 = t.value(y)[static_cast<size_t>(d)] / t.value(x)[static_cast<size_t>(d)];
      CHECK((r0 == 0.0 || r0 == doctest::Approx(2.0).epsilon(1e-15)));
      for (int64_t l = 1; l < 3; l++) {
        double rl = t.value(y)[static_cast<size_t>(l * 4 + d)] /
                    t.value(x)[static_cast<size_t>(l * 4 + d)];
        CHECK(rl == doctest::Approx(r0).epsilon(1e-15));
      }
      (r0 == 0.0 ? saw_zero : saw_kept) = true;
    }
  }
  CHECK(saw_zero);
  CHECK(saw_kept);
}

TEST_CASE("spatial dropout preserves the mean under inverted scaling") {
  const int64_t kDraws = 10000;
  Tensor x = Tensor::from({2, 3}, {1, 1, 1, 1, 1, 1});
  CounterRng rng = CounterRng::keyed(42, {streams::kDropout, 1, 0});
  std::vector<double> mean(6, 0.0);
  for (int64_t i = 0; i < kDraws; i++) {
    Tape t;
    Var y = t.spatial_dropout(t.leaf(x), 0.4, true, &rng);
    for (size_t j = 0; j < 6; j++) mean[j] += t.value(y)[j];
  }
  for (size_t j = 0; j < 6; j++) CHECK(std::abs(mean[j] / kDraws - 1.0) < 0.02);
}

TEST_CASE("embed_rows gathers and accumulates duplicate-row gradients") {
  Tape t;
  Var table = t.leaf(Tensor::from({3, 2}, {0, 1, 10, 11, 20, 21}), true);
  std::vector<int64_t> idx = {2, 0, 2};
  Var out = t.embed_rows(table, idx);
  CHECK(t.value(out).data == std::vector<double>{20, 21, 0, 1, 20, 21});
  t.backward(t.sum(out));
  CHECK(t.grad(table).data == std::vector<double>{1, 1, 0, 0, 2, 2});

  std::vector<int64_t> bad = {3};
  CHECK_THROWS_AS(t.embed_rows(table, bad), InvalidArgument);
}

TEST_CASE("gradient check: analytic sum is exact") {
  CounterRng rng = CounterRng::keyed(1, {streams::kGradCheck, 2});
  GradCheckReport rep = check_builder({random_tensor({4, 3}, rng)},
                                      [](Tape& t, const std::vector<Var>& v) { return t.sum(v[0]); });
  CHECK(rep.max_rel_err < 1e-9);
  CHECK(rep.checked == 12);
  CHECK(rep.skipped == 0);
}

TEST_CASE("gradient check skips exact max ties") {
  GradCheckReport rep =
      check_builder({Tensor::from({2, 1}, {0.5, 0.5})},
                    [](Tape& t, const std::vector<Var>& v) { return t.sum(t.max_over_time(v[0])); });
  CHECK(rep.skipped == 2);
  CHECK(rep.checked == 0);
}

TEST_CASE("gradient check rejects nondeterministic functions") {
  int calls = 0;
  auto f = [&](const std::vector<Tensor>& ps, std::vector<Tensor>* grads) {
    if (grads) {
      grads->clear();
      grads->push_back(Tensor::zeros(ps[0].shape));
    }
    return static_cast<double>(calls++);
  };
  CHECK_THROWS_AS(grad_check(f, {Tensor::scalar(1.0)}), InvalidArgument);
}

TEST_CASE("every primitive passes randomized gradient checks") {
  CounterRng rng = CounterRng::keyed(2024, {streams::kGradCheck, 3});

  SUBCASE("matmul") {
    auto rep = check_builder({random_tensor({3, 4}, rng), random_tensor({4, 2}, rng)},
                             [](Tape& t, const std::vector<Var>& v) {
                               return weighted_loss(t, t.matmul(v[0], v[1]), 11);
                             });
    CHECK(rep.max_rel_err < 1e-4);
  }
  SUBCASE("matvec and dot") {
    auto rep = check_builder({random_tensor({3, 5}, rng), random_tensor({5}, rng),
                              random_tensor({3}, rng)},
                             [](Tape& t, const std::vector<Var>& v) {
                               return t.dot(t.matvec(v[0], v[1]), v[2]);
                             });
    CHECK(rep.max_rel_err < 1e-4);
  }
  SUBCASE("add, mul, scale") {
    auto rep = check_builder({random_tensor({2, 3}, rng), random_tensor({2, 3}, rng)},
                             [](Tape& t, const std::vector<Var>& v) {
                               return weighted_loss(t, t.scale(t.mul(t.add(v[0], v[1]), v[0]), 1.7),
                                                    12);
                             });
    CHECK(rep.max_rel_err < 1e-4);
  }
  SUBCASE("add_bias") {
    auto rep = check_builder({random_tensor({4, 3}, rng), random_tensor({3}, rng)},
                             [](Tape& t, const std::vector<Var>& v) {
                               return weighted_loss(t, t.add_bias(v[0], v[1]), 13);
                             });
    CHECK(rep.max_rel_err < 1e-4);
  }
  SUBCASE("relu and tanh") {
    auto rep = check_builder({random_tensor({3, 3}, rng)},
                             [](Tape& t, const std::vector<Var>& v) {
                               return weighted_loss(t, t.tanh(t.relu(v[0])), 14);
                             });
    CHECK(rep.max_rel_err < 1e-4);
  }
  SUBCASE("conv1d_valid") {
    auto rep = check_builder(
        {random_tensor({6, 3}, rng), random_tensor({2, 2, 3}, rng), random_tensor({2}, rng)},
        [](Tape& t, const std::vector<Var>& v) {
          return weighted_loss(t, t.conv1d_valid(v[0], v[1], v[2]), 15);
        });
    CHECK(rep.max_rel_err < 1e-4);
  }
  SUBCASE("max_over_time") {
    auto rep = check_builder({random_tensor({5, 4}, rng)},
                             [](Tape& t, const std::vector<Var>& v) {
                               return weighted_loss(t, t.max_over_time(v[0]), 16);
                             });
    CHECK(rep.max_rel_err < 1e-4);
  }
  SUBCASE("softmax") {
    auto rep = check_builder({random_tensor({6}, rng)},
                             [](Tape& t, const std::vector<Var>& v) {
                               return weighted_loss(t, t.softmax(v[0]), 17);
                             });
    CHECK(rep.max_rel_err < 1e-4);
  }
  SUBCASE("cross_entropy") {
    auto rep = check_builder({random_tensor({5}, rng)}, [](Tape& t, const std::vector<Var>& v) {
      return t.cross_entropy(v[0], 3);
    });
    CHECK(rep.max_rel_err < 1e-4);
  }
  SUBCASE("stack, add_n, weighted_sum") {
    auto rep = check_builder(
        {random_tensor({4}, rng), random_tensor({4}, rng), random_tensor({2}, rng)},
        [](Tape& t, const std::vector<Var>& v) {
          Var s0 = t.dot(v[0], v[1]);
          Var s1 = t.dot(v[1], v[1]);
          Var w = t.softmax(t.add(t.stack_scalars({s0, s1}), v[2]));
          Var z = t.weighted_sum({v[0], v[1]}, w);
          return t.add_n({t.sum(z), t.dot(z, v[0])});
        });
    CHECK(rep.max_rel_err < 1e-4);
  }
  SUBCASE("embed_rows") {
    std::vector<int64_t> idx = {1, 0, 1, 2};
    auto rep = check_builder({random_tensor({3, 4}, rng)},
                             [idx](Tape& t, const std::vector<Var>& v) {
                               return weighted_loss(t, t.embed_rows(v[0], idx), 18);
                             });
    CHECK(rep.max_rel_err < 1e-4);
  }
  SUBCASE("spatial_dropout with frozen mask") {
    auto rep = check_builder({random_tensor({4, 5}, rng)},
                             [](Tape& t, const std::vector<Var>& v) {
                               CounterRng drop = CounterRng::keyed(5, {streams::kDropout, 2, 2});
                               return weighted_loss(t, t.spatial_dropout(v[0], 0.4, true, &drop),
                                                    19);
                             });
    CHECK(rep.max_rel_err < 1e-4);
  }
}

TEST_CASE("shape mismatches raise errors naming both shapes") {
  Tape t;
  Var a = t.leaf(Tensor::zeros({2, 3}));
  Var b = t.leaf(Tensor::zeros({3, 2}));
  CHECK_THROWS_WITH_AS(t.add(a, b), doctest::Contains("[3x2]"), InvalidArgument);
  Var v = t.leaf(Tensor::zeros({4}));
  CHECK_THROWS_AS(t.add_bias(a, v), InvalidArgument);
  CHECK_THROWS_AS(t.dot(v, t.leaf(Tensor::zeros({5}))), InvalidArgument);
  CHECK_THROWS_AS(t.weighted_sum({v, v}, t.leaf(Tensor::zeros({3}))), InvalidArgument);
  CHECK_THROWS_AS(t.backward(a), InvalidArgument);  // loss must be scalar
}

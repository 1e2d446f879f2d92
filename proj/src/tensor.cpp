#include "tensor.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

namespace rankvocab {

namespace {

// Debug-build guard: every op output must be finite.
void check_finite(const Tensor& t) {
#ifndef NDEBUG
  for (double v : t.data) assert(std::isfinite(v));
#else
  (void)t;
#endif
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw InvalidArgument(msg);
}

}  // namespace

Tensor Tensor::zeros(std::vector<int64_t> shape) {
  Tensor t;
  if (shape.empty()) throw InvalidArgument("tensor needs at least one dimension");
  int64_t n = 1;
  for (int64_t d : shape) {
    if (d <= 0) throw InvalidArgument("tensor dimensions must be positive");
    n *= d;
  }
  t.shape = std::move(shape);
  t.data.assign(static_cast<size_t>(n), 0.0);
  return t;
}

Tensor Tensor::from(std::vector<int64_t> shape, std::vector<double> values) {
  Tensor t = zeros(std::move(shape));
  if (t.numel() != static_cast<int64_t>(values.size()))
    throw InvalidArgument("value count " + std::to_string(values.size()) +
                          " does not fill shape " + t.shape_str());
  t.data = std::move(values);
  return t;
}

Tensor Tensor::row_vector(std::vector<double> values) {
  int64_t n = static_cast<int64_t>(values.size());
  return from({n}, std::move(values));
}

int64_t Tensor::numel() const {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  return n;
}

std::string Tensor::shape_str() const {
  std::string s = "[";
  for (size_t i = 0; i < shape.size(); i++) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  check_finite(value);
  return push(std::move(value), requires_grad);
}

Var Tape::push(Tensor value, bool requires_grad) {
  check_finite(value);
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int32_t>(nodes_.size() - 1), this};
}

void Tape::set_back(Var v, std::function<void(Tape&)> back) {
  nodes_[static_cast<size_t>(v.id)].back = std::move(back);
}

const Tape::Node& Tape::node(Var v) const {
  if (!v.valid() || v.tape != this || static_cast<size_t>(v.id) >= nodes_.size())
    throw InvalidArgument("variable does not belong to this tape");
  return nodes_[static_cast<size_t>(v.id)];
}

const Tensor& Tape::value(Var v) const { return node(v).value; }

bool Tape::requires_grad(Var v) const { return node(v).requires_grad; }

const Tensor& Tape::grad(Var v) const {
  const Node& n = node(v);
  if (n.grad.data.empty()) const_cast<Node&>(n).grad = Tensor::zeros(n.value.shape);
  return n.grad;
}

Tensor& Tape::grad_buf(int32_t id) {
  Node& n = nodes_[static_cast<size_t>(id)];
  if (n.grad.data.empty()) n.grad = Tensor::zeros(n.value.shape);
  return n.grad;
}

void Tape::backward(Var loss) {
  const Node& l = node(loss);
  if (l.value.numel() != 1)
    throw InvalidArgument("backward needs a scalar loss, got shape " + l.value.shape_str());
  for (Node& n : nodes_) n.grad.data.clear();
  grad_buf(loss.id)[0] = 1.0;
  // Creation order is topological, so one reverse sweep suffices; nodes whose
  // gradient never materialized contribute nothing and are skipped.
  for (int32_t i = loss.id; i >= 0; i--) {
    Node& n = nodes_[static_cast<size_t>(i)];
    if (!n.requires_grad || !n.back || n.grad.data.empty()) continue;
    n.back(*this);
  }
}

Var Tape::add(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require(ta.same_shape(tb), "add: shape mismatch " + ta.shape_str() + " vs " + tb.shape_str());
  Tensor out = ta;
  for (size_t i = 0; i < out.data.size(); i++) out[i] += tb[i];
  bool ra = requires_grad(a), rb = requires_grad(b);
  Var o = push(std::move(out), ra || rb);
  if (ra || rb)
    set_back(o, [oid = o.id, ia = a.id, ib = b.id, ra, rb](Tape& t) {
      const Tensor& g = t.out_grad(oid);
      if (ra) {
        Tensor& ga = t.grad_buf(ia);
        for (size_t i = 0; i < g.data.size(); i++) ga[i] += g[i];
      }
      if (rb) {
        Tensor& gb = t.grad_buf(ib);
        for (size_t i = 0; i < g.data.size(); i++) gb[i] += g[i];
      }
    });
  return o;
}

Var Tape::add_n(const std::vector<Var>& xs) {
  require(!xs.empty(), "add_n: needs at least one input");
  Tensor out = value(xs[0]);
  bool rg = false;
  std::vector<int32_t> ids;
  std::vector<bool> track;
  for (size_t k = 0; k < xs.size(); k++) {
    const Tensor& tk = value(xs[k]);
    require(tk.same_shape(out),
            "add_n: shape mismatch " + out.shape_str() + " vs " + tk.shape_str());
    if (k > 0)
      for (size_t j = 0; j < out.data.size(); j++) out[j] += tk[j];
    ids.push_back(xs[k].id);
    track.push_back(requires_grad(xs[k]));
    rg = rg || track.back();
  }
  Var o = push(std::move(out), rg);
  if (rg)
    set_back(o, [oid = o.id, ids, track](Tape& t) {
      const Tensor& g = t.out_grad(oid);
      for (size_t k = 0; k < ids.size(); k++) {
        if (!track[k]) continue;
        Tensor& gi = t.grad_buf(ids[k]);
        for (size_t j = 0; j < g.data.size(); j++) gi[j] += g[j];
      }
    });
  return o;
}

Var Tape::mul(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require(ta.same_shape(tb), "mul: shape mismatch " + ta.shape_str() + " vs " + tb.shape_str());
  Tensor out = ta;
  for (size_t i = 0; i < out.data.size(); i++) out[i] *= tb[i];
  bool ra = requires_grad(a), rb = requires_grad(b);
  Var o = push(std::move(out), ra || rb);
  if (ra || rb)
    set_back(o, [oid = o.id, ia = a.id, ib = b.id, ra, rb](Tape& t) {
      const Tensor& g = t.out_grad(oid);
      const Tensor& va = t.val(ia);
      const Tensor& vb = t.val(ib);
      if (ra) {
        Tensor& ga = t.grad_buf(ia);
        for (size_t i = 0; i < g.data.size(); i++) ga[i] += g[i] * vb[i];
      }
      if (rb) {
        Tensor& gb = t.grad_buf(ib);
        for (size_t i = 0; i < g.data.size(); i++) gb[i] += g[i] * va[i];
      }
    });
  return o;
}

Var Tape::scale(Var x, double c) {
  require(std::isfinite(c), "scale: factor must be finite");
  Tensor out = value(x);
  for (double& v : out.data) v *= c;
  bool rg = requires_grad(x);
  Var o = push(std::move(out), rg);
  if (rg)
    set_back(o, [oid = o.id, ix = x.id, c](Tape& t) {
      const Tensor& g = t.out_grad(oid);
      Tensor& gx = t.grad_buf(ix);
      for (size_t i = 0; i < g.data.size(); i++) gx[i] += c * g[i];
    });
  return o;
}

Var Tape::matmul(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require(ta.shape.size() == 2 && tb.shape.size() == 2 && ta.shape[1] == tb.shape[0],
          "matmul: incompatible shapes " + ta.shape_str() + " vs " + tb.shape_str());
  int64_t m = ta.shape[0], k = ta.shape[1], n = tb.shape[1];
  Tensor out = Tensor::zeros({m, n});
  for (int64_t i = 0; i < m; i++)
    for (int64_t l = 0; l < k; l++) {
      double av = ta[static_cast<size_t>(i * k + l)];
      if (av == 0.0) continue;
      for (int64_t j = 0; j < n; j++)
        out[static_cast<size_t>(i * n + j)] += av * tb[static_cast<size_t>(l * n + j)];
    }
  bool ra = requires_grad(a), rb = requires_grad(b);
  Var o = push(std::move(out), ra || rb);
  if (ra || rb)
    set_back(o, [oid = o.id, ia = a.id, ib = b.id, ra, rb, m, k, n](Tape& t) {
      const Tensor& g = t.out_grad(oid);
      const Tensor& va = t.val(ia);
      const Tensor& vb = t.val(ib);
      if (ra) {
        Tensor& ga = t.grad_buf(ia);
        for (int64_t i = 0; i < m; i++)
          for (int64_t l = 0; l < k; l++) {
            double acc = 0;
            for (int64_t j = 0; j < n; j++)
              acc += g[static_cast<size_t>(i * n + j)] * vb[static_cast<size_t>(l * n + j)];
            ga[static_cast<size_t>(i * k + l)] += acc;
          }
      }
      if (rb) {
        Tensor& gb = t.grad_buf(ib);
        for (int64_t l = 0; l < k; l++)
          for (int64_t j = 0; j < n; j++) {
            double acc = 0;
            for (int64_t i = 0; i < m; i++)
              acc += va[static_cast<size_t>(i * k + l)] * g[static_cast<size_t>(i * n + j)];
            gb[static_cast<size_t>(l * n + j)] += acc;
          }
      }
    });
  return o;
}

Var Tape::matvec(Var a, Var x) {
  const Tensor& ta = value(a);
  const Tensor& tx = value(x);
  require(ta.shape.size() == 2 && tx.shape.size() == 1 && ta.shape[1] == tx.shape[0],
          "matvec: incompatible shapes " + ta.shape_str() + " vs " + tx.shape_str());
  int64_t m = ta.shape[0], k = ta.shape[1];
  Tensor out = Tensor::zeros({m});
  for (int64_t i = 0; i < m; i++) {
    double acc = 0;
    for (int64_t l = 0; l < k; l++)
      acc += ta[static_cast<size_t>(i * k + l)] * tx[static_cast<size_t>(l)];
    out[static_cast<size_t>(i)] = acc;
  }
  bool ra = requires_grad(a), rx = requires_grad(x);
  Var o = push(std::move(out), ra || rx);
  if (ra || rx)
    set_back(o, [oid = o.id, ia = a.id, ix = x.id, ra, rx, m, k](Tape& t) {
      const Tensor& g = t.out_grad(oid);
      const Tensor& va = t.val(ia);
      const Tensor& vx = t.val(ix);
      if (ra) {
        Tensor& ga = t.grad_buf(ia);
        for (int64_t i = 0; i < m; i++)
          for (int64_t l = 0; l < k; l++)
            ga[static_cast<size_t>(i * k + l)] +=
                g[static_cast<size_t>(i)] * vx[static_cast<size_t>(l)];
      }
      if (rx) {
        Tensor& gx = t.grad_buf(ix);
        for (int64_t l = 0; l < k; l++) {
          double acc = 0;
          for (int64_t i = 0; i < m; i++)
            acc += va[static_cast<size_t>(i * k + l)] * g[static_cast<size_t>(i)];
          gx[static_cast<size_t>(l)] += acc;
        }
      }
    });
  return o;
}

Var Tape::add_bias(Var m, Var bias) {
  const Tensor& tm = value(m);
  const Tensor& tb = value(bias);
  require(tm.shape.size() == 2 && tb.shape.size() == 1 && tm.shape[1] == tb.shape[0],
          "add_bias: incompatible shapes " + tm.shape_str() + " vs " + tb.shape_str());
  int64_t rows = tm.shape[0], cols = tm.shape[1];
  Tensor out = tm;
  for (int64_t r = 0; r < rows; r++)
    for (int64_t c = 0; c < cols; c++)
      out[static_cast<size_t>(r * cols + c)] += tb[static_cast<size_t>(c)];
  bool rm = requires_grad(m), rb = requires_grad(bias);
  Var o = push(std::move(out), rm || rb);
  if (rm || rb)
    set_back(o, [oid = o.id, im = m.id, ib = bias.id, rm, rb, rows, cols](Tape& t) {
      const Tensor& g = t.out_grad(oid);
      if (rm) {
        Tensor& gm = t.grad_buf(im);
        for (size_t i = 0; i < g.data.size(); i++) gm[i] += g[i];
      }
      if (rb) {
        Tensor& gb = t.grad_buf(ib);
        for (int64_t r = 0; r < rows; r++)
          for (int64_t c = 0; c < cols; c++)
            gb[static_cast<size_t>(c)] += g[static_cast<size_t>(r * cols + c)];
      }
    });
  return o;
}

Var Tape::relu(Var x) {
  Tensor out = value(x);
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  bool rg = requires_grad(x);
  Var o = push(std::move(out), rg);
  if (rg)
    set_back(o, [oid = o.id, ix = x.id](Tape& t) {
      const Tensor& g = t.out_grad(oid);
      const Tensor& vx = t.val(ix);
      Tensor& gx = t.grad_buf(ix);
      // Subgradient at exactly 0 is 0.
      for (size_t i = 0; i < g.data.size(); i++)
        if (vx[i] > 0.0) gx[i] += g[i];
    });
  return o;
}

Var Tape::tanh(Var x) {
  Tensor out = value(x);
  for (double& v : out.data) v = std::tanh(v);
  bool rg = requires_grad(x);
  Var o = push(std::move(out), rg);
  if (rg)
    set_back(o, [oid = o.id, ix = x.id](Tape& t) {
      const Tensor& g = t.out_grad(oid);
      const Tensor& y = t.val(oid);
      Tensor& gx = t.grad_buf(ix);
      for (size_t i = 0; i < g.data.size(); i++) gx[i] += g[i] * (1.0 - y[i] * y[i]);
    });
  return o;
}

Var Tape::conv1d_valid(Var input, Var filters, Var bias) {
  const Tensor& ti = value(input);
  const Tensor& tw = value(filters);
  const Tensor& tb = value(bias);
  require(ti.shape.size() == 2 && tw.shape.size() == 3 && tb.shape.size() == 1,
          "conv1d_valid: expected input [LxD], filters [FxhxD], bias [F], got " + ti.shape_str() +
              ", " + tw.shape_str() + ", " + tb.shape_str());
  int64_t L = ti.shape[0], D = ti.shape[1];
  int64_t F = tw.shape[0], h = tw.shape[1];
  require(tw.shape[2] == D, "conv1d_valid: filter depth " + tw.shape_str() +
                                " does not match input " + ti.shape_str());
  require(tb.shape[0] == F, "conv1d_valid: bias " + tb.shape_str() + " does not match filters " +
                                tw.shape_str());
  require(h <= L, "conv1d_valid: filter size " + std::to_string(h) + " exceeds input length " +
                      std::to_string(L));
  int64_t T = L - h + 1;
  Tensor out = Tensor::zeros({T, F});
  for (int64_t t0 = 0; t0 < T; t0++) {
    for (int64_t f = 0; f < F; f++) {
      double acc = tb[static_cast<size_t>(f)];
      const double* w = &tw.data[static_cast<size_t>(f * h * D)];
      const double* in = &ti.data[static_cast<size_t>(t0 * D)];
      for (int64_t p = 0; p < h * D; p++) acc += in[p] * w[p];
      out[static_cast<size_t>(t0 * F + f)] = acc;
    }
  }
  bool ri = requires_grad(input), rw = requires_grad(filters), rb = requires_grad(bias);
  Var o = push(std::move(out), ri || rw || rb);
  if (ri || rw || rb)
    set_back(o, [oid = o.id, ii = input.id, iw = filters.id, ib = bias.id, ri, rw, rb, T, F, h,
                 D](Tape& t) {
      const Tensor& g = t.out_grad(oid);
      const Tensor& vi = t.val(ii);
      const Tensor& vw = t.val(iw);
      Tensor* gi = ri ? &t.grad_buf(ii) : nullptr;
      Tensor* gw = rw ? &t.grad_buf(iw) : nullptr;
      Tensor* gb = rb ? &t.grad_buf(ib) : nullptr;
      for (int64_t t0 = 0; t0 < T; t0++) {
        for (int64_t f = 0; f < F; f++) {
          double go = g[static_cast<size_t>(t0 * F + f)];
          if (go == 0.0) continue;
          if (gb) (*gb)[static_cast<size_t>(f)] += go;
          const double* w = &vw.data[static_cast<size_t>(f * h * D)];
          const double* in = &vi.data[static_cast<size_t>(t0 * D)];
          if (gi) {
            double* gird = &gi->data[static_cast<size_t>(t0 * D)];
            for (int64_t p = 0; p < h * D; p++) gird[p] += go * w[p];
          }
          if (gw) {
            double* gwrd = &gw->data[static_cast<size_t>(f * h * D)];
            for (int64_t p = 0; p < h * D; p++) gwrd[p] += go * in[p];
          }
        }
      }
    });
  return o;
}

Var Tape::max_over_time(Var input) {
  const Tensor& ti = value(input);
  require(ti.shape.size() == 2, "max_over_time: expected [TxF], got " + ti.shape_str());
  int64_t T = ti.shape[0], F = ti.shape[1];
  Tensor out = Tensor::zeros({F});
  std::vector<int64_t> amax(static_cast<size_t>(F), 0);
  for (int64_t f = 0; f < F; f++) {
    double best = ti[static_cast<size_t>(f)];
    int64_t at = 0;
    for (int64_t r = 1; r < T; r++) {
      double v = ti[static_cast<size_t>(r * F + f)];
      if (v > best) {  // strict: ties keep the first argmax
        best = v;
        at = r;
      }
    }
    out[static_cast<size_t>(f)] = best;
    amax[static_cast<size_t>(f)] = at;
  }
  bool rg = requires_grad(input);
  Var o = push(std::move(out), rg);
  if (rg)
    set_back(o, [oid = o.id, ii = input.id, amax = std::move(amax), F](Tape& t) {
      const Tensor& g = t.out_grad(oid);
      Tensor& gi = t.grad_buf(ii);
      for (int64_t f = 0; f < F; f++)
        gi[static_cast<size_t>(amax[static_cast<size_t>(f)] * F + f)] +=
            g[static_cast<size_t>(f)];
    });
  return o;
}

Var Tape::softmax(Var x) {
  const Tensor& tx = value(x);
  require(tx.shape.size() == 1 && tx.shape[0] >= 1,
          "softmax: expected a vector, got " + tx.shape_str());
  Tensor out = tx;
  double m = *std::max_element(out.data.begin(), out.data.end());
  double sum = 0;
  for (double& v : out.data) {
    v = std::exp(v - m);
    sum += v;
  }
  for (double& v : out.data) v /= sum;
  bool rg = requires_grad(x);
  Var o = push(std::move(out), rg);
  if (rg)
    set_back(o, [oid = o.id, ix = x.id](Tape& t) {
      const Tensor& g = t.out_grad(oid);
      const Tensor& y = t.val(oid);
      Tensor& gx = t.grad_buf(ix);
      double gy = 0;
      for (size_t i = 0; i < g.data.size(); i++) gy += g[i] * y[i];
      for (size_t i = 0; i < g.data.size(); i++) gx[i] += y[i] * (g[i] - gy);
    });
  return o;
}

Var Tape::dot(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require(ta.shape.size() == 1 && ta.same_shape(tb),
          "dot: shape mismatch " + ta.shape_str() + " vs " + tb.shape_str());
  double acc = 0;
  for (size_t i = 0; i < ta.data.size(); i++) acc += ta[i] * tb[i];
  bool ra = requires_grad(a), rb = requires_grad(b);
  Var o = push(Tensor::scalar(acc), ra || rb);
  if (ra || rb)
    set_back(o, [oid = o.id, ia = a.id, ib = b.id, ra, rb](Tape& t) {
      double g = t.out_grad(oid)[0];
      const Tensor& va = t.val(ia);
      const Tensor& vb = t.val(ib);
      if (ra) {
        Tensor& ga = t.grad_buf(ia);
        for (size_t i = 0; i < vb.data.size(); i++) ga[i] += g * vb[i];
      }
      if (rb) {
        Tensor& gb = t.grad_buf(ib);
        for (size_t i = 0; i < va.data.size(); i++) gb[i] += g * va[i];
      }
    });
  return o;
}

Var Tape::sum(Var x) {
  const Tensor& tx = value(x);
  double acc = 0;
  for (double v : tx.data) acc += v;
  bool rg = requires_grad(x);
  Var o = push(Tensor::scalar(acc), rg);
  if (rg)
    set_back(o, [oid = o.id, ix = x.id](Tape& t) {
      double g = t.out_grad(oid)[0];
      Tensor& gx = t.grad_buf(ix);
      for (double& v : gx.data) v += g;
    });
  return o;
}

Var Tape::stack_scalars(const std::vector<Var>& xs) {
  require(!xs.empty(), "stack_scalars: needs at least one input");
  Tensor out = Tensor::zeros({static_cast<int64_t>(xs.size())});
  std::vector<int32_t> ids;
  std::vector<bool> track;
  bool rg = false;
  for (size_t i = 0; i < xs.size(); i++) {
    const Tensor& ti = value(xs[i]);
    require(ti.numel() == 1, "stack_scalars: input " + std::to_string(i) + " has shape " +
                                 ti.shape_str() + ", expected a scalar");
    out[i] = ti[0];
    ids.push_back(xs[i].id);
    track.push_back(requires_grad(xs[i]));
    rg = rg || track.back();
  }
  Var o = push(std::move(out), rg);
  if (rg)
    set_back(o, [oid = o.id, ids, track](Tape& t) {
      const Tensor& g = t.out_grad(oid);
      for (size_t i = 0; i < ids.size(); i++)
        if (track[i]) t.grad_buf(ids[i])[0] += g[i];
    });
  return o;
}

Var Tape::weighted_sum(const std::vector<Var>& vecs, Var weights) {
  require(!vecs.empty(), "weighted_sum: needs at least one vector");
  const Tensor& tw = value(weights);
  require(tw.shape.size() == 1 && tw.shape[0] == static_cast<int64_t>(vecs.size()),
          "weighted_sum: weights " + tw.shape_str() + " do not match " +
              std::to_string(vecs.size()) + " vectors");
  const Tensor& first = value(vecs[0]);
  require(first.shape.size() == 1, "weighted_sum: expected vectors, got " + first.shape_str());
  Tensor out = Tensor::zeros(first.shape);
  std::vector<int32_t> ids;
  std::vector<bool> track;
  bool rg = requires_grad(weights);
  for (size_t b = 0; b < vecs.size(); b++) {
    const Tensor& tv = value(vecs[b]);
    require(tv.same_shape(first),
            "weighted_sum: shape mismatch " + first.shape_str() + " vs " + tv.shape_str());
    for (size_t i = 0; i < out.data.size(); i++) out[i] += tw[b] * tv[i];
    ids.push_back(vecs[b].id);
    track.push_back(requires_grad(vecs[b]));
    rg = rg || track.back();
  }
  Var o = push(std::move(out), rg);
  if (rg)
    set_back(o, [oid = o.id, ids, track, iw = weights.id, rw = requires_grad(weights)](Tape& t) {
      const Tensor& g = t.out_grad(oid);
      const Tensor& vw = t.val(iw);
      for (size_t b = 0; b < ids.size(); b++) {
        const Tensor& vb = t.val(ids[b]);
        if (track[b]) {
          Tensor& gv = t.grad_buf(ids[b]);
          for (size_t i = 0; i < g.data.size(); i++) gv[i] += vw[b] * g[i];
        }
        if (rw) {
          double acc = 0;
          for (size_t i = 0; i < g.data.size(); i++) acc += g[i] * vb[i];
          t.grad_buf(iw)[b] += acc;
        }
      }
    });
  return o;
}

Var Tape::spatial_dropout(Var x, double p, bool train, CounterRng* rng) {
  require(p >= 0.0 && p < 1.0, "spatial_dropout: p must be in [0, 1)");
  if (!train || p == 0.0) return x;  // identity, same node
  require(rng != nullptr, "spatial_dropout: train mode needs a generator");
  const Tensor& tx = value(x);
  require(tx.shape.size() == 2, "spatial_dropout: expected [LxD], got " + tx.shape_str());
  int64_t L = tx.shape[0], D = tx.shape[1];
  // One keep/drop decision per embedding channel; kept channels are scaled by
  // 1/(1-p) so the expected value matches the input.
  std::vector<double> mask(static_cast<size_t>(D));
  double keep_scale = 1.0 / (1.0 - p);
  for (int64_t d = 0; d < D; d++) mask[static_cast<size_t>(d)] = rng->next_double() >= p ? keep_scale : 0.0;
  Tensor out = tx;
  for (int64_t l = 0; l < L; l++)
    for (int64_t d = 0; d < D; d++) out[static_cast<size_t>(l * D + d)] *= mask[static_cast<size_t>(d)];
  bool rg = requires_grad(x);
  Var o = push(std::move(out), rg);
  if (rg)
    set_back(o, [oid = o.id, ix = x.id, mask = std::move(mask), L, D](Tape& t) {
      const Tensor& g = t.out_grad(oid);
      Tensor& gx = t.grad_buf(ix);
      for (int64_t l = 0; l < L; l++)
        for (int64_t d = 0; d < D; d++)
          gx[static_cast<size_t>(l * D + d)] +=
              g[static_cast<size_t>(l * D + d)] * mask[static_cast<size_t>(d)];
    });
  return o;
}

Var Tape::cross_entropy(Var logits, int64_t label) {
  const Tensor& tl = value(logits);
  require(tl.shape.size() == 1, "cross_entropy: expected a logit vector, got " + tl.shape_str());
  int64_t c = tl.shape[0];
  require(label >= 0 && label < c, "cross_entropy: label " + std::to_string(label) +
                                       " out of range [0, " + std::to_string(c) + ")");
  double m = *std::max_element(tl.data.begin(), tl.data.end());
  double sum = 0;
  for (double v : tl.data) sum += std::exp(v - m);
  double lse = m + std::log(sum);
  double loss = lse - tl[static_cast<size_t>(label)];
  bool rg = requires_grad(logits);
  Var o = push(Tensor::scalar(loss), rg);
  if (rg)
    set_back(o, [oid = o.id, il = logits.id, label, lse](Tape& t) {
      double g = t.out_grad(oid)[0];
      const Tensor& vl = t.val(il);
      Tensor& gl = t.grad_buf(il);
      for (size_t i = 0; i < vl.data.size(); i++) {
        double soft = std::exp(vl[i] - lse);
        gl[i] += g * (soft - (static_cast<int64_t>(i) == label ? 1.0 : 0.0));
      }
    });
  return o;
}

Var Tape::embed_rows(Var table, std::span<const int64_t> indices) {
  const Tensor& tt = value(table);
  require(tt.shape.size() == 2, "embed_rows: expected [NxD] table, got " + tt.shape_str());
  require(!indices.empty(), "embed_rows: needs at least one index");
  int64_t n = tt.shape[0], d = tt.shape[1];
  Tensor out = Tensor::zeros({static_cast<int64_t>(indices.size()), d});
  for (size_t l = 0; l < indices.size(); l++) {
    int64_t idx = indices[l];
    require(idx >= 0 && idx < n, "embed_rows: index " + std::to_string(idx) +
                                     " out of range [0, " + std::to_string(n) + ")");
    std::copy_n(&tt.data[static_cast<size_t>(idx * d)], static_cast<size_t>(d),
                &out.data[l * static_cast<size_t>(d)]);
  }
  bool rg = requires_grad(table);
  Var o = push(std::move(out), rg);
  if (rg)
    set_back(o, [oid = o.id, it = table.id,
                 idx = std::vector<int64_t>(indices.begin(), indices.end()), d](Tape& t) {
      const Tensor& g = t.out_grad(oid);
      Tensor& gt = t.grad_buf(it);
      for (size_t l = 0; l < idx.size(); l++)
        for (int64_t j = 0; j < d; j++)
          gt[static_cast<size_t>(idx[l] * d + j)] += g[l * static_cast<size_t>(d) + static_cast<size_t>(j)];
    });
  return o;
}

GradCheckReport grad_check(
    const std::function<double(const std::vector<Tensor>&, std::vector<Tensor>*)>& f,
    std::vector<Tensor> params, double eps, int64_t max_coords, uint64_t seed) {
  require(eps > 0, "grad_check: eps must be positive");
  std::vector<Tensor> grads;
  double loss0 = f(params, &grads);
  require(std::isfinite(loss0), "grad_check: loss is not finite");
  require(grads.size() == params.size(), "grad_check: gradient count mismatch");
  for (size_t i = 0; i < params.size(); i++)
    require(grads[i].same_shape(params[i]), "grad_check: gradient shape mismatch at parameter " +
                                                std::to_string(i));
  double replay = f(params, nullptr);
  require(replay == loss0, "grad_check: function is not deterministic under a fixed seed");

  GradCheckReport rep;
  for (size_t pi = 0; pi < params.size(); pi++) {
    Tensor& p = params[pi];
    int64_t n = p.numel();
    std::vector<int64_t> coords;
    if (n <= max_coords) {
      coords.resize(static_cast<size_t>(n));
      for (int64_t c = 0; c < n; c++) coords[static_cast<size_t>(c)] = c;
    } else {
      CounterRng rng = CounterRng::keyed(seed, {streams::kGradCheck, pi});
      for (int64_t c = 0; c < max_coords; c++)
        coords.push_back(static_cast<int64_t>(rng.below(static_cast<uint64_t>(n))));
    }
    for (int64_t c : coords) {
      double saved = p[static_cast<size_t>(c)];
      p[static_cast<size_t>(c)] = saved + eps;
      double f_plus = f(params, nullptr);
      p[static_cast<size_t>(c)] = saved - eps;
      double f_minus = f(params, nullptr);
      p[static_cast<size_t>(c)] = saved;
      double s_plus = (f_plus - loss0) / eps;
      double s_minus = (loss0 - f_minus) / eps;
      double disagree = std::abs(s_plus - s_minus);
      if (disagree > 0.1 * std::max(1e-8, std::abs(s_plus) + std::abs(s_minus)) &&
          disagree > 1e-7) {
        rep.skipped++;  // sitting on a kink; one-sided slopes disagree
        continue;
      }
      double g_fd = (f_plus - f_minus) / (2 * eps);
      double g_ad = grads[pi][static_cast<size_t>(c)];
      double rel = std::abs(g_ad - g_fd) / std::max(1e-8, std::abs(g_ad) + std::abs(g_fd));
      rep.max_rel_err = std::max(rep.max_rel_err, rel);
      rep.checked++;
    }
  }
  return rep;
}

}  // namespace rankvocab

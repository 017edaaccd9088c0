#pragma once

#include <functional>
#include <string>

#include "straw/kernels.hpp"
#include "straw/rng.hpp"
#include "straw/tensor.hpp"

namespace straw {

// Visitor over (name, value, grad) triples; the same enumeration drives
// optimizer sync, checkpointing and finite-difference sweeps.
template <class T>
using ParamVisitor = std::function<void(const std::string&, TensorT<T>&, TensorT<T>&)>;

template <class T>
void xavier_init(TensorT<T>& w, size_t fan_in, size_t fan_out, Rng& rng, double gain = 1.0) {
  double s = gain * std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& v : w.data) v = static_cast<T>(rng.uniform(-s, s));
}

// ---- fully connected: y = W x + b ----

template <class T>
struct LinearT {
  size_t in = 0, out = 0;
  TensorT<T> w, b, dw, db;

  void init(size_t in_dim, size_t out_dim, Rng& rng, double gain = 1.0) {
    in = in_dim;
    out = out_dim;
    w = TensorT<T>({out, in});
    b = TensorT<T>({out});
    dw = TensorT<T>({out, in});
    db = TensorT<T>({out});
    xavier_init(w, in, out, rng, gain);
  }

  void forward(const T* x, T* y) const { kernels::matvec(w.ptr(), x, b.ptr(), y, out, in); }

  TensorT<T> forward(const TensorT<T>& x) const {
    STRAW_CHECK(x.numel() == in, "linear: input size mismatch");
    TensorT<T> y({out});
    forward(x.ptr(), y.ptr());
    return y;
  }

  // Accumulates dw/db; dx (accumulated) may be null.
  void backward(const T* x, const T* dy, T* dx) {
    kernels::outer_acc(dy, x, dw.ptr(), db.ptr(), out, in);
    if (dx) kernels::matvec_t_acc(w.ptr(), dy, dx, out, in);
  }

  void zero_grad() {
    dw.zero();
    db.zero();
  }

  void visit(const std::string& prefix, const ParamVisitor<T>& fn) {
    fn(prefix + ".w", w, dw);
    fn(prefix + ".b", b, db);
  }
};

// ---- 2-D convolution, stride 1 ----

enum class Padding { same, valid };

template <class T>
struct Conv2dT {
  size_t in_ch = 0, out_ch = 0, ksize = 0, pad = 0;
  TensorT<T> w, b, dw, db;

  void init(size_t ic, size_t oc, size_t k, Padding p, Rng& rng) {
    STRAW_CHECK(k % 2 == 1, "conv kernel must be odd");
    in_ch = ic;
    out_ch = oc;
    ksize = k;
    pad = (p == Padding::same) ? (k - 1) / 2 : 0;
    w = TensorT<T>({oc, ic, k, k});
    b = TensorT<T>({oc});
    dw = TensorT<T>({oc, ic, k, k});
    db = TensorT<T>({oc});
    xavier_init(w, ic * k * k, oc * k * k, rng);
  }

  size_t out_h(size_t h) const { return h + 2 * pad - ksize + 1; }
  size_t out_w(size_t wd) const { return wd + 2 * pad - ksize + 1; }

  TensorT<T> forward(const TensorT<T>& x) const {
    STRAW_CHECK(x.rank() == 3 && x.dim(0) == in_ch, "conv: input shape mismatch");
    TensorT<T> y({out_ch, out_h(x.dim(1)), out_w(x.dim(2))});
    kernels::conv2d_forward(x.ptr(), w.ptr(), b.ptr(), y.ptr(), in_ch, x.dim(1), x.dim(2), out_ch,
                            ksize, pad);
    return y;
  }

  void backward(const TensorT<T>& x, const TensorT<T>& dy, TensorT<T>* dx) {
    kernels::conv2d_backward(x.ptr(), w.ptr(), dy.ptr(), dw.ptr(), db.ptr(),
                             dx ? dx->ptr() : nullptr, in_ch, x.dim(1), x.dim(2), out_ch, ksize,
                             pad);
  }

  void zero_grad() {
    dw.zero();
    db.zero();
  }

  void visit(const std::string& prefix, const ParamVisitor<T>& fn) {
    fn(prefix + ".w", w, dw);
    fn(prefix + ".b", b, db);
  }
};

// ---- activations ----

template <class T>
void relu_forward(const TensorT<T>& pre, TensorT<T>& out) {
  out = pre;
  for (auto& v : out.data)
    if (v < T(0)) v = T(0);
}

// dpre += dout * 1[pre > 0]
template <class T>
void relu_backward(const TensorT<T>& pre, const TensorT<T>& dout, TensorT<T>& dpre) {
  for (size_t i = 0; i < pre.numel(); ++i)
    if (pre.data[i] > T(0)) dpre.data[i] += dout.data[i];
}

template <class T>
T sigmoid(T x) {
  if (x >= T(0)) {
    T e = std::exp(-x);
    return T(1) / (T(1) + e);
  }
  T e = std::exp(x);
  return e / (T(1) + e);
}

template <class T>
T softplus(T x) {
  // ln(1 + e^x), overflow-safe
  if (x > T(30)) return x;
  return std::log1p(std::exp(x));
}

// ---- softmax / entropy (double accumulation regardless of T) ----

template <class T>
void softmax(const T* z, T* p, size_t n) {
  STRAW_CHECK(n > 0, "softmax: empty input");
  double m = static_cast<double>(z[0]);
  for (size_t i = 1; i < n; ++i) m = std::max(m, static_cast<double>(z[i]));
  double sum = 0.0;
  for (size_t i = 0; i < n; ++i) sum += std::exp(static_cast<double>(z[i]) - m);
  for (size_t i = 0; i < n; ++i)
    p[i] = static_cast<T>(std::exp(static_cast<double>(z[i]) - m) / sum);
}

template <class T>
TensorT<T> softmax(const TensorT<T>& z) {
  TensorT<T> p(z.shape);
  softmax(z.ptr(), p.ptr(), z.numel());
  return p;
}

// -ln p[target], computed from logits for stability.
template <class T>
double nll_from_logits(const T* z, size_t n, int target) {
  double m = static_cast<double>(z[0]);
  for (size_t i = 1; i < n; ++i) m = std::max(m, static_cast<double>(z[i]));
  double sum = 0.0;
  for (size_t i = 0; i < n; ++i) sum += std::exp(static_cast<double>(z[i]) - m);
  return -(static_cast<double>(z[target]) - m - std::log(sum));
}

template <class T>
double entropy(const T* p, size_t n) {
  double h = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double v = static_cast<double>(p[i]);
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

// dz += scale * (p - onehot(target)); gradient of -ln p[target] wrt logits.
template <class T>
void nll_backward(const T* p, size_t n, int target, T scale, T* dz) {
  for (size_t i = 0; i < n; ++i) dz[i] += scale * p[i];
  dz[target] -= scale;
}

// dz += scale * dH/dz with H = -sum p ln p; dH/dz_j = -p_j (ln p_j + H).
template <class T>
void entropy_backward(const T* p, size_t n, T scale, T* dz) {
  double h = entropy(p, n);
  for (size_t i = 0; i < n; ++i) {
    double v = static_cast<double>(p[i]);
    double lp = v > 0.0 ? std::log(v) : 0.0;
    dz[i] += scale * static_cast<T>(-v * (lp + h));
  }
}

// ---- LSTM cell; gate blocks ordered [i, f, g, o] ----

template <class T>
struct LstmCellT {
  size_t in = 0, hidden = 0;
  LinearT<T> wxh;  // (4H) x (in + H)

  struct State {
    TensorT<T> h, c;
  };

  struct Trace {
    TensorT<T> xh;       // concat input, previous hidden
    TensorT<T> i, f, g, o;
    TensorT<T> c_prev, c_new, tanh_c;
  };

  void init(size_t in_dim, size_t hidden_dim, Rng& rng) {
    in = in_dim;
    hidden = hidden_dim;
    wxh.init(in + hidden, 4 * hidden, rng);
    // forget gate starts open: standard stabilizer for long windows
    for (size_t j = 0; j < hidden; ++j) wxh.b[hidden + j] = T(1);
  }

  State zero_state() const {
    State s;
    s.h = TensorT<T>({hidden});
    s.c = TensorT<T>({hidden});
    return s;
  }

  void step(const T* x, State& s, Trace* tr) const {
    TensorT<T> xh({in + hidden});
    std::copy(x, x + in, xh.data.begin());
    std::copy(s.h.data.begin(), s.h.data.end(), xh.data.begin() + in);
    TensorT<T> pre({4 * hidden});
    wxh.forward(xh.ptr(), pre.ptr());
    TensorT<T> i({hidden}), f({hidden}), g({hidden}), o({hidden});
    for (size_t j = 0; j < hidden; ++j) {
      i[j] = sigmoid(pre[j]);
      f[j] = sigmoid(pre[hidden + j]);
      g[j] = std::tanh(pre[2 * hidden + j]);
      o[j] = sigmoid(pre[3 * hidden + j]);
    }
    TensorT<T> c_new({hidden}), tanh_c({hidden}), h_new({hidden});
    for (size_t j = 0; j < hidden; ++j) {
      c_new[j] = f[j] * s.c[j] + i[j] * g[j];
      tanh_c[j] = std::tanh(c_new[j]);
      h_new[j] = o[j] * tanh_c[j];
    }
    if (tr) {
      tr->xh = xh;
      tr->i = i;
      tr->f = f;
      tr->g = g;
      tr->o = o;
      tr->c_prev = s.c;
      tr->c_new = c_new;
      tr->tanh_c = tanh_c;
    }
    s.c = c_new;
    s.h = h_new;
  }

  // dh/dc are gradients wrt this step's outputs on entry and are replaced by
  // gradients wrt the previous step's state on exit. dx may be null.
  void backward(const Trace& tr, TensorT<T>& dh, TensorT<T>& dc, T* dx) {
    TensorT<T> dpre({4 * hidden});
    for (size_t j = 0; j < hidden; ++j) {
      T do_ = dh[j] * tr.tanh_c[j];
      T dct = dc[j] + dh[j] * tr.o[j] * (T(1) - tr.tanh_c[j] * tr.tanh_c[j]);
      T di = dct * tr.g[j];
      T df = dct * tr.c_prev[j];
      T dg = dct * tr.i[j];
      dc[j] = dct * tr.f[j];
      dpre[j] = di * tr.i[j] * (T(1) - tr.i[j]);
      dpre[hidden + j] = df * tr.f[j] * (T(1) - tr.f[j]);
      dpre[2 * hidden + j] = dg * (T(1) - tr.g[j] * tr.g[j]);
      dpre[3 * hidden + j] = do_ * tr.o[j] * (T(1) - tr.o[j]);
    }
    TensorT<T> dxh({in + hidden});
    wxh.backward(tr.xh.ptr(), dpre.ptr(), dxh.ptr());
    if (dx)
      for (size_t j = 0; j < in; ++j) dx[j] += dxh[j];
    for (size_t j = 0; j < hidden; ++j) dh[j] = dxh[in + j];
  }

  void zero_grad() { wxh.zero_grad(); }

  void visit(const std::string& prefix, const ParamVisitor<T>& fn) {
    wxh.visit(prefix + ".wxh", fn);
  }
};

// ---- two-layer perceptron with ReLU hidden ----

template <class T>
struct Mlp2T {
  LinearT<T> l1, l2;

  struct Trace {
    TensorT<T> x, pre1, h1;
  };

  void init(size_t in_dim, size_t hidden, size_t out_dim, Rng& rng) {
    l1.init(in_dim, hidden, rng);
    l2.init(hidden, out_dim, rng);
  }

  TensorT<T> forward(const TensorT<T>& x, Trace* tr) const {
    TensorT<T> pre1 = l1.forward(x);
    TensorT<T> h1(pre1.shape);
    relu_forward(pre1, h1);
    TensorT<T> y = l2.forward(h1);
    if (tr) {
      tr->x = x;
      tr->pre1 = pre1;
      tr->h1 = h1;
    }
    return y;
  }

  void backward(const Trace& tr, const TensorT<T>& dy, TensorT<T>* dx) {
    TensorT<T> dh1({l1.out});
    l2.backward(tr.h1.ptr(), dy.ptr(), dh1.ptr());
    TensorT<T> dpre1({l1.out});
    relu_backward(tr.pre1, dh1, dpre1);
    l1.backward(tr.x.ptr(), dpre1.ptr(), dx ? dx->ptr() : nullptr);
  }

  void zero_grad() {
    l1.zero_grad();
    l2.zero_grad();
  }

  void visit(const std::string& prefix, const ParamVisitor<T>& fn) {
    l1.visit(prefix + ".l1", fn);
    l2.visit(prefix + ".l2", fn);
  }
};

// ---- grid feature extractor: conv, relu, conv, relu, flatten, linear ----

template <class T>
struct GridFeaturesT {
  Conv2dT<T> c1, c2;
  LinearT<T> fc;
  size_t obs_ch = 0, obs_h = 0, obs_w = 0, feat = 0;

  struct Trace {
    TensorT<T> x, pre1, r1, pre2, r2;
  };

  void init(size_t ch, size_t h, size_t w, size_t conv_ch, size_t feat_dim, Padding p, Rng& rng) {
    obs_ch = ch;
    obs_h = h;
    obs_w = w;
    feat = feat_dim;
    c1.init(ch, conv_ch, 3, p, rng);
    c2.init(conv_ch, conv_ch, 3, p, rng);
    size_t h2 = c2.out_h(c1.out_h(h));
    size_t w2 = c2.out_w(c1.out_w(w));
    STRAW_CHECK(h2 > 0 && w2 > 0, "grid features: observation too small");
    fc.init(conv_ch * h2 * w2, feat_dim, rng);
  }

  TensorT<T> forward(const TensorT<T>& x, Trace* tr) const {
    TensorT<T> pre1 = c1.forward(x);
    TensorT<T> r1(pre1.shape);
    relu_forward(pre1, r1);
    TensorT<T> pre2 = c2.forward(r1);
    TensorT<T> r2(pre2.shape);
    relu_forward(pre2, r2);
    TensorT<T> flat = r2;
    flat.shape = {r2.numel()};
    TensorT<T> y = fc.forward(flat);
    if (tr) {
      tr->x = x;
      tr->pre1 = pre1;
      tr->r1 = r1;
      tr->pre2 = pre2;
      tr->r2 = r2;
    }
    return y;
  }

  void backward(const Trace& tr, const TensorT<T>& dy) {
    TensorT<T> flat = tr.r2;
    flat.shape = {tr.r2.numel()};
    TensorT<T> dflat({flat.numel()});
    fc.backward(flat.ptr(), dy.ptr(), dflat.ptr());
    TensorT<T> dr2 = dflat;
    dr2.shape = tr.r2.shape;
    TensorT<T> dpre2(tr.pre2.shape);
    relu_backward(tr.pre2, dr2, dpre2);
    TensorT<T> dr1(tr.r1.shape);
    c2.backward(tr.r1, dpre2, &dr1);
    TensorT<T> dpre1(tr.pre1.shape);
    relu_backward(tr.pre1, dr1, dpre1);
    c1.backward(tr.x, dpre1, nullptr);
  }

  void zero_grad() {
    c1.zero_grad();
    c2.zero_grad();
    fc.zero_grad();
  }

  void visit(const std::string& prefix, const ParamVisitor<T>& fn) {
    c1.visit(prefix + ".c1", fn);
    c2.visit(prefix + ".c2", fn);
    fc.visit(prefix + ".fc", fn);
  }
};

}  // namespace straw

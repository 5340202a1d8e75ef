#include "pb/tensor.hpp"

#include <cmath>
#include <numeric>

#include "pb/kernels.hpp"

namespace pb {

namespace {
bool g_debug_validation = false;

void check_finite(const Tensor& t, const char* op) {
  if (!g_debug_validation) return;
  for (double v : t.values())
    if (!std::isfinite(v))
      throw error(std::string("non-finite value produced by ") + op);
}
}  // namespace

void set_debug_validation(bool on) { g_debug_validation = on; }
bool debug_validation() { return g_debug_validation; }

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::Relu;
  if (s == "tanh") return Activation::Tanh;
  if (s == "sigmoid") return Activation::Sigmoid;
  throw config_error("unknown activation kind: " + s);
}

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::Relu:
      return "relu";
    case Activation::Tanh:
      return "tanh";
    case Activation::Sigmoid:
      return "sigmoid";
  }
  return "?";
}

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

size_t shape_numel(const Shape& s) {
  size_t n = 1;
  for (size_t d : s) n *= d;
  return n;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  auto node = std::make_shared<Node>();
  node->value.assign(shape_numel(shape), 0.0);
  node->shape = std::move(shape);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::from(Shape shape, std::vector<double> values,
                    bool requires_grad) {
  if (values.size() != shape_numel(shape))
    throw dim_error("value count " + std::to_string(values.size()) +
                    " does not match shape " + shape_str(shape));
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double v) { return from({1}, {v}); }

double Tensor::item() const {
  if (size() != 1) throw usage_error("item() on non-scalar tensor");
  return node_->value[0];
}

void Tensor::set_requires_grad(bool flag) {
  node_->requires_grad = flag;
  if (!flag) node_->grad.clear();
}

std::vector<double>& Tensor::grad() {
  if (node_->grad.empty()) throw usage_error("gradient not populated");
  return node_->grad;
}

const std::vector<double>& Tensor::grad() const {
  if (node_->grad.empty()) throw usage_error("gradient not populated");
  return node_->grad;
}

void Tensor::ensure_grad() {
  if (node_->grad.empty()) node_->grad.assign(node_->value.size(), 0.0);
}

void Tensor::zero_grad() {
  if (!node_->grad.empty()) node_->grad.assign(node_->value.size(), 0.0);
}

void Tensor::drop_grad() { node_->grad.clear(); }

Tensor Tensor::detached() const {
  auto node = std::make_shared<Node>();
  node->shape = node_->shape;
  node->value = node_->value;
  node->requires_grad = false;
  return Tensor(std::move(node));
}

void Tape::backward(Tensor& loss) {
  if (loss.size() != 1) throw usage_error("backward requires a scalar loss");
  loss.ensure_grad();
  loss.grad()[0] = 1.0;
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
}

namespace {

bool any_grad(const Tensor& a) { return a.requires_grad(); }
bool any_grad(const Tensor& a, const Tensor& b) {
  return a.requires_grad() || b.requires_grad();
}
bool any_grad(const Tensor& a, const Tensor& b, const Tensor& c) {
  return a.requires_grad() || b.requires_grad() || c.requires_grad();
}

void transpose_into(const std::vector<double>& src, size_t rows, size_t cols,
                    std::vector<double>& dst) {
  dst.resize(rows * cols);
  for (size_t i = 0; i < rows; ++i)
    for (size_t j = 0; j < cols; ++j) dst[j * rows + i] = src[i * cols + j];
}

}  // namespace

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    throw dim_error("matmul shape mismatch: " + shape_str(a.shape()) + " x " +
                    shape_str(b.shape()));
  const size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor c = Tensor::zeros({m, n});
  kernels::active().gemm_nn_acc(a.values().data(), b.values().data(),
                                c.values().data(), m, k, n);
  check_finite(c, "matmul");
  if (any_grad(a, b)) {
    c.set_requires_grad(true);
    Tensor ac = a, bc = b, cc = c;
    tape.record([ac, bc, cc, m, k, n]() mutable {
      cc.ensure_grad();
      const auto& dc = cc.grad();
      if (ac.requires_grad()) {
        ac.ensure_grad();
        std::vector<double> bt;
        transpose_into(bc.values(), k, n, bt);  // bt: n x k
        kernels::active().gemm_nn_acc(dc.data(), bt.data(), ac.grad().data(),
                                      m, n, k);
      }
      if (bc.requires_grad()) {
        bc.ensure_grad();
        std::vector<double> at;
        transpose_into(ac.values(), m, k, at);  // at: k x m
        kernels::active().gemm_nn_acc(at.data(), dc.data(), bc.grad().data(),
                                      k, m, n);
      }
    });
  }
  return c;
}

Tensor add_bias(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 1 || a.dim(1) != b.dim(0))
    throw dim_error("add_bias shape mismatch: " + shape_str(a.shape()) +
                    " + " + shape_str(b.shape()));
  const size_t rows = a.dim(0), cols = a.dim(1);
  Tensor c = Tensor::zeros({rows, cols});
  kernels::active().add_row(a.values().data(), b.values().data(),
                            c.values().data(), rows, cols);
  check_finite(c, "add_bias");
  if (any_grad(a, b)) {
    c.set_requires_grad(true);
    Tensor ac = a, bc = b, cc = c;
    tape.record([ac, bc, cc, rows, cols]() mutable {
      cc.ensure_grad();
      const auto& dc = cc.grad();
      if (ac.requires_grad()) {
        ac.ensure_grad();
        kernels::active().axpy(1.0, dc.data(), ac.grad().data(), rows * cols);
      }
      if (bc.requires_grad()) {
        bc.ensure_grad();
        auto& db = bc.grad();
        for (size_t i = 0; i < rows; ++i)
          kernels::active().axpy(1.0, dc.data() + i * cols, db.data(), cols);
      }
    });
  }
  return c;
}

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw dim_error("add shape mismatch: " + shape_str(a.shape()) + " vs " +
                    shape_str(b.shape()));
  Tensor c = Tensor::zeros(a.shape());
  kernels::active().add(a.values().data(), b.values().data(),
                        c.values().data(), a.size());
  check_finite(c, "add");
  if (any_grad(a, b)) {
    c.set_requires_grad(true);
    Tensor ac = a, bc = b, cc = c;
    tape.record([ac, bc, cc]() mutable {
      cc.ensure_grad();
      const auto& dc = cc.grad();
      if (ac.requires_grad()) {
        ac.ensure_grad();
        kernels::active().axpy(1.0, dc.data(), ac.grad().data(), dc.size());
      }
      if (bc.requires_grad()) {
        bc.ensure_grad();
        kernels::active().axpy(1.0, dc.data(), bc.grad().data(), dc.size());
      }
    });
  }
  return c;
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw dim_error("mul shape mismatch: " + shape_str(a.shape()) + " vs " +
                    shape_str(b.shape()));
  Tensor c = Tensor::zeros(a.shape());
  kernels::active().mul(a.values().data(), b.values().data(),
                        c.values().data(), a.size());
  check_finite(c, "mul");
  if (any_grad(a, b)) {
    c.set_requires_grad(true);
    Tensor ac = a, bc = b, cc = c;
    tape.record([ac, bc, cc]() mutable {
      cc.ensure_grad();
      const auto& dc = cc.grad();
      const size_t n = dc.size();
      std::vector<double> tmp(n);
      if (ac.requires_grad()) {
        ac.ensure_grad();
        kernels::active().mul(dc.data(), bc.values().data(), tmp.data(), n);
        kernels::active().axpy(1.0, tmp.data(), ac.grad().data(), n);
      }
      if (bc.requires_grad()) {
        bc.ensure_grad();
        kernels::active().mul(dc.data(), ac.values().data(), tmp.data(), n);
        kernels::active().axpy(1.0, tmp.data(), bc.grad().data(), n);
      }
    });
  }
  return c;
}

Tensor scale_cols(Tape& tape, const Tensor& a, const Tensor& s) {
  if (a.rank() != 2 || s.rank() != 1 || a.dim(1) != s.dim(0))
    throw dim_error("scale_cols shape mismatch: " + shape_str(a.shape()) +
                    " * " + shape_str(s.shape()));
  const size_t rows = a.dim(0), cols = a.dim(1);
  Tensor c = Tensor::zeros({rows, cols});
  kernels::active().scale_cols(a.values().data(), s.values().data(),
                               c.values().data(), rows, cols);
  check_finite(c, "scale_cols");
  if (any_grad(a, s)) {
    c.set_requires_grad(true);
    Tensor ac = a, sc = s, cc = c;
    tape.record([ac, sc, cc, rows, cols]() mutable {
      cc.ensure_grad();
      const auto& dc = cc.grad();
      if (ac.requires_grad()) {
        ac.ensure_grad();
        std::vector<double> tmp(rows * cols);
        kernels::active().scale_cols(dc.data(), sc.values().data(), tmp.data(),
                                     rows, cols);
        kernels::active().axpy(1.0, tmp.data(), ac.grad().data(), rows * cols);
      }
      if (sc.requires_grad()) {
        sc.ensure_grad();
        auto& ds = sc.grad();
        const auto& av = ac.values();
        for (size_t i = 0; i < rows; ++i)
          for (size_t j = 0; j < cols; ++j)
            ds[j] += dc[i * cols + j] * av[i * cols + j];
      }
    });
  }
  return c;
}

Tensor activation(Tape& tape, const Tensor& x, Activation kind) {
  Tensor y = Tensor::zeros(x.shape());
  const auto& xv = x.values();
  auto& yv = y.values();
  switch (kind) {
    case Activation::Relu:
      kernels::active().relu(xv.data(), yv.data(), xv.size());
      break;
    case Activation::Tanh:
      for (size_t i = 0; i < xv.size(); ++i) yv[i] = std::tanh(xv[i]);
      break;
    case Activation::Sigmoid:
      for (size_t i = 0; i < xv.size(); ++i)
        yv[i] = 1.0 / (1.0 + std::exp(-xv[i]));
      break;
  }
  check_finite(y, "activation");
  if (any_grad(x)) {
    y.set_requires_grad(true);
    Tensor xc = x, yc = y;
    tape.record([xc, yc, kind]() mutable {
      yc.ensure_grad();
      xc.ensure_grad();
      const auto& dy = yc.grad();
      const auto& yv2 = yc.values();
      auto& dx = xc.grad();
      const size_t n = dy.size();
      switch (kind) {
        case Activation::Relu:
          // derivative at exactly 0 is 0
          for (size_t i = 0; i < n; ++i)
            if (xc.values()[i] > 0.0) dx[i] += dy[i];
          break;
        case Activation::Tanh:
          for (size_t i = 0; i < n; ++i) dx[i] += dy[i] * (1.0 - yv2[i] * yv2[i]);
          break;
        case Activation::Sigmoid:
          for (size_t i = 0; i < n; ++i)
            dx[i] += dy[i] * yv2[i] * (1.0 - yv2[i]);
          break;
      }
    });
  }
  return y;
}

Tensor sum(Tape& tape, const Tensor& x) {
  double total = 0.0;
  for (double v : x.values()) total += v;
  Tensor y = Tensor::scalar(total);
  check_finite(y, "sum");
  if (any_grad(x)) {
    y.set_requires_grad(true);
    Tensor xc = x, yc = y;
    tape.record([xc, yc]() mutable {
      yc.ensure_grad();
      xc.ensure_grad();
      const double g = yc.grad()[0];
      auto& dx = xc.grad();
      for (size_t i = 0; i < dx.size(); ++i) dx[i] += g;
    });
  }
  return y;
}

Tensor conv2d(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& b,
              size_t stride, size_t pad) {
  if (x.rank() != 4 || w.rank() != 4 || b.rank() != 1)
    throw dim_error("conv2d expects x[N,C,H,W], w[O,C,3,3], b[O]");
  if (w.dim(2) != 3 || w.dim(3) != 3)
    throw dim_error("conv2d kernel must be 3x3, got " + shape_str(w.shape()));
  if (x.dim(1) != w.dim(1))
    throw dim_error("conv2d channel mismatch: " + shape_str(x.shape()) +
                    " vs " + shape_str(w.shape()));
  if (w.dim(0) != b.dim(0)) throw dim_error("conv2d bias size mismatch");
  if (stride == 0) throw dim_error("conv2d stride must be positive");
  const size_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const size_t O = w.dim(0);
  if (H + 2 * pad < 3 || W + 2 * pad < 3)
    throw dim_error("conv2d input smaller than kernel");
  const size_t Ho = (H + 2 * pad - 3) / stride + 1;
  const size_t Wo = (W + 2 * pad - 3) / stride + 1;
  Tensor y = Tensor::zeros({N, O, Ho, Wo});
  const auto& xv = x.values();
  const auto& wv = w.values();
  const auto& bv = b.values();
  auto& yv = y.values();
  for (size_t n = 0; n < N; ++n)
    for (size_t o = 0; o < O; ++o)
      for (size_t i = 0; i < Ho; ++i)
        for (size_t j = 0; j < Wo; ++j) {
          double acc = bv[o];
          for (size_t c = 0; c < C; ++c)
            for (size_t ki = 0; ki < 3; ++ki)
              for (size_t kj = 0; kj < 3; ++kj) {
                const ptrdiff_t hi = static_cast<ptrdiff_t>(i * stride + ki) -
                                     static_cast<ptrdiff_t>(pad);
                const ptrdiff_t wi = static_cast<ptrdiff_t>(j * stride + kj) -
                                     static_cast<ptrdiff_t>(pad);
                if (hi < 0 || wi < 0 || hi >= static_cast<ptrdiff_t>(H) ||
                    wi >= static_cast<ptrdiff_t>(W))
                  continue;
                acc += xv[((n * C + c) * H + hi) * W + wi] *
                       wv[((o * C + c) * 3 + ki) * 3 + kj];
              }
          yv[((n * O + o) * Ho + i) * Wo + j] = acc;
        }
  check_finite(y, "conv2d");
  if (any_grad(x, w, b)) {
    y.set_requires_grad(true);
    Tensor xc = x, wc = w, bc = b, yc = y;
    tape.record([xc, wc, bc, yc, stride, pad, N, C, H, W, O, Ho, Wo]() mutable {
      yc.ensure_grad();
      const auto& dy = yc.grad();
      const bool gx = xc.requires_grad(), gw = wc.requires_grad(),
                 gb = bc.requires_grad();
      if (gx) xc.ensure_grad();
      if (gw) wc.ensure_grad();
      if (gb) bc.ensure_grad();
      const auto& xv = xc.values();
      const auto& wv = wc.values();
      for (size_t n = 0; n < N; ++n)
        for (size_t o = 0; o < O; ++o)
          for (size_t i = 0; i < Ho; ++i)
            for (size_t j = 0; j < Wo; ++j) {
              const double g = dy[((n * O + o) * Ho + i) * Wo + j];
              if (g == 0.0) continue;
              if (gb) bc.grad()[o] += g;
              for (size_t c = 0; c < C; ++c)
                for (size_t ki = 0; ki < 3; ++ki)
                  for (size_t kj = 0; kj < 3; ++kj) {
                    const ptrdiff_t hi =
                        static_cast<ptrdiff_t>(i * stride + ki) -
                        static_cast<ptrdiff_t>(pad);
                    const ptrdiff_t wi =
                        static_cast<ptrdiff_t>(j * stride + kj) -
                        static_cast<ptrdiff_t>(pad);
                    if (hi < 0 || wi < 0 || hi >= static_cast<ptrdiff_t>(H) ||
                        wi >= static_cast<ptrdiff_t>(W))
                      continue;
                    const size_t xi = ((n * C + c) * H + hi) * W + wi;
                    const size_t wiq = ((o * C + c) * 3 + ki) * 3 + kj;
                    if (gw) wc.grad()[wiq] += g * xv[xi];
                    if (gx) xc.grad()[xi] += g * wv[wiq];
                  }
            }
    });
  }
  return y;
}

Tensor global_avg_pool(Tape& tape, const Tensor& x) {
  if (x.rank() != 4) throw dim_error("global_avg_pool expects [N,C,H,W]");
  const size_t N = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
  Tensor y = Tensor::zeros({N, C});
  const auto& xv = x.values();
  auto& yv = y.values();
  for (size_t n = 0; n < N; ++n)
    for (size_t c = 0; c < C; ++c) {
      double acc = 0.0;
      for (size_t k = 0; k < HW; ++k) acc += xv[(n * C + c) * HW + k];
      yv[n * C + c] = acc / static_cast<double>(HW);
    }
  check_finite(y, "global_avg_pool");
  if (any_grad(x)) {
    y.set_requires_grad(true);
    Tensor xc = x, yc = y;
    tape.record([xc, yc, N, C, HW]() mutable {
      yc.ensure_grad();
      xc.ensure_grad();
      const auto& dy = yc.grad();
      auto& dx = xc.grad();
      const double inv = 1.0 / static_cast<double>(HW);
      for (size_t n = 0; n < N; ++n)
        for (size_t c = 0; c < C; ++c) {
          const double g = dy[n * C + c] * inv;
          for (size_t k = 0; k < HW; ++k) dx[(n * C + c) * HW + k] += g;
        }
    });
  }
  return y;
}

Tensor flatten(Tape& tape, const Tensor& x) {
  if (x.rank() < 2) throw dim_error("flatten expects rank >= 2");
  const size_t N = x.dim(0);
  const size_t rest = x.size() / N;
  Tensor y = Tensor::from({N, rest}, x.values());
  if (any_grad(x)) {
    y.set_requires_grad(true);
    Tensor xc = x, yc = y;
    tape.record([xc, yc]() mutable {
      yc.ensure_grad();
      xc.ensure_grad();
      kernels::active().axpy(1.0, yc.grad().data(), xc.grad().data(),
                             xc.size());
    });
  }
  return y;
}

Tensor reshape(Tape& tape, const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.size())
    throw dim_error("reshape numel mismatch: " + shape_str(x.shape()) +
                    " -> " + shape_str(shape));
  Tensor y = Tensor::from(std::move(shape), x.values());
  if (any_grad(x)) {
    y.set_requires_grad(true);
    Tensor xc = x, yc = y;
    tape.record([xc, yc]() mutable {
      yc.ensure_grad();
      xc.ensure_grad();
      kernels::active().axpy(1.0, yc.grad().data(), xc.grad().data(),
                             xc.size());
    });
  }
  return y;
}

Tensor channel_scale(Tape& tape, const Tensor& x, const Tensor& s) {
  if (x.rank() != 4 || s.rank() != 1 || x.dim(1) != s.dim(0))
    throw dim_error("channel_scale shape mismatch: " + shape_str(x.shape()) +
                    " * " + shape_str(s.shape()));
  const size_t N = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
  Tensor y = Tensor::zeros(x.shape());
  const auto& xv = x.values();
  const auto& sv = s.values();
  auto& yv = y.values();
  for (size_t n = 0; n < N; ++n)
    for (size_t c = 0; c < C; ++c)
      for (size_t k = 0; k < HW; ++k)
        yv[(n * C + c) * HW + k] = xv[(n * C + c) * HW + k] * sv[c];
  check_finite(y, "channel_scale");
  if (any_grad(x, s)) {
    y.set_requires_grad(true);
    Tensor xc = x, sc = s, yc = y;
    tape.record([xc, sc, yc, N, C, HW]() mutable {
      yc.ensure_grad();
      const auto& dy = yc.grad();
      if (xc.requires_grad()) {
        xc.ensure_grad();
        auto& dx = xc.grad();
        const auto& sv = sc.values();
        for (size_t n = 0; n < N; ++n)
          for (size_t c = 0; c < C; ++c)
            for (size_t k = 0; k < HW; ++k)
              dx[(n * C + c) * HW + k] += dy[(n * C + c) * HW + k] * sv[c];
      }
      if (sc.requires_grad()) {
        sc.ensure_grad();
        auto& ds = sc.grad();
        const auto& xv = xc.values();
        for (size_t n = 0; n < N; ++n)
          for (size_t c = 0; c < C; ++c)
            for (size_t k = 0; k < HW; ++k)
              ds[c] += dy[(n * C + c) * HW + k] * xv[(n * C + c) * HW + k];
      }
    });
  }
  return y;
}

CrossEntropyResult softmax_cross_entropy(Tape& tape, const Tensor& logits,
                                         const Tensor& targets) {
  if (logits.rank() != 2 || logits.shape() != targets.shape())
    throw dim_error("softmax_cross_entropy shape mismatch: " +
                    shape_str(logits.shape()) + " vs " +
                    shape_str(targets.shape()));
  const size_t P = logits.dim(0), O = logits.dim(1);
  const auto& lv = logits.values();
  const auto& tv = targets.values();
  for (size_t p = 0; p < P; ++p) {
    double rowsum = 0.0;
    for (size_t o = 0; o < O; ++o) {
      const double t = tv[p * O + o];
      if (t != 0.0 && t != 1.0)
        throw data_error("target row " + std::to_string(p) +
                         " is not one-hot");
      rowsum += t;
    }
    if (rowsum != 1.0)
      throw data_error("target row " + std::to_string(p) + " is not one-hot");
  }
  std::vector<double> logit_grad(P * O);
  double total = 0.0;
  for (size_t p = 0; p < P; ++p) {
    double mx = lv[p * O];
    for (size_t o = 1; o < O; ++o) mx = std::max(mx, lv[p * O + o]);
    double z = 0.0;
    for (size_t o = 0; o < O; ++o) z += std::exp(lv[p * O + o] - mx);
    const double logz = std::log(z);
    for (size_t o = 0; o < O; ++o) {
      const double sm = std::exp(lv[p * O + o] - mx) / z;
      logit_grad[p * O + o] = (sm - tv[p * O + o]) / static_cast<double>(P);
      if (tv[p * O + o] == 1.0) total += -(lv[p * O + o] - mx - logz);
    }
  }
  Tensor loss = Tensor::scalar(total / static_cast<double>(P));
  check_finite(loss, "softmax_cross_entropy");
  if (logits.requires_grad()) {
    loss.set_requires_grad(true);
    Tensor lc = logits, lossc = loss;
    std::vector<double> g = logit_grad;
    tape.record([lc, lossc, g]() mutable {
      lossc.ensure_grad();
      lc.ensure_grad();
      kernels::active().axpy(lossc.grad()[0], g.data(), lc.grad().data(),
                             g.size());
    });
  }
  return {loss, std::move(logit_grad)};
}

double grad_check(const std::function<Tensor(Tape&, Tensor&)>& f, Tensor& x,
                  double h, const std::function<bool(size_t)>& skip) {
  x.set_requires_grad(true);
  x.drop_grad();
  Tape tape;
  Tensor y = f(tape, x);
  if (y.size() != 1) throw usage_error("grad_check requires a scalar function");
  tape.backward(y);
  std::vector<double> analytic =
      x.has_grad() ? x.grad() : std::vector<double>(x.size(), 0.0);

  auto eval = [&](size_t i, double v) {
    const double saved = x.values()[i];
    x.values()[i] = v;
    Tape t2;
    Tensor out = f(t2, x);
    x.values()[i] = saved;
    return out.item();
  };

  double max_err = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    if (skip && skip(i)) continue;
    const double v = x.values()[i];
    const double numeric = (eval(i, v + h) - eval(i, v - h)) / (2.0 * h);
    const double a = analytic[i];
    const double denom = std::max({1.0, std::fabs(a), std::fabs(numeric)});
    max_err = std::max(max_err, std::fabs(a - numeric) / denom);
  }
  return max_err;
}

}  // namespace pb

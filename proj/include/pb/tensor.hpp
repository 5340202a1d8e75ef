#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "pb/errors.hpp"

namespace pb {

enum class Activation { Relu, Tanh, Sigmoid };

Activation activation_from_string(const std::string& s);
std::string activation_name(Activation a);

using Shape = std::vector<size_t>;

std::string shape_str(const Shape& s);
size_t shape_numel(const Shape& s);

// When enabled, every op output is checked for NaN/Inf and a pb::error is
// raised on the first non-finite value.
void set_debug_validation(bool on);
bool debug_validation();

// Dense double-precision array with an optional gradient buffer. Copying a
// Tensor copies the handle; the underlying node is shared. Values are
// treated as immutable once the tensor participates in a tape (grad buffers
// are the only thing backward mutates).
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double v);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  size_t size() const { return node_->value.size(); }
  size_t dim(size_t i) const { return node_->shape[i]; }
  size_t rank() const { return node_->shape.size(); }

  std::vector<double>& values() { return node_->value; }
  const std::vector<double>& values() const { return node_->value; }
  double item() const;

  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool flag);

  bool has_grad() const { return node_ && !node_->grad.empty(); }
  std::vector<double>& grad();
  const std::vector<double>& grad() const;
  void ensure_grad();
  void zero_grad();
  void drop_grad();

  // Value copy with no gradient linkage; used to cut the backward path
  // where dendrites read their presynaptic inputs.
  Tensor detached() const;

  // Node identity (used as a graph key).
  const void* id() const { return node_.get(); }

 private:
  struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // empty until allocated
    bool requires_grad = false;
  };

  explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}

  std::shared_ptr<Node> node_;
};

// Records backward rules during a forward pass; replayed in reverse by
// backward(). Rebuilt per forward pass, no caching.
class Tape {
 public:
  void record(std::function<void()> backward_fn) {
    ops_.push_back(std::move(backward_fn));
  }
  void backward(Tensor& loss);
  void clear() { ops_.clear(); }
  size_t size() const { return ops_.size(); }

 private:
  std::vector<std::function<void()>> ops_;
};

// --- differentiable ops ------------------------------------------------

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor add_bias(Tape& tape, const Tensor& a, const Tensor& b);  // [m,n]+[n]
Tensor add(Tape& tape, const Tensor& a, const Tensor& b);       // same shape
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);       // elementwise
// a[i][j] * s[j] for a [m,n], s [n]
Tensor scale_cols(Tape& tape, const Tensor& a, const Tensor& s);
Tensor activation(Tape& tape, const Tensor& x, Activation kind);
Tensor sum(Tape& tape, const Tensor& x);  // -> scalar

// x [N,C,H,W], w [O,C,3,3], b [O]; zero padding
Tensor conv2d(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& b,
              size_t stride, size_t pad);
Tensor global_avg_pool(Tape& tape, const Tensor& x);  // [N,C,H,W] -> [N,C]
Tensor flatten(Tape& tape, const Tensor& x);          // [N,...] -> [N,prod]
Tensor reshape(Tape& tape, const Tensor& x, Shape shape);  // same numel
// x [N,O,H,W] scaled per channel by s [O]
Tensor channel_scale(Tape& tape, const Tensor& x, const Tensor& s);

struct CrossEntropyResult {
  Tensor loss;                    // scalar, on tape
  std::vector<double> logit_grad; // (softmax - targets)/P, row-major [P,O]
};

// targets must be one-hot rows. The logit gradient doubles as the residual
// error matrix consumed by the dendrite engine.
CrossEntropyResult softmax_cross_entropy(Tape& tape, const Tensor& logits,
                                         const Tensor& targets);

// --- finite-difference oracle -----------------------------------------

// Central-difference check of d f / d x. f must be deterministic and
// scalar-valued. skip(i) excludes coordinates (e.g. near a relu kink).
// Returns max_i |analytic - numeric| / max(1, |analytic|, |numeric|).
double grad_check(const std::function<Tensor(Tape&, Tensor&)>& f, Tensor& x,
                  double h,
                  const std::function<bool(size_t)>& skip = nullptr);

}  // namespace pb

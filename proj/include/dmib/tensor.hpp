#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "dmib/error.hpp"
#include "dmib/rng.hpp"

namespace dmib {

using Shape = std::vector<std::size_t>;

struct TensorData {
  Shape shape;
  std::vector<double> values;  // row-major
  bool requires_grad = false;
  std::vector<double> grad;  // empty until backward touches it, then values.size()
};

// Shared handle to a dense row-major array of doubles. Forward operations
// never mutate an existing tensor; grad is accumulated in place by backward,
// and values may be rewritten between steps by an optimizer.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(d_); }
  const Shape& shape() const { return d_->shape; }
  std::size_t size() const { return d_->values.size(); }
  std::size_t rows() const;  // 2-d only
  std::size_t cols() const;  // 2-d only
  bool is_scalar() const { return d_->values.size() == 1 && d_->shape.size() <= 1; }

  const std::vector<double>& values() const { return d_->values; }
  std::vector<double>& mutable_values() { return d_->values; }
  double item() const;  // scalar only
  double at(std::size_t r, std::size_t c) const { return d_->values[r * cols() + c]; }

  bool requires_grad() const { return d_->requires_grad; }
  void set_requires_grad(bool v) { d_->requires_grad = v; }
  bool has_grad() const { return !d_->grad.empty(); }
  const std::vector<double>& grad() const;
  void zero_grad() { d_->grad.clear(); }

  const std::shared_ptr<TensorData>& ptr() const { return d_; }

 private:
  std::shared_ptr<TensorData> d_;
};

// Records one node per forward operation, in execution order, so the list is
// already topologically sorted. backward() walks it once in reverse.
class Tape {
 public:
  using BackwardFn = std::function<void(const std::vector<double>& out_grad)>;

  void record(std::shared_ptr<TensorData> out, BackwardFn backward);

  // Seeds d(loss)/d(loss) = 1 and propagates to every tensor reachable from
  // the loss node. Grads accumulate across repeated calls until zero_grad()
  // or clear(); callers that want fresh gradients must reset first.
  void backward(const Tensor& loss);

  void clear() { nodes_.clear(); }
  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    std::shared_ptr<TensorData> out;
    BackwardFn back;
  };
  std::vector<Node> nodes_;
};

// Resizes the grad buffer on first touch, then accumulates.
void accum_grad(TensorData& t, std::size_t index, double value);

// --- differentiable operations -------------------------------------------

// [r x k] . [k x c] -> [r x c]
Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);

// x: [batch x n], bias: [1 x n] or [n]; adds bias to every row.
Tensor add_rowvec(Tape& tape, const Tensor& x, const Tensor& bias);

Tensor add(Tape& tape, const Tensor& a, const Tensor& b);  // same shape
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);  // elementwise
Tensor scale(Tape& tape, const Tensor& x, double c);
Tensor sum(Tape& tape, const Tensor& x);  // all elements -> scalar

Tensor relu(Tape& tape, const Tensor& x);

// Inverted dropout: in training each element survives with probability
// 1 - rate and is scaled by 1/(1 - rate); eval mode (or rate 0) is exactly
// the identity and consumes no draws.
Tensor dropout(Tape& tape, const Tensor& x, double rate, RngState& rng, bool training);

// Row-wise softmax with max subtraction; logits: [batch x C], C >= 2.
Tensor softmax(Tape& tape, const Tensor& logits);

// Mean over the batch of -log softmax(logits)[label].
Tensor cross_entropy(Tape& tape, const Tensor& logits, const std::vector<int>& labels);

// Mean over the batch of sum_c p_c log(p_c / q_c), rows of p and q must be
// probability vectors; 0 log(0/q) = 0 and q is clamped below at 1e-12.
Tensor kl_div(Tape& tape, const Tensor& p, const Tensor& q);

// Column-wise concatenation of same-height matrices.
Tensor hconcat(Tape& tape, const std::vector<Tensor>& xs);

// Widens [batch x w] to [batch x d] by repeating each column ceil(d/w) times
// and truncating to d. w == d passes through; w > d is an error.
Tensor upsample_width(Tape& tape, const Tensor& x, std::size_t d);

// Copy with the graph connection severed.
Tensor detach(const Tensor& x);

// --- gradient verification -------------------------------------------------

using TensorProgram = std::function<Tensor(Tape&, std::vector<Tensor>&)>;

// Compares analytic gradients against central finite differences and returns
// the max over all input elements of |analytic - numeric| /
// max(1, |analytic|, |numeric|). fn must be a deterministic scalar program.
double grad_check(const TensorProgram& fn, std::vector<Tensor> inputs, double eps);

}  // namespace dmib

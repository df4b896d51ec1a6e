#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "fern/tensor.hpp"

namespace fern::num {

// Reverse-mode automatic differentiation over a define-by-run tape.
//
// Lifecycle: record ops, call backward(loss) once, read grad(id), then
// reset() (or destroy the tape) before recording the next step. Calling
// backward a second time without recording new ops is an error. Values stay
// readable after backward.
//
// Every op validates shapes, runs in deterministic element order, and checks
// that its output is finite; a NaN or Inf raises immediately with the op
// name. Broadcasting is limited to the leading batch dimension: the second
// operand of add/sub may be a single row, and row_scale stretches a [B,1]
// column across [B,n]. Nothing else broadcasts.
//
// A tape is single-writer. Independent tapes never share state, so separate
// threads may each run their own.
class Tape {
 public:
  using Id = std::int32_t;

  // Differentiable input; grad(id) is populated by backward.
  Id leaf(Tensor value);
  // Constant input; no gradient is tracked through it.
  Id input(Tensor value);

  Id matmul(Id a, Id b);
  Id add(Id a, Id b);
  Id sub(Id a, Id b);
  Id mul(Id a, Id b);
  Id scale(Id a, double c);
  Id offset(Id a, double c);
  Id tanh(Id a);
  Id softplus(Id a);
  Id sqrt(Id a);
  Id reciprocal(Id a);
  Id sum(Id a);
  Id mean(Id a);
  Id row_sum(Id a);
  Id row_scale(Id c, Id a);
  Id slice_cols(Id a, std::size_t start, std::size_t len);
  Id concat_cols(std::span<const Id> parts);
  // Treats consecutive entries of the last dimension as complex pairs and
  // multiplies (s, x) pointwise as complex numbers. An odd trailing entry is
  // scaled plainly.
  Id pair_mul(Id s, Id x);
  // Mean-reduced Huber loss with threshold delta.
  Id huber(Id pred, Id target, double delta);

  // m + w * tanh((x - m) / w) with m the midpoint and w the half-width of
  // [lo, hi]. Composite of primitive ops, so it differentiates for free.
  Id softclamp(Id a, double lo, double hi);

  const Tensor& value(Id id) const;
  const Tensor& grad(Id id) const;

  void backward(Id loss);
  void reset();
  std::size_t node_count() const { return nodes_.size(); }

 private:
  enum class Op : std::uint8_t {
    kLeaf,
    kInput,
    kMatMul,
    kAdd,
    kSub,
    kMul,
    kScale,
    kOffset,
    kTanh,
    kSoftplus,
    kSqrt,
    kReciprocal,
    kSum,
    kMean,
    kRowSum,
    kRowScale,
    kSliceCols,
    kConcatCols,
    kPairMul,
    kHuber,
  };

  struct Node {
    Op op;
    Tensor value;
    Tensor grad;
    std::vector<Id> args;
    double c0 = 0.0;
    std::size_t s0 = 0;
    std::size_t s1 = 0;
    bool requires_grad = false;
  };

  Id push(Node node);
  const Node& node(Id id) const;
  bool any_requires(std::span<const Id> args) const;
  void backstep(Node& n);

  std::vector<Node> nodes_;
  bool backward_available_ = false;
  bool grads_valid_ = false;
};

// Compares the tape gradient of a scalar-valued function against central
// finite differences of step h, returning
//   max_i |analytic_i - numeric_i| / (|analytic_i| + 1e-12).
// The callback receives a fresh tape and the id of the point leaf and must
// return the id of a scalar output.
double grad_check(const std::function<Tape::Id(Tape&, Tape::Id)>& f,
                  const Tensor& point, double h = 1e-6);

}  // namespace fern::num

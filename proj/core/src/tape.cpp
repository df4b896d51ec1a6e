#include "fern/tape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace fern::num {

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus_stable(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

[[noreturn]] void fail(const char* op, const std::string& what) {
  throw std::invalid_argument(std::string("tape: ") + op + ": " + what);
}

void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2) fail(op, "expected a rank-2 tensor");
}

}  // namespace

Tape::Id Tape::push(Node n) {
  if (!n.value.all_finite()) {
    fail("push", "op produced a non-finite value");
  }
  nodes_.push_back(std::move(n));
  backward_available_ = true;
  grads_valid_ = false;
  return static_cast<Id>(nodes_.size() - 1);
}

const Tape::Node& Tape::node(Id id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size()) {
    throw std::out_of_range("tape: bad node id");
  }
  return nodes_[static_cast<std::size_t>(id)];
}

bool Tape::any_requires(std::span<const Id> args) const {
  for (Id a : args) {
    if (node(a).requires_grad) return true;
  }
  return false;
}

Tape::Id Tape::leaf(Tensor value) {
  Node n{Op::kLeaf, std::move(value), {}, {}, 0.0, 0, 0, true};
  return push(std::move(n));
}

Tape::Id Tape::input(Tensor value) {
  Node n{Op::kInput, std::move(value), {}, {}, 0.0, 0, 0, false};
  return push(std::move(n));
}

Tape::Id Tape::matmul(Id a, Id b) {
  const Tensor& A = node(a).value;
  const Tensor& B = node(b).value;
  require_rank2(A, "matmul");
  require_rank2(B, "matmul");
  if (A.cols() != B.rows()) fail("matmul", "inner dimensions differ");
  const std::size_t m = A.rows(), k = A.cols(), p = B.cols();
  Tensor C({m, p});
  const double* pa = A.data();
  const double* pb = B.data();
  double* pc = C.data();
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = pa + i * k;
    double* ci = pc + i * p;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double aik = ai[kk];
      const double* bk = pb + kk * p;
      for (std::size_t j = 0; j < p; ++j) ci[j] += aik * bk[j];
    }
  }
  Node n{Op::kMatMul, std::move(C), {}, {a, b}, 0.0, 0, 0, false};
  n.requires_grad = any_requires(n.args);
  return push(std::move(n));
}

namespace {

enum class BroadcastKind { kNone, kRow };

BroadcastKind classify_add(const Tensor& a, const Tensor& b, const char* op) {
  if (a.same_shape(b)) return BroadcastKind::kNone;
  if (a.rank() == 2) {
    const std::size_t n = a.cols();
    if (b.rank() == 1 && b.size() == n) return BroadcastKind::kRow;
    if (b.rank() == 2 && b.rows() == 1 && b.cols() == n) {
      return BroadcastKind::kRow;
    }
  }
  fail(op, "shapes incompatible (only a single-row second operand broadcasts)");
}

}  // namespace

Tape::Id Tape::add(Id a, Id b) {
  const Tensor& A = node(a).value;
  const Tensor& B = node(b).value;
  const BroadcastKind bk = classify_add(A, B, "add");
  Tensor C = A;
  if (bk == BroadcastKind::kNone) {
    for (std::size_t i = 0; i < C.size(); ++i) C[i] += B[i];
  } else {
    const std::size_t rows = A.rows(), cols = A.cols();
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) C[i * cols + j] += B[j];
  }
  Node n{Op::kAdd, std::move(C), {}, {a, b}, 0.0, 0, 0, false};
  n.requires_grad = any_requires(n.args);
  return push(std::move(n));
}

Tape::Id Tape::sub(Id a, Id b) {
  const Tensor& A = node(a).value;
  const Tensor& B = node(b).value;
  const BroadcastKind bk = classify_add(A, B, "sub");
  Tensor C = A;
  if (bk == BroadcastKind::kNone) {
    for (std::size_t i = 0; i < C.size(); ++i) C[i] -= B[i];
  } else {
    const std::size_t rows = A.rows(), cols = A.cols();
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) C[i * cols + j] -= B[j];
  }
  Node n{Op::kSub, std::move(C), {}, {a, b}, 0.0, 0, 0, false};
  n.requires_grad = any_requires(n.args);
  return push(std::move(n));
}

Tape::Id Tape::mul(Id a, Id b) {
  const Tensor& A = node(a).value;
  const Tensor& B = node(b).value;
  if (!A.same_shape(B)) fail("mul", "shapes differ");
  Tensor C = A;
  for (std::size_t i = 0; i < C.size(); ++i) C[i] *= B[i];
  Node n{Op::kMul, std::move(C), {}, {a, b}, 0.0, 0, 0, false};
  n.requires_grad = any_requires(n.args);
  return push(std::move(n));
}

Tape::Id Tape::scale(Id a, double c) {
  Tensor C = node(a).value;
  for (std::size_t i = 0; i < C.size(); ++i) C[i] *= c;
  Node n{Op::kScale, std::move(C), {}, {a}, c, 0, 0, node(a).requires_grad};
  return push(std::move(n));
}

Tape::Id Tape::offset(Id a, double c) {
  Tensor C = node(a).value;
  for (std::size_t i = 0; i < C.size(); ++i) C[i] += c;
  Node n{Op::kOffset, std::move(C), {}, {a}, c, 0, 0, node(a).requires_grad};
  return push(std::move(n));
}

Tape::Id Tape::tanh(Id a) {
  Tensor C = node(a).value;
  for (std::size_t i = 0; i < C.size(); ++i) C[i] = std::tanh(C[i]);
  Node n{Op::kTanh, std::move(C), {}, {a}, 0.0, 0, 0, node(a).requires_grad};
  return push(std::move(n));
}

Tape::Id Tape::softplus(Id a) {
  Tensor C = node(a).value;
  for (std::size_t i = 0; i < C.size(); ++i) C[i] = softplus_stable(C[i]);
  Node n{Op::kSoftplus, std::move(C), {}, {a}, 0.0, 0, 0,
         node(a).requires_grad};
  return push(std::move(n));
}

Tape::Id Tape::sqrt(Id a) {
  Tensor C = node(a).value;
  for (std::size_t i = 0; i < C.size(); ++i) C[i] = std::sqrt(C[i]);
  Node n{Op::kSqrt, std::move(C), {}, {a}, 0.0, 0, 0, node(a).requires_grad};
  return push(std::move(n));
}

Tape::Id Tape::reciprocal(Id a) {
  Tensor C = node(a).value;
  for (std::size_t i = 0; i < C.size(); ++i) C[i] = 1.0 / C[i];
  Node n{Op::kReciprocal, std::move(C), {}, {a}, 0.0, 0, 0,
         node(a).requires_grad};
  return push(std::move(n));
}

Tape::Id Tape::sum(Id a) {
  const Tensor& A = node(a).value;
  double acc = 0.0;
  for (std::size_t i = 0; i < A.size(); ++i) acc += A[i];
  Node n{Op::kSum, Tensor::scalar(acc), {}, {a}, 0.0, 0, 0,
         node(a).requires_grad};
  return push(std::move(n));
}

Tape::Id Tape::mean(Id a) {
  const Tensor& A = node(a).value;
  if (A.size() == 0) fail("mean", "empty tensor");
  double acc = 0.0;
  for (std::size_t i = 0; i < A.size(); ++i) acc += A[i];
  Node n{Op::kMean, Tensor::scalar(acc / static_cast<double>(A.size())),
         {},      {a},
         0.0,     0,
         0,       node(a).requires_grad};
  return push(std::move(n));
}

Tape::Id Tape::row_sum(Id a) {
  const Tensor& A = node(a).value;
  require_rank2(A, "row_sum");
  const std::size_t rows = A.rows(), cols = A.cols();
  Tensor C({rows, 1});
  for (std::size_t i = 0; i < rows; ++i) {
    double acc = 0.0;
    const double* ai = A.data() + i * cols;
    for (std::size_t j = 0; j < cols; ++j) acc += ai[j];
    C[i] = acc;
  }
  Node n{Op::kRowSum, std::move(C), {}, {a}, 0.0, 0, 0,
         node(a).requires_grad};
  return push(std::move(n));
}

Tape::Id Tape::row_scale(Id c, Id a) {
  const Tensor& Cv = node(c).value;
  const Tensor& A = node(a).value;
  require_rank2(A, "row_scale");
  if (Cv.rank() != 2 || Cv.cols() != 1 || Cv.rows() != A.rows()) {
    fail("row_scale", "first operand must be a [rows,1] column");
  }
  const std::size_t rows = A.rows(), cols = A.cols();
  Tensor Y({rows, cols});
  for (std::size_t i = 0; i < rows; ++i) {
    const double ci = Cv[i];
    const double* ai = A.data() + i * cols;
    double* yi = Y.data() + i * cols;
    for (std::size_t j = 0; j < cols; ++j) yi[j] = ci * ai[j];
  }
  Node n{Op::kRowScale, std::move(Y), {}, {c, a}, 0.0, 0, 0, false};
  n.requires_grad = any_requires(n.args);
  return push(std::move(n));
}

Tape::Id Tape::slice_cols(Id a, std::size_t start, std::size_t len) {
  const Tensor& A = node(a).value;
  if (A.rank() == 1) {
    if (start + len > A.size()) fail("slice_cols", "slice out of range");
    Tensor Y({len});
    for (std::size_t j = 0; j < len; ++j) Y[j] = A[start + j];
    Node n{Op::kSliceCols, std::move(Y), {}, {a}, 0.0, start, len,
           node(a).requires_grad};
    return push(std::move(n));
  }
  require_rank2(A, "slice_cols");
  if (start + len > A.cols()) fail("slice_cols", "slice out of range");
  const std::size_t rows = A.rows(), cols = A.cols();
  Tensor Y({rows, len});
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < len; ++j) Y[i * len + j] = A[i * cols + start + j];
  Node n{Op::kSliceCols, std::move(Y), {}, {a}, 0.0, start, len,
         node(a).requires_grad};
  return push(std::move(n));
}

Tape::Id Tape::concat_cols(std::span<const Id> parts) {
  if (parts.empty()) fail("concat_cols", "nothing to concatenate");
  const Tensor& first = node(parts[0]).value;
  const std::size_t rank = first.rank();
  if (rank != 1 && rank != 2) fail("concat_cols", "expected rank 1 or 2");
  const std::size_t rows = rank == 2 ? first.rows() : 1;
  std::size_t total = 0;
  for (Id p : parts) {
    const Tensor& t = node(p).value;
    if (t.rank() != rank || (rank == 2 && t.rows() != rows)) {
      fail("concat_cols", "parts disagree on shape");
    }
    total += rank == 2 ? t.cols() : t.size();
  }
  Tensor Y(rank == 2 ? std::vector<std::size_t>{rows, total}
                     : std::vector<std::size_t>{total});
  std::size_t off = 0;
  for (Id p : parts) {
    const Tensor& t = node(p).value;
    const std::size_t c = rank == 2 ? t.cols() : t.size();
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < c; ++j)
        Y[i * total + off + j] = t[i * c + j];
    off += c;
  }
  Node n{Op::kConcatCols, std::move(Y),
         {}, std::vector<Id>(parts.begin(), parts.end()),
         0.0, 0, 0, false};
  n.requires_grad = any_requires(n.args);
  return push(std::move(n));
}

Tape::Id Tape::pair_mul(Id s, Id x) {
  const Tensor& S = node(s).value;
  const Tensor& X = node(x).value;
  if (!S.same_shape(X)) fail("pair_mul", "shapes differ");
  const std::size_t cols = S.rank() == 2 ? S.cols() : S.size();
  const std::size_t rows = S.rank() == 2 ? S.rows() : 1;
  Tensor Y = S;
  for (std::size_t i = 0; i < rows; ++i) {
    const double* si = S.data() + i * cols;
    const double* xi = X.data() + i * cols;
    double* yi = Y.data() + i * cols;
    std::size_t j = 0;
    for (; j + 1 < cols; j += 2) {
      yi[j] = si[j] * xi[j] - si[j + 1] * xi[j + 1];
      yi[j + 1] = si[j + 1] * xi[j] + si[j] * xi[j + 1];
    }
    if (j < cols) yi[j] = si[j] * xi[j];
  }
  Node n{Op::kPairMul, std::move(Y), {}, {s, x}, 0.0, 0, 0, false};
  n.requires_grad = any_requires(n.args);
  return push(std::move(n));
}

Tape::Id Tape::huber(Id pred, Id target, double delta) {
  const Tensor& P = node(pred).value;
  const Tensor& T = node(target).value;
  if (!P.same_shape(T)) fail("huber", "shapes differ");
  if (delta <= 0.0) fail("huber", "delta must be positive");
  if (P.size() == 0) fail("huber", "empty tensor");
  double acc = 0.0;
  for (std::size_t i = 0; i < P.size(); ++i) {
    const double e = P[i] - T[i];
    const double a = std::abs(e);
    acc += a <= delta ? 0.5 * e * e : delta * (a - 0.5 * delta);
  }
  Node n{Op::kHuber,
         Tensor::scalar(acc / static_cast<double>(P.size())),
         {},
         {pred, target},
         delta,
         0,
         0,
         false};
  n.requires_grad = any_requires(n.args);
  return push(std::move(n));
}

Tape::Id Tape::softclamp(Id a, double lo, double hi) {
  if (!(hi > lo)) fail("softclamp", "need hi > lo");
  const double m = 0.5 * (lo + hi);
  const double w = 0.5 * (hi - lo);
  return offset(scale(tanh(scale(offset(a, -m), 1.0 / w)), w), m);
}

const Tensor& Tape::value(Id id) const { return node(id).value; }

const Tensor& Tape::grad(Id id) const {
  if (!grads_valid_) {
    throw std::logic_error("tape: grad read before backward");
  }
  return node(id).grad;
}

void Tape::backward(Id loss) {
  if (!backward_available_) {
    throw std::logic_error(
        "tape: backward called twice without recording new ops");
  }
  const Node& top = node(loss);
  if (top.value.size() != 1) {
    throw std::logic_error("tape: backward needs a scalar loss");
  }
  for (Node& n : nodes_) {
    n.grad = Tensor(n.value.shape());
  }
  nodes_[static_cast<std::size_t>(loss)].grad[0] = 1.0;
  for (Id id = loss; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.requires_grad || n.args.empty()) continue;
    backstep(n);
  }
  backward_available_ = false;
  grads_valid_ = true;
}

void Tape::backstep(Node& n) {
  const Tensor& g = n.grad;
  auto arg_value = [&](std::size_t i) -> const Tensor& {
    return nodes_[static_cast<std::size_t>(n.args[i])].value;
  };
  auto arg_grad = [&](std::size_t i) -> Tensor& {
    return nodes_[static_cast<std::size_t>(n.args[i])].grad;
  };
  auto arg_requires = [&](std::size_t i) {
    return nodes_[static_cast<std::size_t>(n.args[i])].requires_grad;
  };

  switch (n.op) {
    case Op::kLeaf:
    case Op::kInput:
      break;
    case Op::kMatMul: {
      const Tensor& A = arg_value(0);
      const Tensor& B = arg_value(1);
      const std::size_t m = A.rows(), k = A.cols(), p = B.cols();
      if (arg_requires(0)) {
        Tensor& ga = arg_grad(0);
        for (std::size_t i = 0; i < m; ++i) {
          const double* gi = g.data() + i * p;
          double* gai = ga.data() + i * k;
          for (std::size_t kk = 0; kk < k; ++kk) {
            const double* bk = B.data() + kk * p;
            double acc = 0.0;
            for (std::size_t j = 0; j < p; ++j) acc += gi[j] * bk[j];
            gai[kk] += acc;
          }
        }
      }
      if (arg_requires(1)) {
        Tensor& gb = arg_grad(1);
        for (std::size_t i = 0; i < m; ++i) {
          const double* ai = A.data() + i * k;
          const double* gi = g.data() + i * p;
          for (std::size_t kk = 0; kk < k; ++kk) {
            const double aik = ai[kk];
            double* gbk = gb.data() + kk * p;
            for (std::size_t j = 0; j < p; ++j) gbk[j] += aik * gi[j];
          }
        }
      }
      break;
    }
    case Op::kAdd:
    case Op::kSub: {
      const double sign = n.op == Op::kAdd ? 1.0 : -1.0;
      if (arg_requires(0)) {
        Tensor& ga = arg_grad(0);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (arg_requires(1)) {
        Tensor& gb = arg_grad(1);
        if (gb.same_shape(g)) {
          for (std::size_t i = 0; i < g.size(); ++i) gb[i] += sign * g[i];
        } else {
          const std::size_t rows = n.value.rows(), cols = n.value.cols();
          for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < cols; ++j)
              gb[j] += sign * g[i * cols + j];
        }
      }
      break;
    }
    case Op::kMul: {
      const Tensor& A = arg_value(0);
      const Tensor& B = arg_value(1);
      if (arg_requires(0)) {
        Tensor& ga = arg_grad(0);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * B[i];
      }
      if (arg_requires(1)) {
        Tensor& gb = arg_grad(1);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * A[i];
      }
      break;
    }
    case Op::kScale: {
      Tensor& ga = arg_grad(0);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += n.c0 * g[i];
      break;
    }
    case Op::kOffset: {
      Tensor& ga = arg_grad(0);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      break;
    }
    case Op::kTanh: {
      Tensor& ga = arg_grad(0);
      const Tensor& y = n.value;
      for (std::size_t i = 0; i < g.size(); ++i)
        ga[i] += g[i] * (1.0 - y[i] * y[i]);
      break;
    }
    case Op::kSoftplus: {
      Tensor& ga = arg_grad(0);
      const Tensor& x = arg_value(0);
      for (std::size_t i = 0; i < g.size(); ++i)
        ga[i] += g[i] * sigmoid(x[i]);
      break;
    }
    case Op::kSqrt: {
      Tensor& ga = arg_grad(0);
      const Tensor& y = n.value;
      for (std::size_t i = 0; i < g.size(); ++i)
        ga[i] += g[i] * 0.5 / y[i];
      break;
    }
    case Op::kReciprocal: {
      Tensor& ga = arg_grad(0);
      const Tensor& y = n.value;
      for (std::size_t i = 0; i < g.size(); ++i)
        ga[i] -= g[i] * y[i] * y[i];
      break;
    }
    case Op::kSum: {
      Tensor& ga = arg_grad(0);
      const double g0 = g[0];
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g0;
      break;
    }
    case Op::kMean: {
      Tensor& ga = arg_grad(0);
      const double g0 = g[0] / static_cast<double>(ga.size());
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g0;
      break;
    }
    case Op::kRowSum: {
      Tensor& ga = arg_grad(0);
      const std::size_t rows = ga.rows(), cols = ga.cols();
      for (std::size_t i = 0; i < rows; ++i) {
        const double gi = g[i];
        double* gai = ga.data() + i * cols;
        for (std::size_t j = 0; j < cols; ++j) gai[j] += gi;
      }
      break;
    }
    case Op::kRowScale: {
      const Tensor& Cv = arg_value(0);
      const Tensor& A = arg_value(1);
      const std::size_t rows = A.rows(), cols = A.cols();
      if (arg_requires(0)) {
        Tensor& gc = arg_grad(0);
        for (std::size_t i = 0; i < rows; ++i) {
          const double* gi = g.data() + i * cols;
          const double* ai = A.data() + i * cols;
          double acc = 0.0;
          for (std::size_t j = 0; j < cols; ++j) acc += gi[j] * ai[j];
          gc[i] += acc;
        }
      }
      if (arg_requires(1)) {
        Tensor& ga = arg_grad(1);
        for (std::size_t i = 0; i < rows; ++i) {
          const double ci = Cv[i];
          const double* gi = g.data() + i * cols;
          double* gai = ga.data() + i * cols;
          for (std::size_t j = 0; j < cols; ++j) gai[j] += ci * gi[j];
        }
      }
      break;
    }
    case Op::kSliceCols: {
      Tensor& ga = arg_grad(0);
      const std::size_t start = n.s0, len = n.s1;
      if (ga.rank() == 1) {
        for (std::size_t j = 0; j < len; ++j) ga[start + j] += g[j];
      } else {
        const std::size_t rows = ga.rows(), cols = ga.cols();
        for (std::size_t i = 0; i < rows; ++i)
          for (std::size_t j = 0; j < len; ++j)
            ga[i * cols + start + j] += g[i * len + j];
      }
      break;
    }
    case Op::kConcatCols: {
      const std::size_t rank = n.value.rank();
      const std::size_t rows = rank == 2 ? n.value.rows() : 1;
      const std::size_t total = rank == 2 ? n.value.cols() : n.value.size();
      std::size_t off = 0;
      for (std::size_t a = 0; a < n.args.size(); ++a) {
        const Tensor& part = arg_value(a);
        const std::size_t c = rank == 2 ? part.cols() : part.size();
        if (arg_requires(a)) {
          Tensor& gp = arg_grad(a);
          for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < c; ++j)
              gp[i * c + j] += g[i * total + off + j];
        }
        off += c;
      }
      break;
    }
    case Op::kPairMul: {
      const Tensor& S = arg_value(0);
      const Tensor& X = arg_value(1);
      const std::size_t cols = S.rank() == 2 ? S.cols() : S.size();
      const std::size_t rows = S.rank() == 2 ? S.rows() : 1;
      for (std::size_t i = 0; i < rows; ++i) {
        const double* si = S.data() + i * cols;
        const double* xi = X.data() + i * cols;
        const double* gi = g.data() + i * cols;
        std::size_t j = 0;
        for (; j + 1 < cols; j += 2) {
          if (arg_requires(0)) {
            Tensor& gs = arg_grad(0);
            gs[i * cols + j] += gi[j] * xi[j] + gi[j + 1] * xi[j + 1];
            gs[i * cols + j + 1] +=
                -gi[j] * xi[j + 1] + gi[j + 1] * xi[j];
          }
          if (arg_requires(1)) {
            Tensor& gx = arg_grad(1);
            gx[i * cols + j] += gi[j] * si[j] + gi[j + 1] * si[j + 1];
            gx[i * cols + j + 1] +=
                -gi[j] * si[j + 1] + gi[j + 1] * si[j];
          }
        }
        if (j < cols) {
          if (arg_requires(0)) arg_grad(0)[i * cols + j] += gi[j] * xi[j];
          if (arg_requires(1)) arg_grad(1)[i * cols + j] += gi[j] * si[j];
        }
      }
      break;
    }
    case Op::kHuber: {
      const Tensor& P = arg_value(0);
      const Tensor& T = arg_value(1);
      const double delta = n.c0;
      const double g0 = g[0] / static_cast<double>(P.size());
      for (std::size_t i = 0; i < P.size(); ++i) {
        const double e = P[i] - T[i];
        const double d = std::clamp(e, -delta, delta) * g0;
        if (arg_requires(0)) arg_grad(0)[i] += d;
        if (arg_requires(1)) arg_grad(1)[i] -= d;
      }
      break;
    }
  }
}

void Tape::reset() {
  nodes_.clear();
  backward_available_ = false;
  grads_valid_ = false;
}

double grad_check(const std::function<Tape::Id(Tape&, Tape::Id)>& f,
                  const Tensor& point, double h) {
  Tape tape;
  const Tape::Id x = tape.leaf(point);
  const Tape::Id y = f(tape, x);
  if (tape.value(y).size() != 1) {
    throw std::invalid_argument("grad_check: function must return a scalar");
  }
  tape.backward(y);
  const Tensor analytic = tape.grad(x);

  auto eval = [&](const Tensor& at) {
    Tape t;
    const Tape::Id xi = t.leaf(at);
    return t.value(f(t, xi))[0];
  };

  double worst = 0.0;
  Tensor probe = point;
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + h;
    const double up = eval(probe);
    probe[i] = orig - h;
    const double down = eval(probe);
    probe[i] = orig;
    const double numeric = (up - down) / (2.0 * h);
    const double rel =
        std::abs(analytic[i] - numeric) / (std::abs(analytic[i]) + 1e-12);
    worst = std::max(worst, rel);
  }
  return worst;
}

}  // namespace fern::num

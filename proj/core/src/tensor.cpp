#include "lidcd/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <memory>

#include "lidcd/special.hpp"

namespace lidcd::ad {

namespace {

void check_finite(const char* op, const std::vector<double>& v) {
  for (double x : v) {
    if (!std::isfinite(x))
      throw NonFiniteError(std::string("non-finite output of '") + op + "'");
  }
}

Tape& same_tape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.defined() || !b.defined())
    throw ShapeError(std::string(op) + ": undefined tensor");
  if (a.tape() != b.tape())
    throw ShapeError(std::string(op) + ": tensors from different tapes");
  return *a.tape();
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError(std::string(op) + ": shape mismatch (" +
                     std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                     " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()) + ")");
}

double stable_softplus(double x) {
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

double sigmoid_scalar(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

// ---- Tensor ----

int Tensor::rows() const { return tape_->node(id_).rows; }
int Tensor::cols() const { return tape_->node(id_).cols; }
bool Tensor::requires_grad() const { return tape_->node(id_).requires_grad; }
const std::vector<double>& Tensor::values() const { return tape_->node(id_).val; }

const std::vector<double>& Tensor::grad() const {
  const Tape::Node& n = tape_->node(id_);
  if (!n.requires_grad)
    throw std::logic_error("Tensor::grad: node does not require gradients");
  return n.grad;
}

double Tensor::scalar() const {
  if (size() != 1) throw ShapeError("Tensor::scalar: not a 1x1 tensor");
  return values()[0];
}

double Tensor::at(int i, int j) const {
  if (i < 0 || i >= rows() || j < 0 || j >= cols())
    throw ShapeError("Tensor::at: index out of range");
  return values()[static_cast<std::size_t>(i) * cols() + j];
}

// ---- Tape ----

Tensor Tape::make(const char* op, int rows, int cols, std::vector<double> values,
                  bool requires_grad) {
  if (rows <= 0 || cols <= 0)
    throw ShapeError(std::string(op) + ": non-positive dimensions");
  if (values.size() != static_cast<std::size_t>(rows) * cols)
    throw ShapeError(std::string(op) + ": value count does not match shape");
  check_finite(op, values);
  Node n;
  n.rows = rows;
  n.cols = cols;
  n.val = std::move(values);
  n.requires_grad = requires_grad;
  if (requires_grad) n.grad.assign(n.val.size(), 0.0);
  nodes_.push_back(std::move(n));
  return Tensor(this, static_cast<int>(nodes_.size()) - 1);
}

void Tape::set_backward(int id, std::function<void(Tape&)> fn) {
  nodes_[static_cast<std::size_t>(id)].backward = std::move(fn);
}

Tensor Tape::constant(int rows, int cols, std::vector<double> values) {
  return make("constant", rows, cols, std::move(values), false);
}

Tensor Tape::constant_scalar(double v) { return make("constant", 1, 1, {v}, false); }

Tensor Tape::zeros(int rows, int cols) {
  return make("zeros", rows, cols, std::vector<double>(static_cast<std::size_t>(rows) * cols, 0.0), false);
}

Tensor Tape::ones(int rows, int cols) {
  return make("ones", rows, cols, std::vector<double>(static_cast<std::size_t>(rows) * cols, 1.0), false);
}

Tensor Tape::full(int rows, int cols, double v) {
  return make("full", rows, cols, std::vector<double>(static_cast<std::size_t>(rows) * cols, v), false);
}

Tensor Tape::eye(int d) {
  std::vector<double> v(static_cast<std::size_t>(d) * d, 0.0);
  for (int i = 0; i < d; ++i) v[static_cast<std::size_t>(i) * d + i] = 1.0;
  return make("eye", d, d, std::move(v), false);
}

Tensor Tape::leaf(int rows, int cols, std::vector<double> values) {
  return make("leaf", rows, cols, std::move(values), true);
}

void Tape::backward(const Tensor& loss) {
  if (loss.tape() != this) throw std::logic_error("backward: loss from another tape");
  if (loss.size() != 1) throw ShapeError("backward: loss must be scalar");
  if (backward_done_)
    throw std::logic_error("backward: called twice without reset");
  if (!loss.requires_grad())
    throw std::logic_error("backward: loss does not depend on any leaf");
  backward_done_ = true;
  nodes_[static_cast<std::size_t>(loss.id())].grad[0] = 1.0;
  for (int id = loss.id(); id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.requires_grad && n.backward) n.backward(*this);
  }
}

void Tape::reset() {
  nodes_.clear();
  backward_done_ = false;
}

// ---- op helpers ----

namespace {

using BackwardFn = std::function<void(Tape&)>;

// Unary elementwise op with derivative computed from input and output values.
template <typename Fwd, typename Bwd>
Tensor unary_op(const char* name, const Tensor& x, Fwd fwd, Bwd dfn) {
  Tape& t = *x.tape();
  const std::vector<double>& vx = x.values();
  std::vector<double> out(vx.size());
  for (std::size_t i = 0; i < vx.size(); ++i) out[i] = fwd(vx[i]);
  Tensor o = t.make(name, x.rows(), x.cols(), std::move(out), x.requires_grad());
  if (x.requires_grad()) {
    const int xi = x.id(), oi = o.id();
    t.set_backward(oi, [xi, oi, dfn](Tape& tp) {
      const std::vector<double>& g = tp.grad_of(oi);
      const std::vector<double>& in = tp.val_of(xi);
      const std::vector<double>& ov = tp.val_of(oi);
      std::vector<double>& gx = tp.grad_of(xi);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * dfn(in[i], ov[i]);
    });
  }
  return o;
}

}  // namespace

// ---- elementwise unary ----

Tensor neg(const Tensor& x) {
  return unary_op("neg", x, [](double v) { return -v; },
                  [](double, double) { return -1.0; });
}

Tensor exp(const Tensor& x) {
  return unary_op("exp", x, [](double v) { return std::exp(v); },
                  [](double, double o) { return o; });
}

Tensor log(const Tensor& x) {
  return unary_op("log", x, [](double v) { return std::log(v); },
                  [](double v, double) { return 1.0 / v; });
}

Tensor sqrt(const Tensor& x) {
  return unary_op("sqrt", x, [](double v) { return std::sqrt(v); },
                  [](double, double o) { return 0.5 / o; });
}

Tensor square(const Tensor& x) {
  return unary_op("square", x, [](double v) { return v * v; },
                  [](double v, double) { return 2.0 * v; });
}

Tensor recip(const Tensor& x) {
  return unary_op("recip", x, [](double v) { return 1.0 / v; },
                  [](double, double o) { return -o * o; });
}

Tensor sigmoid(const Tensor& x) {
  return unary_op("sigmoid", x, [](double v) { return sigmoid_scalar(v); },
                  [](double, double o) { return o * (1.0 - o); });
}

Tensor softplus(const Tensor& x) {
  return unary_op("softplus", x, [](double v) { return stable_softplus(v); },
                  [](double v, double) { return sigmoid_scalar(v); });
}

Tensor silu(const Tensor& x) {
  return unary_op("silu", x, [](double v) { return v * sigmoid_scalar(v); },
                  [](double v, double) {
                    const double s = sigmoid_scalar(v);
                    return s * (1.0 + v * (1.0 - s));
                  });
}

Tensor lgamma(const Tensor& x) {
  return unary_op("lgamma", x, [](double v) { return std::lgamma(v); },
                  [](double v, double) { return lidcd::digamma(v); });
}

Tensor digamma(const Tensor& x) {
  return unary_op("digamma", x, [](double v) { return lidcd::digamma(v); },
                  [](double v, double) { return lidcd::trigamma(v); });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  if (!(lo < hi)) throw ShapeError("clamp: lo must be < hi");
  return unary_op("clamp", x,
                  [lo, hi](double v) { return std::min(std::max(v, lo), hi); },
                  [lo, hi](double v, double) { return (v > lo && v < hi) ? 1.0 : 0.0; });
}

// ---- elementwise binary ----

namespace {

template <typename Fwd>
Tensor binary_op(const char* name, const Tensor& a, const Tensor& b, Fwd fwd,
                 BackwardFn (*mk)(int, int, int)) {
  Tape& t = same_tape(a, b, name);
  check_same_shape(a, b, name);
  const std::vector<double>& va = a.values();
  const std::vector<double>& vb = b.values();
  std::vector<double> out(va.size());
  for (std::size_t i = 0; i < va.size(); ++i) out[i] = fwd(va[i], vb[i]);
  const bool rg = a.requires_grad() || b.requires_grad();
  Tensor o = t.make(name, a.rows(), a.cols(), std::move(out), rg);
  if (rg) t.set_backward(o.id(), mk(o.id(), a.id(), b.id()));
  return o;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op("add", a, b, [](double x, double y) { return x + y; },
                   +[](int oi, int ai, int bi) -> BackwardFn {
                     return [oi, ai, bi](Tape& tp) {
                       const std::vector<double>& g = tp.grad_of(oi);
                       if (tp.wants_grad(ai)) {
                         std::vector<double>& ga = tp.grad_of(ai);
                         for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                       }
                       if (tp.wants_grad(bi)) {
                         std::vector<double>& gb = tp.grad_of(bi);
                         for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
                       }
                     };
                   });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op("sub", a, b, [](double x, double y) { return x - y; },
                   +[](int oi, int ai, int bi) -> BackwardFn {
                     return [oi, ai, bi](Tape& tp) {
                       const std::vector<double>& g = tp.grad_of(oi);
                       if (tp.wants_grad(ai)) {
                         std::vector<double>& ga = tp.grad_of(ai);
                         for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                       }
                       if (tp.wants_grad(bi)) {
                         std::vector<double>& gb = tp.grad_of(bi);
                         for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
                       }
                     };
                   });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op("mul", a, b, [](double x, double y) { return x * y; },
                   +[](int oi, int ai, int bi) -> BackwardFn {
                     return [oi, ai, bi](Tape& tp) {
                       const std::vector<double>& g = tp.grad_of(oi);
                       const std::vector<double>& va = tp.val_of(ai);
                       const std::vector<double>& vb = tp.val_of(bi);
                       if (tp.wants_grad(ai)) {
                         std::vector<double>& ga = tp.grad_of(ai);
                         for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * vb[i];
                       }
                       if (tp.wants_grad(bi)) {
                         std::vector<double>& gb = tp.grad_of(bi);
                         for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * va[i];
                       }
                     };
                   });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary_op("div", a, b, [](double x, double y) { return x / y; },
                   +[](int oi, int ai, int bi) -> BackwardFn {
                     return [oi, ai, bi](Tape& tp) {
                       const std::vector<double>& g = tp.grad_of(oi);
                       const std::vector<double>& vb = tp.val_of(bi);
                       const std::vector<double>& vo = tp.val_of(oi);
                       if (tp.wants_grad(ai)) {
                         std::vector<double>& ga = tp.grad_of(ai);
                         for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / vb[i];
                       }
                       if (tp.wants_grad(bi)) {
                         std::vector<double>& gb = tp.grad_of(bi);
                         for (std::size_t i = 0; i < g.size(); ++i)
                           gb[i] -= g[i] * vo[i] / vb[i];
                       }
                     };
                   });
}

Tensor emin(const Tensor& a, const Tensor& b) {
  return binary_op("emin", a, b, [](double x, double y) { return std::min(x, y); },
                   +[](int oi, int ai, int bi) -> BackwardFn {
                     return [oi, ai, bi](Tape& tp) {
                       const std::vector<double>& g = tp.grad_of(oi);
                       const std::vector<double>& va = tp.val_of(ai);
                       const std::vector<double>& vb = tp.val_of(bi);
                       if (tp.wants_grad(ai)) {
                         std::vector<double>& ga = tp.grad_of(ai);
                         for (std::size_t i = 0; i < g.size(); ++i)
                           if (va[i] <= vb[i]) ga[i] += g[i];
                       }
                       if (tp.wants_grad(bi)) {
                         std::vector<double>& gb = tp.grad_of(bi);
                         for (std::size_t i = 0; i < g.size(); ++i)
                           if (va[i] > vb[i]) gb[i] += g[i];
                       }
                     };
                   });
}

Tensor emax(const Tensor& a, const Tensor& b) {
  return binary_op("emax", a, b, [](double x, double y) { return std::max(x, y); },
                   +[](int oi, int ai, int bi) -> BackwardFn {
                     return [oi, ai, bi](Tape& tp) {
                       const std::vector<double>& g = tp.grad_of(oi);
                       const std::vector<double>& va = tp.val_of(ai);
                       const std::vector<double>& vb = tp.val_of(bi);
                       if (tp.wants_grad(ai)) {
                         std::vector<double>& ga = tp.grad_of(ai);
                         for (std::size_t i = 0; i < g.size(); ++i)
                           if (va[i] >= vb[i]) ga[i] += g[i];
                       }
                       if (tp.wants_grad(bi)) {
                         std::vector<double>& gb = tp.grad_of(bi);
                         for (std::size_t i = 0; i < g.size(); ++i)
                           if (va[i] < vb[i]) gb[i] += g[i];
                       }
                     };
                   });
}

Tensor add_scalar(const Tensor& x, double s) {
  return unary_op("add_scalar", x, [s](double v) { return v + s; },
                  [](double, double) { return 1.0; });
}

Tensor mul_scalar(const Tensor& x, double s) {
  return unary_op("mul_scalar", x, [s](double v) { return v * s; },
                  [s](double, double) { return s; });
}

// ---- broadcast ----

namespace {

void check_rowvec(const Tensor& m, const Tensor& v, const char* op) {
  if (v.rows() != 1 || v.cols() != m.cols())
    throw ShapeError(std::string(op) + ": expected 1x" + std::to_string(m.cols()) + " row vector");
}

void check_colvec(const Tensor& m, const Tensor& v, const char* op) {
  if (v.cols() != 1 || v.rows() != m.rows())
    throw ShapeError(std::string(op) + ": expected " + std::to_string(m.rows()) + "x1 column vector");
}

}  // namespace

Tensor add_rowvec(const Tensor& m, const Tensor& v) {
  Tape& t = same_tape(m, v, "add_rowvec");
  check_rowvec(m, v, "add_rowvec");
  const int r = m.rows(), c = m.cols();
  const std::vector<double>& vm = m.values();
  const std::vector<double>& vv = v.values();
  std::vector<double> out(vm.size());
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j)
      out[static_cast<std::size_t>(i) * c + j] = vm[static_cast<std::size_t>(i) * c + j] + vv[static_cast<std::size_t>(j)];
  const bool rg = m.requires_grad() || v.requires_grad();
  Tensor o = t.make("add_rowvec", r, c, std::move(out), rg);
  if (rg) {
    const int oi = o.id(), mi = m.id(), vi = v.id();
    t.set_backward(oi, [oi, mi, vi, r, c](Tape& tp) {
      const std::vector<double>& g = tp.grad_of(oi);
      if (tp.wants_grad(mi)) {
        std::vector<double>& gm = tp.grad_of(mi);
        for (std::size_t i = 0; i < g.size(); ++i) gm[i] += g[i];
      }
      if (tp.wants_grad(vi)) {
        std::vector<double>& gv = tp.grad_of(vi);
        for (int i = 0; i < r; ++i)
          for (int j = 0; j < c; ++j) gv[static_cast<std::size_t>(j)] += g[static_cast<std::size_t>(i) * c + j];
      }
    });
  }
  return o;
}

Tensor mul_rowvec(const Tensor& m, const Tensor& v) {
  Tape& t = same_tape(m, v, "mul_rowvec");
  check_rowvec(m, v, "mul_rowvec");
  const int r = m.rows(), c = m.cols();
  const std::vector<double>& vm = m.values();
  const std::vector<double>& vv = v.values();
  std::vector<double> out(vm.size());
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j)
      out[static_cast<std::size_t>(i) * c + j] = vm[static_cast<std::size_t>(i) * c + j] * vv[static_cast<std::size_t>(j)];
  const bool rg = m.requires_grad() || v.requires_grad();
  Tensor o = t.make("mul_rowvec", r, c, std::move(out), rg);
  if (rg) {
    const int oi = o.id(), mi = m.id(), vi = v.id();
    t.set_backward(oi, [oi, mi, vi, r, c](Tape& tp) {
      const std::vector<double>& g = tp.grad_of(oi);
      const std::vector<double>& vm2 = tp.val_of(mi);
      const std::vector<double>& vv2 = tp.val_of(vi);
      if (tp.wants_grad(mi)) {
        std::vector<double>& gm = tp.grad_of(mi);
        for (int i = 0; i < r; ++i)
          for (int j = 0; j < c; ++j)
            gm[static_cast<std::size_t>(i) * c + j] += g[static_cast<std::size_t>(i) * c + j] * vv2[static_cast<std::size_t>(j)];
      }
      if (tp.wants_grad(vi)) {
        std::vector<double>& gv = tp.grad_of(vi);
        for (int i = 0; i < r; ++i)
          for (int j = 0; j < c; ++j)
            gv[static_cast<std::size_t>(j)] += g[static_cast<std::size_t>(i) * c + j] * vm2[static_cast<std::size_t>(i) * c + j];
      }
    });
  }
  return o;
}

Tensor add_colvec(const Tensor& m, const Tensor& v) {
  Tape& t = same_tape(m, v, "add_colvec");
  check_colvec(m, v, "add_colvec");
  const int r = m.rows(), c = m.cols();
  const std::vector<double>& vm = m.values();
  const std::vector<double>& vv = v.values();
  std::vector<double> out(vm.size());
  for (int i = 0; i < r; ++i) {
    const double vi = vv[static_cast<std::size_t>(i)];
    for (int j = 0; j < c; ++j)
      out[static_cast<std::size_t>(i) * c + j] = vm[static_cast<std::size_t>(i) * c + j] + vi;
  }
  const bool rg = m.requires_grad() || v.requires_grad();
  Tensor o = t.make("add_colvec", r, c, std::move(out), rg);
  if (rg) {
    const int oi = o.id(), mi = m.id(), vi = v.id();
    t.set_backward(oi, [oi, mi, vi, r, c](Tape& tp) {
      const std::vector<double>& g = tp.grad_of(oi);
      if (tp.wants_grad(mi)) {
        std::vector<double>& gm = tp.grad_of(mi);
        for (std::size_t i = 0; i < g.size(); ++i) gm[i] += g[i];
      }
      if (tp.wants_grad(vi)) {
        std::vector<double>& gv = tp.grad_of(vi);
        for (int i = 0; i < r; ++i) {
          double s = 0.0;
          for (int j = 0; j < c; ++j) s += g[static_cast<std::size_t>(i) * c + j];
          gv[static_cast<std::size_t>(i)] += s;
        }
      }
    });
  }
  return o;
}

Tensor mul_colvec(const Tensor& m, const Tensor& v) {
  Tape& t = same_tape(m, v, "mul_colvec");
  check_colvec(m, v, "mul_colvec");
  const int r = m.rows(), c = m.cols();
  const std::vector<double>& vm = m.values();
  const std::vector<double>& vv = v.values();
  std::vector<double> out(vm.size());
  for (int i = 0; i < r; ++i) {
    const double vi = vv[static_cast<std::size_t>(i)];
    for (int j = 0; j < c; ++j)
      out[static_cast<std::size_t>(i) * c + j] = vm[static_cast<std::size_t>(i) * c + j] * vi;
  }
  const bool rg = m.requires_grad() || v.requires_grad();
  Tensor o = t.make("mul_colvec", r, c, std::move(out), rg);
  if (rg) {
    const int oi = o.id(), mi = m.id(), vi = v.id();
    t.set_backward(oi, [oi, mi, vi, r, c](Tape& tp) {
      const std::vector<double>& g = tp.grad_of(oi);
      const std::vector<double>& vm2 = tp.val_of(mi);
      const std::vector<double>& vv2 = tp.val_of(vi);
      if (tp.wants_grad(mi)) {
        std::vector<double>& gm = tp.grad_of(mi);
        for (int i = 0; i < r; ++i) {
          const double s = vv2[static_cast<std::size_t>(i)];
          for (int j = 0; j < c; ++j)
            gm[static_cast<std::size_t>(i) * c + j] += g[static_cast<std::size_t>(i) * c + j] * s;
        }
      }
      if (tp.wants_grad(vi)) {
        std::vector<double>& gv = tp.grad_of(vi);
        for (int i = 0; i < r; ++i) {
          double s = 0.0;
          for (int j = 0; j < c; ++j)
            s += g[static_cast<std::size_t>(i) * c + j] * vm2[static_cast<std::size_t>(i) * c + j];
          gv[static_cast<std::size_t>(i)] += s;
        }
      }
    });
  }
  return o;
}

// ---- linear algebra ----

namespace {

// C += A B, row-major; the i-p-j order keeps the inner loop contiguous and
// the restrict qualifiers let it vectorize. Zero skipping pays off for the
// one-hot selector products.
void gemm_acc(const double* __restrict a, const double* __restrict b,
              double* __restrict c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    double* __restrict crow = c + static_cast<std::size_t>(i) * n;
    const double* __restrict arow = a + static_cast<std::size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const double aip = arow[p];
      if (aip == 0.0) continue;
      const double* __restrict brow = b + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

// C += A B^T (rows of B are dotted against rows of A).
void gemm_bt_acc(const double* __restrict a, const double* __restrict b,
                 double* __restrict c, int m, int n, int k) {
  // a: m x k, b: n x k, c: m x n
  for (int i = 0; i < m; ++i) {
    const double* __restrict arow = a + static_cast<std::size_t>(i) * k;
    double* __restrict crow = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* __restrict brow = b + static_cast<std::size_t>(j) * k;
      double s = 0.0;
      for (int p = 0; p < k; ++p) s += arow[p] * brow[p];
      crow[j] += s;
    }
  }
}

// C += A^T B.
void gemm_at_acc(const double* __restrict a, const double* __restrict b,
                 double* __restrict c, int m, int k, int n) {
  // a: m x k, b: m x n, c: k x n
  for (int i = 0; i < m; ++i) {
    const double* __restrict arow = a + static_cast<std::size_t>(i) * k;
    const double* __restrict brow = b + static_cast<std::size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const double aip = arow[p];
      if (aip == 0.0) continue;
      double* __restrict crow = c + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  Tape& t = same_tape(a, b, "matmul");
  if (a.cols() != b.rows())
    throw ShapeError("matmul: inner dimensions disagree (" + std::to_string(a.cols()) +
                     " vs " + std::to_string(b.rows()) + ")");
  const int m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
  gemm_acc(a.values().data(), b.values().data(), out.data(), m, k, n);
  const bool rg = a.requires_grad() || b.requires_grad();
  Tensor o = t.make("matmul", m, n, std::move(out), rg);
  if (rg) {
    const int oi = o.id(), ai = a.id(), bi = b.id();
    t.set_backward(oi, [oi, ai, bi, m, k, n](Tape& tp) {
      const std::vector<double>& g = tp.grad_of(oi);
      if (tp.wants_grad(ai))  // dA = G B^T
        gemm_bt_acc(g.data(), tp.val_of(bi).data(), tp.grad_of(ai).data(), m, k, n);
      if (tp.wants_grad(bi))  // dB = A^T G
        gemm_at_acc(tp.val_of(ai).data(), g.data(), tp.grad_of(bi).data(), m, k, n);
    });
  }
  return o;
}

Tensor transpose(const Tensor& a) {
  Tape& t = *a.tape();
  const int r = a.rows(), c = a.cols();
  const std::vector<double>& va = a.values();
  std::vector<double> out(va.size());
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j)
      out[static_cast<std::size_t>(j) * r + i] = va[static_cast<std::size_t>(i) * c + j];
  Tensor o = t.make("transpose", c, r, std::move(out), a.requires_grad());
  if (a.requires_grad()) {
    const int oi = o.id(), ai = a.id();
    t.set_backward(oi, [oi, ai, r, c](Tape& tp) {
      const std::vector<double>& g = tp.grad_of(oi);
      std::vector<double>& ga = tp.grad_of(ai);
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j)
          ga[static_cast<std::size_t>(i) * c + j] += g[static_cast<std::size_t>(j) * r + i];
    });
  }
  return o;
}

Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b) {
  return add_rowvec(matmul(x, w), b);
}

// ---- shape ----

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  Tape& t = same_tape(a, b, "concat_cols");
  if (a.rows() != b.rows()) throw ShapeError("concat_cols: row counts differ");
  const int r = a.rows(), ca = a.cols(), cb = b.cols(), c = ca + cb;
  const std::vector<double>& va = a.values();
  const std::vector<double>& vb = b.values();
  std::vector<double> out(static_cast<std::size_t>(r) * c);
  for (int i = 0; i < r; ++i) {
    std::memcpy(out.data() + static_cast<std::size_t>(i) * c, va.data() + static_cast<std::size_t>(i) * ca, sizeof(double) * ca);
    std::memcpy(out.data() + static_cast<std::size_t>(i) * c + ca, vb.data() + static_cast<std::size_t>(i) * cb, sizeof(double) * cb);
  }
  const bool rg = a.requires_grad() || b.requires_grad();
  Tensor o = t.make("concat_cols", r, c, std::move(out), rg);
  if (rg) {
    const int oi = o.id(), ai = a.id(), bi = b.id();
    t.set_backward(oi, [oi, ai, bi, r, ca, cb, c](Tape& tp) {
      const std::vector<double>& g = tp.grad_of(oi);
      if (tp.wants_grad(ai)) {
        std::vector<double>& ga = tp.grad_of(ai);
        for (int i = 0; i < r; ++i)
          for (int j = 0; j < ca; ++j)
            ga[static_cast<std::size_t>(i) * ca + j] += g[static_cast<std::size_t>(i) * c + j];
      }
      if (tp.wants_grad(bi)) {
        std::vector<double>& gb = tp.grad_of(bi);
        for (int i = 0; i < r; ++i)
          for (int j = 0; j < cb; ++j)
            gb[static_cast<std::size_t>(i) * cb + j] += g[static_cast<std::size_t>(i) * c + ca + j];
      }
    });
  }
  return o;
}

Tensor concat_rows(const Tensor& a, const Tensor& b) {
  Tape& t = same_tape(a, b, "concat_rows");
  if (a.cols() != b.cols()) throw ShapeError("concat_rows: column counts differ");
  const int c = a.cols(), ra = a.rows(), rb = b.rows();
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(ra + rb) * c);
  out.insert(out.end(), a.values().begin(), a.values().end());
  out.insert(out.end(), b.values().begin(), b.values().end());
  const bool rg = a.requires_grad() || b.requires_grad();
  Tensor o = t.make("concat_rows", ra + rb, c, std::move(out), rg);
  if (rg) {
    const int oi = o.id(), ai = a.id(), bi = b.id();
    const std::size_t na = static_cast<std::size_t>(ra) * c;
    t.set_backward(oi, [oi, ai, bi, na](Tape& tp) {
      const std::vector<double>& g = tp.grad_of(oi);
      if (tp.wants_grad(ai)) {
        std::vector<double>& ga = tp.grad_of(ai);
        for (std::size_t i = 0; i < na; ++i) ga[i] += g[i];
      }
      if (tp.wants_grad(bi)) {
        std::vector<double>& gb = tp.grad_of(bi);
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[na + i];
      }
    });
  }
  return o;
}

Tensor concat(const Tensor& a, const Tensor& b) {
  if (a.cols() == 1 && b.cols() == 1) return concat_rows(a, b);
  if (a.rows() == 1 && b.rows() == 1) return concat_cols(a, b);
  throw ShapeError("concat: expects two row vectors or two column vectors");
}

Tensor slice_rows(const Tensor& m, int r0, int r1) {
  if (r0 < 0 || r1 > m.rows() || r0 >= r1) throw ShapeError("slice_rows: bad range");
  Tape& t = *m.tape();
  const int c = m.cols(), nr = r1 - r0;
  const std::vector<double>& vm = m.values();
  std::vector<double> out(vm.begin() + static_cast<std::size_t>(r0) * c,
                          vm.begin() + static_cast<std::size_t>(r1) * c);
  Tensor o = t.make("slice_rows", nr, c, std::move(out), m.requires_grad());
  if (m.requires_grad()) {
    const int oi = o.id(), mi = m.id();
    const std::size_t off = static_cast<std::size_t>(r0) * c;
    t.set_backward(oi, [oi, mi, off](Tape& tp) {
      const std::vector<double>& g = tp.grad_of(oi);
      std::vector<double>& gm = tp.grad_of(mi);
      for (std::size_t i = 0; i < g.size(); ++i) gm[off + i] += g[i];
    });
  }
  return o;
}

Tensor slice_cols(const Tensor& m, int c0, int c1) {
  if (c0 < 0 || c1 > m.cols() || c0 >= c1) throw ShapeError("slice_cols: bad range");
  Tape& t = *m.tape();
  const int r = m.rows(), c = m.cols(), nc = c1 - c0;
  const std::vector<double>& vm = m.values();
  std::vector<double> out(static_cast<std::size_t>(r) * nc);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < nc; ++j)
      out[static_cast<std::size_t>(i) * nc + j] = vm[static_cast<std::size_t>(i) * c + c0 + j];
  Tensor o = t.make("slice_cols", r, nc, std::move(out), m.requires_grad());
  if (m.requires_grad()) {
    const int oi = o.id(), mi = m.id();
    t.set_backward(oi, [oi, mi, r, c, c0, nc](Tape& tp) {
      const std::vector<double>& g = tp.grad_of(oi);
      std::vector<double>& gm = tp.grad_of(mi);
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < nc; ++j)
          gm[static_cast<std::size_t>(i) * c + c0 + j] += g[static_cast<std::size_t>(i) * nc + j];
    });
  }
  return o;
}

Tensor row(const Tensor& m, int i) {
  if (i < 0 || i >= m.rows()) throw ShapeError("row: index out of range");
  return slice_rows(m, i, i + 1);
}

Tensor col(const Tensor& m, int j) {
  if (j < 0 || j >= m.cols()) throw ShapeError("col: index out of range");
  return slice_cols(m, j, j + 1);
}

Tensor reshape(const Tensor& m, int rows, int cols) {
  if (rows * cols != m.size()) throw ShapeError("reshape: element count mismatch");
  Tape& t = *m.tape();
  Tensor o = t.make("reshape", rows, cols, m.values(), m.requires_grad());
  if (m.requires_grad()) {
    const int oi = o.id(), mi = m.id();
    t.set_backward(oi, [oi, mi](Tape& tp) {
      const std::vector<double>& g = tp.grad_of(oi);
      std::vector<double>& gm = tp.grad_of(mi);
      for (std::size_t i = 0; i < g.size(); ++i) gm[i] += g[i];
    });
  }
  return o;
}

// ---- reductions ----

Tensor sum(const Tensor& m) {
  Tape& t = *m.tape();
  double s = 0.0;
  for (double v : m.values()) s += v;
  Tensor o = t.make("sum", 1, 1, {s}, m.requires_grad());
  if (m.requires_grad()) {
    const int oi = o.id(), mi = m.id();
    t.set_backward(oi, [oi, mi](Tape& tp) {
      const double g = tp.grad_of(oi)[0];
      std::vector<double>& gm = tp.grad_of(mi);
      for (double& x : gm) x += g;
    });
  }
  return o;
}

Tensor mean(const Tensor& m) {
  return mul_scalar(sum(m), 1.0 / static_cast<double>(m.size()));
}

Tensor sum_rows(const Tensor& m) {
  Tape& t = *m.tape();
  const int r = m.rows(), c = m.cols();
  const std::vector<double>& vm = m.values();
  std::vector<double> out(static_cast<std::size_t>(r));
  for (int i = 0; i < r; ++i) {
    double s = 0.0;
    for (int j = 0; j < c; ++j) s += vm[static_cast<std::size_t>(i) * c + j];
    out[static_cast<std::size_t>(i)] = s;
  }
  Tensor o = t.make("sum_rows", r, 1, std::move(out), m.requires_grad());
  if (m.requires_grad()) {
    const int oi = o.id(), mi = m.id();
    t.set_backward(oi, [oi, mi, r, c](Tape& tp) {
      const std::vector<double>& g = tp.grad_of(oi);
      std::vector<double>& gm = tp.grad_of(mi);
      for (int i = 0; i < r; ++i) {
        const double gi = g[static_cast<std::size_t>(i)];
        for (int j = 0; j < c; ++j) gm[static_cast<std::size_t>(i) * c + j] += gi;
      }
    });
  }
  return o;
}

Tensor logsumexp_rows(const Tensor& m) {
  Tape& t = *m.tape();
  const int r = m.rows(), c = m.cols();
  const std::vector<double>& vm = m.values();
  std::vector<double> out(static_cast<std::size_t>(r));
  for (int i = 0; i < r; ++i) {
    const double* rowp = vm.data() + static_cast<std::size_t>(i) * c;
    double mx = rowp[0];
    for (int j = 1; j < c; ++j) mx = std::max(mx, rowp[j]);
    double s = 0.0;
    for (int j = 0; j < c; ++j) s += std::exp(rowp[j] - mx);
    out[static_cast<std::size_t>(i)] = mx + std::log(s);
  }
  Tensor o = t.make("logsumexp_rows", r, 1, std::move(out), m.requires_grad());
  if (m.requires_grad()) {
    const int oi = o.id(), mi = m.id();
    t.set_backward(oi, [oi, mi, r, c](Tape& tp) {
      const std::vector<double>& g = tp.grad_of(oi);
      const std::vector<double>& vin = tp.val_of(mi);
      const std::vector<double>& vout = tp.val_of(oi);
      std::vector<double>& gm = tp.grad_of(mi);
      for (int i = 0; i < r; ++i) {
        const double gi = g[static_cast<std::size_t>(i)];
        const double lse = vout[static_cast<std::size_t>(i)];
        for (int j = 0; j < c; ++j)
          gm[static_cast<std::size_t>(i) * c + j] += gi * std::exp(vin[static_cast<std::size_t>(i) * c + j] - lse);
      }
    });
  }
  return o;
}

Tensor log_sum_exp(const Tensor& v) {
  if (v.rows() == 1) return logsumexp_rows(v);
  if (v.cols() == 1) return logsumexp_rows(transpose(v));
  throw ShapeError("log_sum_exp: expects a vector");
}

Tensor softmax_rows(const Tensor& m) {
  return exp(add_colvec(m, neg(logsumexp_rows(m))));
}

Tensor softmax(const Tensor& v) {
  if (v.rows() == 1) return softmax_rows(v);
  if (v.cols() == 1) return transpose(softmax_rows(transpose(v)));
  throw ShapeError("softmax: expects a vector");
}

// ---- special ----

Tensor trace_expm(const Tensor& m) {
  if (m.rows() != m.cols()) throw ShapeError("trace_expm: matrix must be square");
  Tape& t = *m.tape();
  const int d = m.rows();
  auto em = std::make_shared<std::vector<double>>(static_cast<std::size_t>(d) * d);
  matrix_exponential(m.values().data(), static_cast<std::size_t>(d), em->data());
  double tr = 0.0;
  for (int i = 0; i < d; ++i) tr += (*em)[static_cast<std::size_t>(i) * d + i];
  if (!std::isfinite(tr)) throw NonFiniteError("non-finite output of 'trace_expm'");
  Tensor o = t.make("trace_expm", 1, 1, {tr}, m.requires_grad());
  if (m.requires_grad()) {
    const int oi = o.id(), mi = m.id();
    t.set_backward(oi, [oi, mi, em, d](Tape& tp) {
      const double g = tp.grad_of(oi)[0];
      std::vector<double>& gm = tp.grad_of(mi);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
          gm[static_cast<std::size_t>(i) * d + j] += g * (*em)[static_cast<std::size_t>(j) * d + i];
    });
  }
  return o;
}

// ---- straight-through ----

Tensor straight_through_round(const Tensor& soft) {
  Tape& t = *soft.tape();
  const std::vector<double>& vs = soft.values();
  std::vector<double> out(vs.size());
  for (std::size_t i = 0; i < vs.size(); ++i) out[i] = vs[i] > 0.5 ? 1.0 : 0.0;
  Tensor o = t.make("st_round", soft.rows(), soft.cols(), std::move(out), soft.requires_grad());
  if (soft.requires_grad()) {
    const int oi = o.id(), si = soft.id();
    t.set_backward(oi, [oi, si](Tape& tp) {
      const std::vector<double>& g = tp.grad_of(oi);
      std::vector<double>& gs = tp.grad_of(si);
      for (std::size_t i = 0; i < g.size(); ++i) gs[i] += g[i];
    });
  }
  return o;
}

Tensor straight_through_onehot_rows(const Tensor& soft) {
  Tape& t = *soft.tape();
  const int r = soft.rows(), c = soft.cols();
  const std::vector<double>& vs = soft.values();
  std::vector<double> out(vs.size(), 0.0);
  for (int i = 0; i < r; ++i) {
    const double* rowp = vs.data() + static_cast<std::size_t>(i) * c;
    int best = 0;
    for (int j = 1; j < c; ++j)
      if (rowp[j] > rowp[best]) best = j;
    out[static_cast<std::size_t>(i) * c + best] = 1.0;
  }
  Tensor o = t.make("st_onehot", r, c, std::move(out), soft.requires_grad());
  if (soft.requires_grad()) {
    const int oi = o.id(), si = soft.id();
    t.set_backward(oi, [oi, si](Tape& tp) {
      const std::vector<double>& g = tp.grad_of(oi);
      std::vector<double>& gs = tp.grad_of(si);
      for (std::size_t i = 0; i < g.size(); ++i) gs[i] += g[i];
    });
  }
  return o;
}

// ---- stochastic nodes ----

Tensor sample_reparam_normal(const Tensor& mean, const Tensor& std, RngStream& rng) {
  Tape& t = same_tape(mean, std, "sample_reparam_normal");
  check_same_shape(mean, std, "sample_reparam_normal");
  for (double s : std.values())
    if (s < 0.0) throw std::invalid_argument("sample_reparam_normal: negative std");
  std::vector<double> eps(static_cast<std::size_t>(mean.size()));
  for (double& e : eps) e = rng.normal();
  Tensor noise = t.constant(mean.rows(), mean.cols(), std::move(eps));
  Tensor safe_std = emax(std, t.full(std.rows(), std.cols(), 1e-6));
  return add(mean, mul(safe_std, noise));
}

Tensor gumbel_softmax(const Tensor& logits, double temperature, bool hard, RngStream& rng) {
  if (!(temperature > 0.0))
    throw std::invalid_argument("gumbel_softmax: temperature must be > 0");
  const bool column = logits.cols() == 1 && logits.rows() > 1;
  Tensor x = column ? transpose(logits) : logits;
  Tape& t = *x.tape();
  std::vector<double> noise(static_cast<std::size_t>(x.size()));
  for (double& n : noise) n = rng.gumbel();
  Tensor g = t.constant(x.rows(), x.cols(), std::move(noise));
  Tensor y = softmax_rows(mul_scalar(add(x, g), 1.0 / temperature));
  if (hard) y = straight_through_onehot_rows(y);
  return column ? transpose(y) : y;
}

Tensor gumbel_softmax_binary(const Tensor& logits, double temperature, bool hard, RngStream& rng) {
  if (!(temperature > 0.0))
    throw std::invalid_argument("gumbel_softmax_binary: temperature must be > 0");
  Tape& t = *logits.tape();
  // Difference of two Gumbels is logistic noise; hard thresholding then
  // recovers an exact Bernoulli(sigmoid(logit)) sample.
  std::vector<double> noise(static_cast<std::size_t>(logits.size()));
  for (double& n : noise) {
    const double g1 = rng.gumbel();
    const double g0 = rng.gumbel();
    n = g1 - g0;
  }
  Tensor g = t.constant(logits.rows(), logits.cols(), std::move(noise));
  Tensor y = sigmoid(mul_scalar(add(logits, g), 1.0 / temperature));
  if (hard) y = straight_through_round(y);
  return y;
}

}  // namespace lidcd::ad

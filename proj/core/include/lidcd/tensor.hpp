#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lidcd/rng.hpp"

namespace lidcd::ad {

class Tape;

// Raised when a primitive produces NaN or +-Inf.
struct NonFiniteError : std::runtime_error {
  explicit NonFiniteError(const std::string& what) : std::runtime_error(what) {}
};

// Raised on dimension mismatches.
struct ShapeError : std::invalid_argument {
  explicit ShapeError(const std::string& what) : std::invalid_argument(what) {}
};

// Lightweight handle into a Tape node. Everything is a dense row-major
// rows x cols array of doubles; vectors are (n x 1) or (1 x n), scalars (1 x 1).
class Tensor {
 public:
  Tensor() = default;

  bool defined() const { return tape_ != nullptr; }
  int rows() const;
  int cols() const;
  int size() const { return rows() * cols(); }
  bool requires_grad() const;

  const std::vector<double>& values() const;
  // Gradient after Tape::backward; zero-filled before. Only for
  // requires_grad nodes.
  const std::vector<double>& grad() const;

  double scalar() const;  // requires 1x1
  double at(int i, int j = 0) const;

  Tape* tape() const { return tape_; }
  int id() const { return id_; }

 private:
  friend class Tape;
  Tensor(Tape* tape, int id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

// Records primitive operations in creation order (a valid topological order)
// and replays them in reverse for reverse-mode differentiation. Single
// threaded; independent fits use independent tapes.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Tensor constant(int rows, int cols, std::vector<double> values);
  Tensor constant_scalar(double v);
  Tensor zeros(int rows, int cols);
  Tensor ones(int rows, int cols);
  Tensor full(int rows, int cols, double v);
  Tensor eye(int d);
  Tensor leaf(int rows, int cols, std::vector<double> values);

  // Accumulates d(loss)/d(node) into every requires_grad node. The loss must
  // be scalar; calling backward twice without reset() is an error.
  void backward(const Tensor& loss);
  void reset();

  std::size_t node_count() const { return nodes_.size(); }
  bool backward_done() const { return backward_done_; }

  // --- internals used by the op implementations ---
  struct Node {
    int rows = 0, cols = 0;
    std::vector<double> val;
    std::vector<double> grad;  // allocated iff requires_grad
    bool requires_grad = false;
    std::function<void(Tape&)> backward;
  };

  Tensor make(const char* op, int rows, int cols, std::vector<double> values,
              bool requires_grad);
  void set_backward(int id, std::function<void(Tape&)> fn);

  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  const std::vector<double>& val_of(int id) const { return nodes_[static_cast<std::size_t>(id)].val; }
  std::vector<double>& grad_of(int id) { return nodes_[static_cast<std::size_t>(id)].grad; }
  bool wants_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }

 private:
  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

// ---- elementwise ----
Tensor neg(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor sqrt(const Tensor& x);
Tensor square(const Tensor& x);
Tensor recip(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor softplus(const Tensor& x);
Tensor silu(const Tensor& x);
Tensor lgamma(const Tensor& x);
Tensor digamma(const Tensor& x);
Tensor clamp(const Tensor& x, double lo, double hi);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor emin(const Tensor& a, const Tensor& b);
Tensor emax(const Tensor& a, const Tensor& b);

Tensor add_scalar(const Tensor& x, double s);
Tensor mul_scalar(const Tensor& x, double s);

// ---- broadcast: matrix (r x c) against a row (1 x c) or column (r x 1) ----
Tensor add_rowvec(const Tensor& m, const Tensor& v);
Tensor mul_rowvec(const Tensor& m, const Tensor& v);
Tensor add_colvec(const Tensor& m, const Tensor& v);
Tensor mul_colvec(const Tensor& m, const Tensor& v);

// ---- linear algebra ----
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
// x @ w + b with x (n x in), w (in x out), b (1 x out).
Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b);

// ---- shape ----
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor concat_rows(const Tensor& a, const Tensor& b);
// 1-D concatenation; both row vectors or both column vectors.
Tensor concat(const Tensor& a, const Tensor& b);
Tensor row(const Tensor& m, int i);
Tensor col(const Tensor& m, int j);
Tensor slice_rows(const Tensor& m, int r0, int r1);
Tensor slice_cols(const Tensor& m, int c0, int c1);
Tensor reshape(const Tensor& m, int rows, int cols);

// ---- reductions ----
Tensor sum(const Tensor& m);
Tensor mean(const Tensor& m);
Tensor sum_rows(const Tensor& m);          // (r x c) -> (r x 1), sums each row
Tensor logsumexp_rows(const Tensor& m);    // (r x c) -> (r x 1), stable
Tensor log_sum_exp(const Tensor& v);       // 1-D -> scalar
Tensor softmax_rows(const Tensor& m);
Tensor softmax(const Tensor& v);           // 1-D

// ---- special ----
// tr(exp(M)) for square M; gradient is transpose(exp(M)).
Tensor trace_expm(const Tensor& m);

// ---- straight-through ----
// Forward thresholds at 0.5 into {0,1}; backward passes gradients unchanged.
Tensor straight_through_round(const Tensor& soft);
// Forward replaces each row with a one-hot at its argmax; backward identity.
Tensor straight_through_onehot_rows(const Tensor& soft);

// ---- stochastic nodes ----
// mean + std (.) eps with eps ~ N(0, I). std entries must be >= 0 and are
// clamped to >= 1e-6; negative entries raise.
Tensor sample_reparam_normal(const Tensor& mean, const Tensor& std, RngStream& rng);

// Row-wise categorical Gumbel-softmax relaxation. `hard` applies the
// straight-through one-hot. A column vector is treated as one distribution.
Tensor gumbel_softmax(const Tensor& logits, double temperature, bool hard, RngStream& rng);

// Per-entry binary concrete relaxation; hard samples are Bernoulli(sigmoid(logit)).
Tensor gumbel_softmax_binary(const Tensor& logits, double temperature, bool hard, RngStream& rng);

// ---- operators ----
inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator-(const Tensor& a) { return neg(a); }

}  // namespace lidcd::ad

#pragma once

#include <deque>
#include <memory>
#include <vector>

#include "isqa/common.hpp"

namespace isqa {

// Symmetric quadratic term H of the subproblem, exposed through its action
// on vectors plus certified eigenvalue bounds. Runtime modifications
// (scale, shift) accumulate on top of the base operator so that the bound
// algebra stays exact: scale(c) multiplies both bounds by c, shift(rho)
// adds rho to both.
class QuadraticModel {
 public:
  virtual ~QuadraticModel() = default;

  Index dim() const { return dim_; }
  Vector apply(const Vector& v) const { return mult_ * apply_base(v) + ridge_ * v; }
  double quad_form(const Vector& v) const { return v.dot(apply(v)); }

  // Certified lambda_min lower bound; may be zero or negative.
  double lower_bound() const { return mult_ * base_lower() + ridge_; }
  // Certified lambda_max upper bound.
  double upper_bound() const { return mult_ * base_upper() + ridge_; }

  // H <- factor * H, factor > 0.
  void scale(double factor);
  // H <- H + rho I, rho >= 0.
  void shift(double rho);

  virtual bool has_diagonal() const { return false; }
  double diagonal(Index i) const { return mult_ * base_diagonal(i) + ridge_; }
  // acc += coeff * H e_i
  void add_column(Index i, double coeff, Vector& acc) const;

  // Block-diagonal structure if any; a single full-width block otherwise.
  virtual std::vector<IndexRange> blocks() const { return {{0, dim_}}; }

  virtual std::unique_ptr<QuadraticModel> clone() const = 0;

 protected:
  explicit QuadraticModel(Index dim) : dim_(dim) {}
  QuadraticModel(const QuadraticModel&) = default;

  virtual Vector apply_base(const Vector& v) const = 0;
  virtual double base_lower() const = 0;
  virtual double base_upper() const = 0;
  virtual double base_diagonal(Index i) const;
  virtual void add_base_column(Index i, double coeff, Vector& acc) const;

 private:
  Index dim_;
  double mult_ = 1.0;
  double ridge_ = 0.0;
};

// H = zeta * I.
std::unique_ptr<QuadraticModel> identity_model(double zeta, Index dim);

// H = B for a dense symmetric (possibly indefinite) B; bounds are its
// extreme eigenvalues with a small certification slack.
std::unique_ptr<QuadraticModel> dense_symmetric_model(Matrix B);

// H formed by dense diagonal blocks over the given contiguous ranges,
// which must partition [0, dim). Bounds aggregate per-block extremes.
std::unique_ptr<QuadraticModel> block_diagonal_model(std::vector<Matrix> blocks,
                                                     std::vector<IndexRange> ranges);

// Limited-memory BFGS approximation B of the smooth Hessian, base matrix
// gamma0^{-1} I, with the curvature safeguard s^T y >= delta * ||s||^2
// applied before a pair is stored. gamma0 is s^T y / y^T y of the newest
// accepted pair, clamped to [1e-8, 1e8]; 1 when the memory is empty.
class LbfgsState {
 public:
  explicit LbfgsState(Index dim, int memory = 10, double curvature_floor = 1e-8);

  // Returns whether the pair passed the safeguard and was stored.
  bool update(const Vector& s, const Vector& y);

  Vector apply(const Vector& v) const;  // B v
  int stored_pairs() const { return static_cast<int>(pairs_.size()); }
  double gamma0() const { return gamma0_; }

  // Snapshot model; later updates to the state do not affect it.
  std::unique_ptr<QuadraticModel> model() const;

 private:
  void rebuild();

  Index dim_;
  int memory_;
  double curvature_floor_;
  double gamma0_ = 1.0;
  std::deque<std::pair<Vector, Vector>> pairs_;  // oldest first
  std::shared_ptr<const struct LbfgsCore> core_;
};

}  // namespace isqa

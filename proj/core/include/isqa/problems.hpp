#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <vector>

#include "isqa/common.hpp"
#include "isqa/dataio.hpp"

namespace isqa {

// Smooth term of the objective, with a usable Lipschitz upper bound for
// its gradient. convexity_modulus() is 0 when unknown or nonconvex.
class SmoothPart {
 public:
  virtual ~SmoothPart() = default;
  virtual Index dimension() const = 0;
  virtual double value(const Vector& x) const = 0;
  virtual Vector gradient(const Vector& x) const = 0;
  virtual double lipschitz_estimate() const = 0;
  virtual double convexity_modulus() const { return 0.0; }
  // d^T (grad^2 f) d when the Hessian is constant; nullopt otherwise.
  // Exact line search is available only when this is implemented.
  virtual std::optional<double> curvature_along(const Vector& d) const {
    (void)d;
    return std::nullopt;
  }
};

// Convex regularizer with a closed-form prox:
//   prox(v, t) = argmin_u t*psi(u) + 0.5*||u - v||^2.
class Regularizer {
 public:
  virtual ~Regularizer() = default;
  virtual double value(const Vector& x) const = 0;
  virtual Vector prox(const Vector& v, double t) const = 0;
  virtual double strong_convexity() const { return 0.0; }
};

struct CompositeProblem {
  std::shared_ptr<const SmoothPart> smooth;
  std::shared_ptr<const Regularizer> reg;
  Index dimension = 0;

  double value(const Vector& x) const { return smooth->value(x) + reg->value(x); }
};

// Componentwise soft threshold sign(v_i) * max(|v_i| - t, 0).
Vector prox_l1(const Vector& v, double t);

class L1Norm final : public Regularizer {
 public:
  explicit L1Norm(double weight = 1.0);
  double value(const Vector& x) const override;
  Vector prox(const Vector& v, double t) const override;
  double weight() const { return weight_; }

 private:
  double weight_;
};

// Indicator of the nonnegative orthant; prox is the projection.
class NonnegativeIndicator final : public Regularizer {
 public:
  double value(const Vector& x) const override;
  Vector prox(const Vector& v, double t) const override;
};

class ZeroRegularizer final : public Regularizer {
 public:
  double value(const Vector&) const override { return 0.0; }
  Vector prox(const Vector& v, double) const override { return v; }
};

// f(x) = C * sum_i log(1 + exp(-b_i a_i^T x)),  psi = ||x||_1.
// The Lipschitz estimate is (C/4) * (power-iteration bound on lmax(A^T A)).
CompositeProblem make_l1_logreg(std::shared_ptr<const Dataset> ds, double C);

// Dual of l2-regularized squared-hinge loss minimization over alpha >= 0:
//   f(alpha) = 0.5 alpha^T A^T A alpha - 1^T alpha + (1/4C) ||alpha||^2
// with A = (b_1 a_1, ..., b_l a_l); (1/2C)-strongly convex.
CompositeProblem make_squared_hinge_dual(std::shared_ptr<const Dataset> ds, double C);

// f(x) = 0.5 x^T B x + c^T x with symmetric (possibly indefinite) B,
// psi = w ||x||_1. Rejects non-symmetric B.
CompositeProblem make_indefinite_quadratic_l1(const Matrix& B, const Vector& c, double w);

// Dense diagonal blocks of A^T A + (1/2C) I over the given ranges of dual
// variables (A as in make_squared_hinge_dual). Feed to block_diagonal_model.
std::vector<Matrix> dual_gram_blocks(const Dataset& ds, double C,
                                     const std::vector<IndexRange>& ranges);

// Rayleigh-quotient estimate of the top eigenvalue of a symmetric PSD
// operator, 50 power-iteration steps from a seeded start. Callers inflate
// by 1.01 to obtain a usable upper bound.
double power_iteration_lambda_max(const std::function<Vector(const Vector&)>& apply,
                                  Index dim, int iterations = 50, unsigned seed = 20240601);

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace isqa

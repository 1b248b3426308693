#include "isqa/problems.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <functional>
#include <random>

namespace isqa {

namespace {

// log(1 + exp(z)) without overflow for large |z|.
double log1pexp(double z) {
  return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

// 1 / (1 + exp(z)), stable for large |z|.
double sigmoid_neg(double z) {
  if (z >= 0) {
    double e = std::exp(-z);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(z));
}

// lambda_max of sum_i a_i a_i^T over the dataset rows (labels in {-1,+1}
// drop out of the Gram). Dense eigensolve on the smaller Gram side when it
// fits; the theory checks divide by this value, so it must not undershoot.
double gram_lambda_max(const SparseMatrix& A) {
  constexpr Index kDenseCap = 512;
  if (A.n_cols <= kDenseCap) {
    Matrix g = Matrix::Zero(A.n_cols, A.n_cols);
    for (Index i = 0; i < A.n_rows; ++i)
      for (Index p = A.row_offsets[i]; p < A.row_offsets[i + 1]; ++p)
        for (Index q = A.row_offsets[i]; q < A.row_offsets[i + 1]; ++q)
          g(A.col_indices[p], A.col_indices[q]) += A.values[p] * A.values[q];
    Eigen::SelfAdjointEigenSolver<Matrix> es(g, Eigen::EigenvaluesOnly);
    return std::max(0.0, es.eigenvalues().maxCoeff()) * (1 + 1e-9);
  }
  if (A.n_rows <= kDenseCap) {
    Matrix g(A.n_rows, A.n_rows);
    for (Index i = 0; i < A.n_rows; ++i) {
      Vector row = Vector::Zero(A.n_cols);
      A.add_scaled_row(i, 1.0, row);
      for (Index j = i; j < A.n_rows; ++j) {
        double dot = A.row_dot(j, row);
        g(i, j) = dot;
        g(j, i) = dot;
      }
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(g, Eigen::EigenvaluesOnly);
    return std::max(0.0, es.eigenvalues().maxCoeff()) * (1 + 1e-9);
  }
  auto normal_apply = [&A](const Vector& v) { return A.multiply_transpose(A.multiply(v)); };
  return power_iteration_lambda_max(normal_apply, A.n_cols) * 1.01;
}

}  // namespace

double power_iteration_lambda_max(const std::function<Vector(const Vector&)>& apply,
                                  Index dim, int iterations, unsigned seed) {
  if (dim == 0) return 0.0;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  Vector v(dim);
  for (Index i = 0; i < dim; ++i) v[i] = dist(rng);
  double nrm = v.norm();
  if (nrm == 0.0) v[0] = 1.0; else v /= nrm;
  double rayleigh = 0.0;
  for (int it = 0; it < iterations; ++it) {
    Vector w = apply(v);
    rayleigh = v.dot(w);
    double wn = w.norm();
    if (wn == 0.0) return 0.0;
    v = w / wn;
  }
  return rayleigh;
}

Vector prox_l1(const Vector& v, double t) {
  if (t < 0) throw ConfigError("prox_l1 requires t >= 0");
  Vector out(v.size());
  for (Index i = 0; i < v.size(); ++i) {
    double shrunk = std::abs(v[i]) - t;
    out[i] = shrunk > 0 ? (v[i] > 0 ? shrunk : -shrunk) : 0.0;
  }
  return out;
}

L1Norm::L1Norm(double weight) : weight_(weight) {
  if (weight < 0) throw ConfigError("l1 weight must be nonnegative");
}

double L1Norm::value(const Vector& x) const { return weight_ * x.lpNorm<1>(); }

Vector L1Norm::prox(const Vector& v, double t) const { return prox_l1(v, t * weight_); }

double NonnegativeIndicator::value(const Vector& x) const {
  for (Index i = 0; i < x.size(); ++i)
    if (x[i] < 0) return kInf;
  return 0.0;
}

Vector NonnegativeIndicator::prox(const Vector& v, double) const {
  return v.cwiseMax(0.0);
}

namespace {

class LogisticLoss final : public SmoothPart {
 public:
  LogisticLoss(std::shared_ptr<const Dataset> ds, double C) : ds_(std::move(ds)), C_(C) {
    lipschitz_ = (C_ / 4.0) * gram_lambda_max(ds_->features);
  }

  Index dimension() const override { return ds_->features.n_cols; }

  double value(const Vector& x) const override {
    const SparseMatrix& A = ds_->features;
    double acc = 0.0;
    for (Index i = 0; i < A.n_rows; ++i)
      acc += log1pexp(-ds_->labels[i] * A.row_dot(i, x));
    return C_ * acc;
  }

  Vector gradient(const Vector& x) const override {
    const SparseMatrix& A = ds_->features;
    Vector g = Vector::Zero(A.n_cols);
    for (Index i = 0; i < A.n_rows; ++i) {
      double margin = ds_->labels[i] * A.row_dot(i, x);
      // d/dx C*log(1+exp(-m)) = -C * b_i * sigmoid(-m) * a_i
      A.add_scaled_row(i, -C_ * ds_->labels[i] * sigmoid_neg(margin), g);
    }
    return g;
  }

  double lipschitz_estimate() const override { return lipschitz_; }

 private:
  std::shared_ptr<const Dataset> ds_;
  double C_;
  double lipschitz_;
};

// Operates on dual variables alpha in R^l. Keeps A implicitly as the
// label-scaled example rows.
class SquaredHingeDual final : public SmoothPart {
 public:
  SquaredHingeDual(std::shared_ptr<const Dataset> ds, double C) : ds_(std::move(ds)), C_(C) {
    lipschitz_ = gram_lambda_max(ds_->features) + 1.0 / (2.0 * C_);
  }

  Index dimension() const override { return ds_->n_examples(); }

  double value(const Vector& alpha) const override {
    Vector w = columns_combination(alpha);
    return 0.5 * w.squaredNorm() - alpha.sum() + alpha.squaredNorm() / (4.0 * C_);
  }

  Vector gradient(const Vector& alpha) const override {
    Vector w = columns_combination(alpha);
    const SparseMatrix& A = ds_->features;
    Vector g(A.n_rows);
    for (Index i = 0; i < A.n_rows; ++i)
      g[i] = ds_->labels[i] * A.row_dot(i, w) - 1.0 + alpha[i] / (2.0 * C_);
    return g;
  }

  double lipschitz_estimate() const override { return lipschitz_; }
  double convexity_modulus() const override { return 1.0 / (2.0 * C_); }

  std::optional<double> curvature_along(const Vector& d) const override {
    return columns_combination(d).squaredNorm() + d.squaredNorm() / (2.0 * C_);
  }

 private:
  // sum_i v_i b_i a_i, the feature-space image of dual vector v.
  Vector columns_combination(const Vector& v) const {
    const SparseMatrix& A = ds_->features;
    Vector w = Vector::Zero(A.n_cols);
    for (Index i = 0; i < A.n_rows; ++i) A.add_scaled_row(i, v[i] * ds_->labels[i], w);
    return w;
  }

  std::shared_ptr<const Dataset> ds_;
  double C_;
  double lipschitz_;
};

class DenseQuadratic final : public SmoothPart {
 public:
  DenseQuadratic(Matrix B, Vector c) : B_(std::move(B)), c_(std::move(c)) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(B_, Eigen::EigenvaluesOnly);
    double spectral = 0.0;
    if (B_.rows() > 0)
      spectral = std::max(std::abs(es.eigenvalues().minCoeff()),
                          std::abs(es.eigenvalues().maxCoeff()));
    lipschitz_ = spectral * (1.0 + 1e-10) + 1e-300;
  }

  Index dimension() const override { return c_.size(); }
  double value(const Vector& x) const override { return 0.5 * x.dot(B_ * x) + c_.dot(x); }
  Vector gradient(const Vector& x) const override { return B_ * x + c_; }
  double lipschitz_estimate() const override { return lipschitz_; }
  std::optional<double> curvature_along(const Vector& d) const override {
    return d.dot(B_ * d);
  }

 private:
  Matrix B_;
  Vector c_;
  double lipschitz_;
};

}  // namespace

CompositeProblem make_l1_logreg(std::shared_ptr<const Dataset> ds, double C) {
  if (C <= 0) throw ConfigError("l1 logistic regression requires C > 0");
  if (!ds || ds->n_examples() == 0) throw ConfigError("dataset is empty");
  Index dim = ds->n_features();
  return {std::make_shared<LogisticLoss>(std::move(ds), C), std::make_shared<L1Norm>(1.0), dim};
}

CompositeProblem make_squared_hinge_dual(std::shared_ptr<const Dataset> ds, double C) {
  if (C <= 0) throw ConfigError("squared-hinge dual requires C > 0");
  if (!ds || ds->n_examples() == 0) throw ConfigError("dataset is empty");
  Index dim = ds->n_examples();
  return {std::make_shared<SquaredHingeDual>(std::move(ds), C),
          std::make_shared<NonnegativeIndicator>(), dim};
}

CompositeProblem make_indefinite_quadratic_l1(const Matrix& B, const Vector& c, double w) {
  if (B.rows() != B.cols() || B.rows() != c.size())
    throw ConfigError("quadratic term dimensions mismatch");
  if (w < 0) throw ConfigError("l1 weight must be nonnegative");
  double asym = (B - B.transpose()).cwiseAbs().maxCoeff();
  double scale = std::max(1.0, B.cwiseAbs().maxCoeff());
  if (asym > 1e-12 * scale) throw ConfigError("quadratic term must be symmetric");
  std::shared_ptr<const Regularizer> reg;
  if (w == 0.0)
    reg = std::make_shared<ZeroRegularizer>();
  else
    reg = std::make_shared<L1Norm>(w);
  return {std::make_shared<DenseQuadratic>(B, c), reg, c.size()};
}

std::vector<Matrix> dual_gram_blocks(const Dataset& ds, double C,
                                     const std::vector<IndexRange>& ranges) {
  const SparseMatrix& A = ds.features;
  std::vector<Matrix> blocks;
  blocks.reserve(ranges.size());
  for (const IndexRange& r : ranges) {
    if (r.begin < 0 || r.end > A.n_rows || r.begin >= r.end)
      throw ConfigError("gram block range out of bounds");
    Matrix block(r.size(), r.size());
    for (Index i = r.begin; i < r.end; ++i) {
      // dense image of row i, then sparse dots against rows j >= i
      Vector ai = Vector::Zero(A.n_cols);
      A.add_scaled_row(i, 1.0, ai);
      for (Index j = i; j < r.end; ++j) {
        double dot = ds.labels[i] * ds.labels[j] * A.row_dot(j, ai);
        if (i == j) dot += 1.0 / (2.0 * C);
        block(i - r.begin, j - r.begin) = dot;
        block(j - r.begin, i - r.begin) = dot;
      }
    }
    blocks.push_back(std::move(block));
  }
  return blocks;
}

}  // namespace isqa

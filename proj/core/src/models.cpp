#include "isqa/models.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace isqa {

void QuadraticModel::scale(double factor) {
  if (factor <= 0) throw ConfigError("model scale factor must be positive");
  mult_ *= factor;
  ridge_ *= factor;
}

void QuadraticModel::shift(double rho) {
  if (rho < 0) throw ConfigError("model shift must be nonnegative");
  ridge_ += rho;
}

void QuadraticModel::add_column(Index i, double coeff, Vector& acc) const {
  add_base_column(i, mult_ * coeff, acc);
  acc[i] += ridge_ * coeff;
}

double QuadraticModel::base_diagonal(Index) const {
  throw ConfigError("model does not expose a diagonal");
}

void QuadraticModel::add_base_column(Index i, double coeff, Vector& acc) const {
  acc += coeff * apply_base(Vector::Unit(dim(), i));
}

namespace {

// Widens raw eigenvalue estimates into certified bounds; `rel` is the
// one-sided relative slack.
std::pair<double, double> widen(double lo, double hi, double rel) {
  return {lo - rel * std::abs(lo) - 1e-300, hi + rel * std::abs(hi) + 1e-300};
}

class IdentityModel final : public QuadraticModel {
 public:
  IdentityModel(double zeta, Index dim) : QuadraticModel(dim), zeta_(zeta) {
    if (zeta <= 0) throw ConfigError("identity model requires zeta > 0");
  }
  bool has_diagonal() const override { return true; }
  std::unique_ptr<QuadraticModel> clone() const override {
    return std::make_unique<IdentityModel>(*this);
  }

 protected:
  Vector apply_base(const Vector& v) const override { return zeta_ * v; }
  double base_lower() const override { return zeta_; }
  double base_upper() const override { return zeta_; }
  double base_diagonal(Index) const override { return zeta_; }
  void add_base_column(Index i, double coeff, Vector& acc) const override {
    acc[i] += coeff * zeta_;
  }

 private:
  double zeta_;
};

class DenseSymmetricModel final : public QuadraticModel {
 public:
  explicit DenseSymmetricModel(Matrix B)
      : QuadraticModel(B.rows()), matrix_(std::make_shared<Matrix>(std::move(B))) {
    if (matrix_->rows() != matrix_->cols())
      throw ConfigError("dense model requires a square matrix");
    Eigen::SelfAdjointEigenSolver<Matrix> es(*matrix_, Eigen::EigenvaluesOnly);
    std::tie(lo_, hi_) = widen(es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff(), 1e-10);
  }
  bool has_diagonal() const override { return true; }
  std::unique_ptr<QuadraticModel> clone() const override {
    return std::make_unique<DenseSymmetricModel>(*this);
  }

 protected:
  Vector apply_base(const Vector& v) const override { return *matrix_ * v; }
  double base_lower() const override { return lo_; }
  double base_upper() const override { return hi_; }
  double base_diagonal(Index i) const override { return (*matrix_)(i, i); }
  void add_base_column(Index i, double coeff, Vector& acc) const override {
    acc += coeff * matrix_->col(i);
  }

 private:
  std::shared_ptr<const Matrix> matrix_;
  double lo_ = 0, hi_ = 0;
};

class BlockDiagonalModel final : public QuadraticModel {
 public:
  BlockDiagonalModel(std::vector<Matrix> blocks, std::vector<IndexRange> ranges)
      : QuadraticModel(ranges.empty() ? 0 : ranges.back().end),
        blocks_(std::make_shared<std::vector<Matrix>>(std::move(blocks))),
        ranges_(std::move(ranges)) {
    if (blocks_->size() != ranges_.size())
      throw ConfigError("block count does not match range count");
    Index expect = 0;
    for (size_t b = 0; b < ranges_.size(); ++b) {
      const IndexRange& r = ranges_[b];
      if (r.begin != expect || r.size() <= 0)
        throw ConfigError("block ranges must be contiguous and nonempty");
      const Matrix& m = (*blocks_)[b];
      if (m.rows() != m.cols() || m.rows() != r.size())
        throw ConfigError("block size does not match its range");
      expect = r.end;
    }
    double lo = kHuge, hi = -kHuge;
    for (const Matrix& m : *blocks_) {
      Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
      lo = std::min(lo, es.eigenvalues().minCoeff());
      hi = std::max(hi, es.eigenvalues().maxCoeff());
    }
    std::tie(lo_, hi_) = widen(lo, hi, 1e-10);
    coord_block_.resize(dim());
    for (size_t b = 0; b < ranges_.size(); ++b)
      for (Index i = ranges_[b].begin; i < ranges_[b].end; ++i)
        coord_block_[i] = b;
  }

  bool has_diagonal() const override { return true; }
  std::vector<IndexRange> blocks() const override { return ranges_; }
  std::unique_ptr<QuadraticModel> clone() const override {
    return std::make_unique<BlockDiagonalModel>(*this);
  }

 protected:
  Vector apply_base(const Vector& v) const override {
    Vector out(dim());
    for (size_t b = 0; b < ranges_.size(); ++b) {
      const IndexRange& r = ranges_[b];
      out.segment(r.begin, r.size()).noalias() =
          (*blocks_)[b] * v.segment(r.begin, r.size());
    }
    return out;
  }
  double base_lower() const override { return lo_; }
  double base_upper() const override { return hi_; }
  double base_diagonal(Index i) const override {
    const IndexRange& r = ranges_[coord_block_[i]];
    return (*blocks_)[coord_block_[i]](i - r.begin, i - r.begin);
  }
  void add_base_column(Index i, double coeff, Vector& acc) const override {
    const IndexRange& r = ranges_[coord_block_[i]];
    acc.segment(r.begin, r.size()) += coeff * (*blocks_)[coord_block_[i]].col(i - r.begin);
  }

 private:
  static constexpr double kHuge = 1e300;
  std::shared_ptr<const std::vector<Matrix>> blocks_;
  std::vector<IndexRange> ranges_;
  std::vector<size_t> coord_block_;
  double lo_ = 0, hi_ = 0;
};

}  // namespace

std::unique_ptr<QuadraticModel> identity_model(double zeta, Index dim) {
  return std::make_unique<IdentityModel>(zeta, dim);
}

std::unique_ptr<QuadraticModel> dense_symmetric_model(Matrix B) {
  return std::make_unique<DenseSymmetricModel>(std::move(B));
}

std::unique_ptr<QuadraticModel> block_diagonal_model(std::vector<Matrix> blocks,
                                                     std::vector<IndexRange> ranges) {
  return std::make_unique<BlockDiagonalModel>(std::move(blocks), std::move(ranges));
}

// Compact representation of the direct L-BFGS matrix
//   B = theta I - U Minv U^T,  U = [theta*S  Y],
//   M = [ theta S^T S   L ; L^T  -D ],  L strictly lower part of S^T Y.
struct LbfgsCore {
  Index dim = 0;
  double theta = 1.0;
  Matrix U;
  Eigen::PartialPivLU<Matrix> middle_lu;
  double lambda_lo = 1.0;
  double lambda_hi = 1.0;

  Vector apply(const Vector& v) const {
    if (U.cols() == 0) return theta * v;
    return theta * v - U * middle_lu.solve(U.transpose() * v);
  }
};

namespace {

class LbfgsModel final : public QuadraticModel {
 public:
  explicit LbfgsModel(std::shared_ptr<const LbfgsCore> core)
      : QuadraticModel(core->dim), core_(std::move(core)) {}
  std::unique_ptr<QuadraticModel> clone() const override {
    return std::make_unique<LbfgsModel>(*this);
  }

 protected:
  Vector apply_base(const Vector& v) const override { return core_->apply(v); }
  double base_lower() const override { return core_->lambda_lo; }
  double base_upper() const override { return core_->lambda_hi; }

 private:
  std::shared_ptr<const LbfgsCore> core_;
};

}  // namespace

LbfgsState::LbfgsState(Index dim, int memory, double curvature_floor)
    : dim_(dim), memory_(memory), curvature_floor_(curvature_floor) {
  if (memory < 1) throw ConfigError("lbfgs memory must be at least 1");
  rebuild();
}

bool LbfgsState::update(const Vector& s, const Vector& y) {
  double sy = s.dot(y);
  double ss = s.squaredNorm();
  if (ss == 0.0 || sy < curvature_floor_ * ss) return false;
  double yy = y.squaredNorm();
  gamma0_ = std::clamp(sy / yy, 1e-8, 1e8);
  pairs_.emplace_back(s, y);
  if (static_cast<int>(pairs_.size()) > memory_) pairs_.pop_front();
  rebuild();
  return true;
}

Vector LbfgsState::apply(const Vector& v) const { return core_->apply(v); }

std::unique_ptr<QuadraticModel> LbfgsState::model() const {
  return std::make_unique<LbfgsModel>(core_);
}

void LbfgsState::rebuild() {
  auto core = std::make_shared<LbfgsCore>();
  core->dim = dim_;
  core->theta = 1.0 / gamma0_;
  const int p = static_cast<int>(pairs_.size());
  if (p > 0) {
    Matrix S(dim_, p), Y(dim_, p);
    for (int j = 0; j < p; ++j) {
      S.col(j) = pairs_[j].first;
      Y.col(j) = pairs_[j].second;
    }
    Matrix sty = S.transpose() * Y;
    Matrix middle(2 * p, 2 * p);
    middle.topLeftCorner(p, p) = core->theta * (S.transpose() * S);
    Matrix lower = sty.triangularView<Eigen::StrictlyLower>();
    middle.topRightCorner(p, p) = lower;
    middle.bottomLeftCorner(p, p) = lower.transpose();
    middle.bottomRightCorner(p, p) = -Matrix(sty.diagonal().asDiagonal());
    core->U.resize(dim_, 2 * p);
    core->U.leftCols(p) = core->theta * S;
    core->U.rightCols(p) = Y;
    core->middle_lu.compute(middle);

    // Extreme eigenvalues: theta away from span(U); on span(U) the
    // restriction is the small matrix theta I - R Minv R^T with U = QR.
    double lo, hi;
    if (dim_ <= 2 * p || dim_ <= 128) {
      Matrix dense = core->theta * Matrix::Identity(dim_, dim_) -
                     core->U * core->middle_lu.solve(core->U.transpose());
      Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (dense + dense.transpose()),
                                               Eigen::EigenvaluesOnly);
      lo = es.eigenvalues().minCoeff();
      hi = es.eigenvalues().maxCoeff();
    } else {
      Eigen::HouseholderQR<Matrix> qr(core->U);
      Matrix R = qr.matrixQR().topRows(2 * p).triangularView<Eigen::Upper>();
      Matrix small = core->theta * Matrix::Identity(2 * p, 2 * p) -
                     R * core->middle_lu.solve(R.transpose());
      Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (small + small.transpose()),
                                               Eigen::EigenvaluesOnly);
      lo = std::min(core->theta, es.eigenvalues().minCoeff());
      hi = std::max(core->theta, es.eigenvalues().maxCoeff());
    }
    core->lambda_lo = lo - 1e-2 * std::abs(lo);
    core->lambda_hi = hi + 1e-2 * std::abs(hi);
  } else {
    core->lambda_lo = core->theta;
    core->lambda_hi = core->theta;
  }
  core_ = std::move(core);
}

}  // namespace isqa

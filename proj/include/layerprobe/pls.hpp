#pragma once

#include "layerprobe/error.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace layerprobe {

struct PlsConfig {
  int n_components = 25;
  int max_iter = 500;
  double tol = 1e-6;
  bool scale = false; // variance-normalize columns (centering is always done)

  void validate() const {
    if (n_components < 1)
      throw Error(Errc::InvalidConfig, "pls n_components must be >= 1");
    if (max_iter < 1)
      throw Error(Errc::InvalidConfig, "pls max_iter must be >= 1");
    if (!(tol > 0.0) || !std::isfinite(tol))
      throw Error(Errc::InvalidConfig, "pls tol must be > 0");
  }
};

/// Fitted PLS2 regression. Prediction is the affine map
///   Y_hat = (X - x_mean) diag(1/x_scale) B diag(y_scale) + y_mean
template <typename Scalar> struct PlsModel {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Vector x_mean;
  Vector y_mean;
  Vector x_scale;
  Vector y_scale;
  Matrix coefficients; // p x q
  int components_used = 0;

  Eigen::Index predictors() const noexcept { return x_mean.size(); }
  Eigen::Index responses() const noexcept { return y_mean.size(); }
};

namespace detail {

// Squared-norm ratio below which a residual counts as numerically zero.
template <typename Scalar> constexpr Scalar residual_floor() {
  return Scalar(1e-24);
}

template <typename Derived>
typename Derived::Scalar column_ss_floor(const Eigen::MatrixBase<Derived> &col) {
  using Scalar = typename Derived::Scalar;
  const Scalar peak = col.cwiseAbs().maxCoeff();
  const Scalar eps = std::numeric_limits<Scalar>::epsilon();
  const Scalar per_entry = Scalar(16) * eps * peak;
  return static_cast<Scalar>(col.size()) * per_entry * per_entry;
}

} // namespace detail

/// NIPALS PLS2 with deflation of both X and Y residuals. Each component's
/// inner loop iterates until successive score vectors differ by less than
/// `tol` (relative), capped at `max_iter`. Extraction stops early once the X
/// residual is numerically zero, so components_used never exceeds the rank
/// of the centered X. Zero-variance X columns get coefficient 0.
template <typename DerivedX, typename DerivedY>
PlsModel<typename DerivedX::Scalar>
pls_fit(const Eigen::MatrixBase<DerivedX> &X, const Eigen::MatrixBase<DerivedY> &Y,
        const PlsConfig &cfg) {
  using Scalar = typename DerivedX::Scalar;
  using Model = PlsModel<Scalar>;
  using Matrix = typename Model::Matrix;
  using Vector = typename Model::Vector;
  static_assert(std::is_floating_point_v<Scalar>);

  cfg.validate();
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  const Eigen::Index q = Y.cols();
  if (n < 2)
    throw Error(Errc::DimensionMismatch, "pls_fit needs at least 2 rows");
  if (Y.rows() != n)
    throw Error(Errc::DimensionMismatch, "X and Y row counts differ");
  if (p < 1 || q < 1)
    throw Error(Errc::DimensionMismatch, "X and Y need at least one column");
  if (!X.allFinite() || !Y.allFinite())
    throw Error(Errc::NonFiniteInput, "pls_fit input contains non-finite values");

  Model model;
  model.x_mean = X.colwise().mean().transpose();
  model.y_mean = Y.colwise().mean().template cast<Scalar>().transpose();
  Matrix Xc = X.rowwise() - model.x_mean.transpose();
  Matrix Yc = Y.template cast<Scalar>().rowwise() - model.y_mean.transpose();

  std::vector<Eigen::Index> active;
  active.reserve(static_cast<std::size_t>(p));
  model.x_scale = Vector::Ones(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const Scalar ss = Xc.col(j).squaredNorm();
    if (ss > detail::column_ss_floor(X.col(j))) {
      active.push_back(j);
      if (cfg.scale)
        model.x_scale(j) = std::sqrt(ss / Scalar(n - 1));
    }
  }
  if (active.empty())
    throw Error(Errc::DegenerateInput, "all rows of X are identical");

  model.y_scale = Vector::Ones(q);
  if (cfg.scale) {
    for (Eigen::Index j = 0; j < q; ++j) {
      const Scalar ss = Yc.col(j).squaredNorm();
      if (ss > detail::column_ss_floor(Y.col(j).template cast<Scalar>()))
        model.y_scale(j) = std::sqrt(ss / Scalar(n - 1));
    }
  }

  const auto pa = static_cast<Eigen::Index>(active.size());
  Matrix E(n, pa);
  for (Eigen::Index k = 0; k < pa; ++k)
    E.col(k) = Xc.col(active[k]) / model.x_scale(active[k]);
  Matrix F = Yc * model.y_scale.cwiseInverse().asDiagonal();
  Xc.resize(0, 0);

  const Eigen::Index max_a = std::min<Eigen::Index>(cfg.n_components, std::min(n - 1, pa));
  Matrix W(pa, max_a), P(pa, max_a), C(q, max_a);

  const Scalar floor = detail::residual_floor<Scalar>();
  const Scalar x_ss0 = E.squaredNorm();
  const Scalar y_ss0 = F.squaredNorm();
  Eigen::Index a = 0;
  Vector w(pa), t(n), t_prev(n), u(n), c(q);
  for (; a < max_a; ++a) {
    if (E.squaredNorm() <= floor * x_ss0 || F.squaredNorm() <= floor * y_ss0)
      break;

    Eigen::Index start_col = 0;
    F.colwise().squaredNorm().maxCoeff(&start_col);
    u = F.col(start_col);

    bool usable = true;
    for (int iter = 0; iter < cfg.max_iter; ++iter) {
      w.noalias() = E.transpose() * u;
      const Scalar wn = w.norm();
      if (!(wn > Scalar(0))) {
        usable = false;
        break;
      }
      w /= wn;
      t.noalias() = E * w;
      if (q == 1)
        break; // single response: the first pass is the fixed point
      const Scalar tt = t.squaredNorm();
      c.noalias() = F.transpose() * t / tt;
      u.noalias() = F * c / c.squaredNorm();
      if (iter > 0 && (t - t_prev).norm() <= cfg.tol * t.norm())
        break;
      t_prev = t;
    }
    const Scalar tt = t.squaredNorm();
    if (!usable || !(tt > floor * x_ss0))
      break;

    P.col(a).noalias() = E.transpose() * t / tt;
    C.col(a).noalias() = F.transpose() * t / tt;
    W.col(a) = w;
    E.noalias() -= t * P.col(a).transpose();
    F.noalias() -= t * C.col(a).transpose();
  }
  model.components_used = static_cast<int>(a);

  model.coefficients = Matrix::Zero(p, q);
  if (a > 0) {
    // B = W (P'W)^{-1} C'; P'W is unit upper triangular under NIPALS.
    const Matrix PtW = P.leftCols(a).transpose() * W.leftCols(a);
    const Matrix WstarT =
        PtW.transpose().template triangularView<Eigen::Lower>().solve(
            W.leftCols(a).transpose());
    const Matrix B = WstarT.transpose() * C.leftCols(a).transpose();
    for (Eigen::Index k = 0; k < pa; ++k)
      model.coefficients.row(active[k]) = B.row(k);
  }
  return model;
}

template <typename Scalar, typename Derived>
typename PlsModel<Scalar>::Matrix pls_predict(const PlsModel<Scalar> &m,
                                              const Eigen::MatrixBase<Derived> &X) {
  using Matrix = typename PlsModel<Scalar>::Matrix;
  if (X.cols() != m.predictors())
    throw Error(Errc::DimensionMismatch,
                "pls_predict expects " + std::to_string(m.predictors()) +
                    " columns, got " + std::to_string(X.cols()));
  const Matrix Z = (X.template cast<Scalar>().rowwise() - m.x_mean.transpose()) *
                   m.x_scale.cwiseInverse().asDiagonal();
  Matrix out = Z * m.coefficients * m.y_scale.asDiagonal();
  out.rowwise() += m.y_mean.transpose();
  return out;
}

} // namespace layerprobe

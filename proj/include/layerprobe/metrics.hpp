#pragma once

#include "layerprobe/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string_view>
#include <vector>

namespace layerprobe {

enum class CorrelationMethod { Pearson, Spearman };

std::string_view to_string(CorrelationMethod m) noexcept;

struct CorrelationResult {
  double rho = 0.0;
  std::size_t n = 0;
  double p_value = 1.0; // two-sided
  CorrelationMethod method = CorrelationMethod::Pearson;
};

/// Product-moment correlation, accumulated in double.
template <typename DerivedX, typename DerivedY>
double pearson(const Eigen::DenseBase<DerivedX> &x,
               const Eigen::DenseBase<DerivedY> &y) {
  if (x.size() != y.size())
    throw Error(Errc::LengthMismatch, "pearson inputs differ in length");
  if (x.size() < 2)
    throw Error(Errc::InsufficientSamples, "pearson needs n >= 2");
  const Eigen::ArrayXd xa = x.derived().template cast<double>().reshaped().array();
  const Eigen::ArrayXd ya = y.derived().template cast<double>().reshaped().array();
  const Eigen::ArrayXd dx = xa - xa.mean();
  const Eigen::ArrayXd dy = ya - ya.mean();
  const double sxx = dx.square().sum();
  const double syy = dy.square().sum();
  if (!(sxx > 0.0) || !(syy > 0.0))
    throw Error(Errc::ZeroVariance, "pearson input has zero variance");
  const double r = (dx * dy).sum() / std::sqrt(sxx * syy);
  return std::clamp(r, -1.0, 1.0);
}

/// 1-based ranks; tied values share the mean of the positions they occupy.
template <typename Derived>
Eigen::VectorXd average_ranks(const Eigen::DenseBase<Derived> &v) {
  const auto n = static_cast<std::size_t>(v.size());
  const Eigen::VectorXd x = v.derived().template cast<double>().reshaped();
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return x(a) < x(b); });
  Eigen::VectorXd ranks(static_cast<Eigen::Index>(n));
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && x(order[j]) == x(order[i]))
      ++j;
    const double r = 0.5 * static_cast<double>(i + 1 + j); // mean of i+1..j
    for (std::size_t k = i; k < j; ++k)
      ranks(order[k]) = r;
    i = j;
  }
  return ranks;
}

template <typename DerivedX, typename DerivedY>
double spearman(const Eigen::DenseBase<DerivedX> &x,
                const Eigen::DenseBase<DerivedY> &y) {
  if (x.size() != y.size())
    throw Error(Errc::LengthMismatch, "spearman inputs differ in length");
  if (!x.derived().allFinite() || !y.derived().allFinite())
    throw Error(Errc::NonFiniteInput, "spearman input contains non-finite values");
  return pearson(average_ranks(x), average_ranks(y));
}

/// Two-sided p-value of a correlation under H0 via t = r sqrt((n-2)/(1-r^2)).
double correlation_p_value(double rho, std::size_t n);

CorrelationResult correlation_test(const Eigen::Ref<const Eigen::VectorXd> &x,
                                   const Eigen::Ref<const Eigen::VectorXd> &y,
                                   CorrelationMethod method);

/// Exact two-sided permutation p-value: fraction of all n! reorderings of y
/// whose |rho| reaches the observed |rho|. Limited to n <= 10.
double permutation_p_value(const Eigen::Ref<const Eigen::VectorXd> &x,
                           const Eigen::Ref<const Eigen::VectorXd> &y,
                           CorrelationMethod method);

struct SitePredictivity {
  double value = 0.0;           // median of per-site Pearson r
  std::size_t sites_used = 0;
  std::size_t sites_degenerate = 0; // excluded for zero variance
};

/// Per-site Pearson across stimuli, median over the non-degenerate sites.
SitePredictivity site_predictivity(const Eigen::Ref<const Eigen::MatrixXd> &actual,
                                   const Eigen::Ref<const Eigen::MatrixXd> &predicted);

double median(std::vector<double> values);

} // namespace layerprobe

#include "layerprobe/metrics.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <numeric>

namespace layerprobe {

std::string_view to_string(CorrelationMethod m) noexcept {
  return m == CorrelationMethod::Pearson ? "pearson" : "spearman";
}

double correlation_p_value(double rho, std::size_t n) {
  if (n < 3)
    throw Error(Errc::InsufficientSamples, "p-value needs n >= 3");
  const double r2 = rho * rho;
  if (r2 >= 1.0)
    return 0.0;
  const double df = static_cast<double>(n - 2);
  const double t = std::abs(rho) * std::sqrt(df / (1.0 - r2));
  boost::math::students_t dist(df);
  const double p = 2.0 * boost::math::cdf(boost::math::complement(dist, t));
  return std::clamp(p, 0.0, 1.0);
}

namespace {

double correlate(const Eigen::Ref<const Eigen::VectorXd> &x,
                 const Eigen::Ref<const Eigen::VectorXd> &y,
                 CorrelationMethod method) {
  return method == CorrelationMethod::Pearson ? pearson(x, y) : spearman(x, y);
}

} // namespace

CorrelationResult correlation_test(const Eigen::Ref<const Eigen::VectorXd> &x,
                                   const Eigen::Ref<const Eigen::VectorXd> &y,
                                   CorrelationMethod method) {
  if (x.size() != y.size())
    throw Error(Errc::LengthMismatch, "correlation_test inputs differ in length");
  if (x.size() < 3)
    throw Error(Errc::InsufficientSamples, "correlation_test needs n >= 3");
  CorrelationResult r;
  r.method = method;
  r.n = static_cast<std::size_t>(x.size());
  r.rho = correlate(x, y, method);
  r.p_value = correlation_p_value(r.rho, r.n);
  return r;
}

double permutation_p_value(const Eigen::Ref<const Eigen::VectorXd> &x,
                           const Eigen::Ref<const Eigen::VectorXd> &y,
                           CorrelationMethod method) {
  if (x.size() != y.size())
    throw Error(Errc::LengthMismatch, "permutation test inputs differ in length");
  if (x.size() < 3 || x.size() > 10)
    throw Error(Errc::InsufficientSamples, "permutation test needs 3 <= n <= 10");
  // Rank-transform once so the per-permutation work is a plain Pearson.
  const Eigen::VectorXd xs =
      method == CorrelationMethod::Spearman ? average_ranks(x) : Eigen::VectorXd(x);
  const Eigen::VectorXd ys =
      method == CorrelationMethod::Spearman ? average_ranks(y) : Eigen::VectorXd(y);
  const double observed = std::abs(pearson(xs, ys));
  const double slack = 1e-12;

  std::vector<Eigen::Index> perm(static_cast<std::size_t>(ys.size()));
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  Eigen::VectorXd yp(ys.size());
  std::size_t hits = 0, total = 0;
  do {
    for (Eigen::Index i = 0; i < ys.size(); ++i)
      yp(i) = ys(perm[static_cast<std::size_t>(i)]);
    if (std::abs(pearson(xs, yp)) >= observed - slack)
      ++hits;
    ++total;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<double>(hits) / static_cast<double>(total);
}

double median(std::vector<double> values) {
  if (values.empty())
    throw Error(Errc::InsufficientSamples, "median of empty set");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid),
                   values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1)
    return upper;
  const double lower =
      *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

SitePredictivity site_predictivity(const Eigen::Ref<const Eigen::MatrixXd> &actual,
                                   const Eigen::Ref<const Eigen::MatrixXd> &predicted) {
  if (actual.rows() != predicted.rows() || actual.cols() != predicted.cols())
    throw Error(Errc::DimensionMismatch, "actual and predicted shapes differ");
  if (actual.rows() < 3)
    throw Error(Errc::InsufficientSamples, "site_predictivity needs n >= 3");
  SitePredictivity out;
  std::vector<double> per_site;
  per_site.reserve(static_cast<std::size_t>(actual.cols()));
  for (Eigen::Index s = 0; s < actual.cols(); ++s) {
    try {
      per_site.push_back(pearson(actual.col(s), predicted.col(s)));
    } catch (const Error &e) {
      if (e.code() != Errc::ZeroVariance)
        throw;
      ++out.sites_degenerate;
    }
  }
  if (per_site.empty())
    throw Error(Errc::AllSitesDegenerate, "every site has zero variance");
  out.sites_used = per_site.size();
  out.value = median(std::move(per_site));
  return out;
}

} // namespace layerprobe

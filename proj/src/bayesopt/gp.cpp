#include "echoflag/bayesopt/gp.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>

#include "echoflag/error.hpp"
#include "echoflag/rng.hpp"

namespace echoflag::bayesopt {

namespace {

constexpr double kSqrt5 = 2.23606797749978969641;
constexpr double kJitterLadder[] = {0.0, 1e-10, 1e-9, 1e-8, 1e-7, GaussianProcess::kMaxJitter};

// Hyperparameter box, log space, normalized targets.
constexpr double kLogLenLo = -4.6;  // 0.01
constexpr double kLogLenHi = 4.6;   // 100
constexpr double kLogSigLo = -4.6;
constexpr double kLogSigHi = 9.2;
constexpr double kLogNoiseLo = -18.4;  // 1e-8
constexpr double kLogNoiseHi = 0.0;

using Eigen::MatrixXd;
using Eigen::VectorXd;

double scaled_distance(std::span<const double> a, std::span<const double> b, std::span<const double> len) {
  double s = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    const double t = (a[d] - b[d]) / len[d];
    s += t * t;
  }
  return std::sqrt(s);
}

MatrixXd kernel_matrix(const std::vector<std::vector<double>>& x, const GpHyper& h) {
  const auto n = static_cast<Eigen::Index>(x.size());
  MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) k(i, j) = k(j, i) = matern52(x[i], x[j], h);
  return k;
}

struct Factor {
  Eigen::LLT<MatrixXd> llt;
  double jitter = 0.0;
};

/// Cholesky of K + noise I, escalating the diagonal jitter on failure.
std::optional<Factor> factorize(MatrixXd k, double noise) {
  k.diagonal().array() += noise;
  for (double j : kJitterLadder) {
    MatrixXd kj = k;
    kj.diagonal().array() += j;
    Factor f{Eigen::LLT<MatrixXd>(kj), j};
    if (f.llt.info() != Eigen::Success) continue;
    const auto d = f.llt.matrixLLT().diagonal();
    if ((d.array() > 0.0).all() && d.allFinite()) return f;
  }
  return std::nullopt;
}

double lml_of(const Factor& f, const VectorXd& y, const VectorXd& alpha) {
  const double n = static_cast<double>(y.size());
  const double logdet = f.llt.matrixLLT().diagonal().array().log().sum();
  return -0.5 * y.dot(alpha) - logdet - 0.5 * n * std::log(2.0 * std::numbers::pi);
}

GpHyper unpack(const VectorXd& theta, std::size_t dims) {
  GpHyper h;
  for (std::size_t d = 0; d < dims; ++d) h.length_scales.push_back(std::exp(theta(static_cast<Eigen::Index>(d))));
  h.signal_variance = std::exp(theta(static_cast<Eigen::Index>(dims)));
  h.noise_variance = std::exp(theta(static_cast<Eigen::Index>(dims + 1)));
  return h;
}

void clamp_theta(VectorXd& theta, std::size_t dims) {
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const auto u = static_cast<std::size_t>(i);
    const double lo = u < dims ? kLogLenLo : u == dims ? kLogSigLo : kLogNoiseLo;
    const double hi = u < dims ? kLogLenHi : u == dims ? kLogSigHi : kLogNoiseHi;
    theta(i) = std::clamp(theta(i), lo, hi);
  }
}

/// Log marginal likelihood and its gradient in log-hyperparameter space.
std::optional<double> lml_and_grad(const std::vector<std::vector<double>>& x, const VectorXd& y,
                                   const VectorXd& theta, VectorXd* grad) {
  const std::size_t dims = x.front().size();
  const auto h = unpack(theta, dims);
  const MatrixXd k = kernel_matrix(x, h);
  const auto f = factorize(k, h.noise_variance);
  if (!f) return std::nullopt;
  const VectorXd alpha = f->llt.solve(y);
  const double lml = lml_of(*f, y, alpha);
  if (!std::isfinite(lml)) return std::nullopt;
  if (grad != nullptr) {
    const auto n = static_cast<Eigen::Index>(x.size());
    const MatrixXd w = alpha * alpha.transpose() - f->llt.solve(MatrixXd::Identity(n, n));
    grad->resize(theta.size());
    for (std::size_t d = 0; d < dims; ++d) {
      double g = 0.0;
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < i; ++j) {
          const double r = scaled_distance(x[i], x[j], h.length_scales);
          const double t = (x[i][d] - x[j][d]) / h.length_scales[d];
          const double dk = h.signal_variance * (5.0 / 3.0) * (1.0 + kSqrt5 * r) * std::exp(-kSqrt5 * r) * t * t;
          g += w(i, j) * dk;  // symmetric pair counted once, halving cancels
        }
      (*grad)(static_cast<Eigen::Index>(d)) = g;
    }
    (*grad)(static_cast<Eigen::Index>(dims)) = 0.5 * (w.array() * k.array()).sum();
    (*grad)(static_cast<Eigen::Index>(dims + 1)) = 0.5 * h.noise_variance * w.trace();
  }
  return lml;
}

}  // namespace

double matern52(std::span<const double> a, std::span<const double> b, const GpHyper& h) noexcept {
  const double r = scaled_distance(a, b, h.length_scales);
  return h.signal_variance * (1.0 + kSqrt5 * r + 5.0 / 3.0 * r * r) * std::exp(-kSqrt5 * r);
}

GaussianProcess GaussianProcess::prior(std::size_t dims, GpHyper hyper) {
  if (hyper.length_scales.size() != dims)
    throw Error(ErrorCode::DimensionMismatch, "one length scale per dimension is required");
  GaussianProcess gp;
  gp.dims_ = dims;
  gp.hyper_ = std::move(hyper);
  return gp;
}

GaussianProcess GaussianProcess::condition(std::vector<std::vector<double>> points, std::vector<double> values,
                                           GpHyper hyper) {
  if (points.size() != values.size()) throw Error(ErrorCode::DimensionMismatch, "points and values differ in count");
  const std::size_t dims = hyper.length_scales.size();
  for (const auto& p : points)
    if (p.size() != dims) throw Error(ErrorCode::DimensionMismatch, "point dimension differs from the kernel");
  for (double v : values)
    if (!std::isfinite(v)) throw Error(ErrorCode::InvalidConfig, "GP targets must be finite");

  GaussianProcess gp = prior(dims, std::move(hyper));
  if (points.empty()) return gp;
  const auto n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / n);
  gp.y_offset_ = mean;
  gp.y_scale_ = sd > 1e-12 ? sd : 1.0;

  VectorXd y(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) y(static_cast<Eigen::Index>(i)) = (values[i] - mean) / gp.y_scale_;
  const auto f = factorize(kernel_matrix(points, gp.hyper_), gp.hyper_.noise_variance);
  if (!f) throw Error(ErrorCode::DegenerateKernelMatrix, "kernel matrix not positive definite with jitter 1e-6");
  const VectorXd alpha = f->llt.solve(y);
  gp.alpha_.assign(alpha.data(), alpha.data() + alpha.size());
  const MatrixXd l = f->llt.matrixL();
  gp.chol_.resize(static_cast<std::size_t>(l.size()));
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(gp.chol_.data(), l.rows(),
                                                                                      l.cols()) = l;
  gp.jitter_ = f->jitter;
  gp.lml_ = lml_of(*f, y, alpha);
  gp.points_ = std::move(points);
  return gp;
}

GaussianProcess GaussianProcess::fit(std::vector<std::vector<double>> points, std::vector<double> values,
                                     std::uint64_t seed, std::size_t restarts) {
  if (points.size() < 2) throw Error(ErrorCode::InvalidConfig, "GP fit needs at least 2 points");
  if (points.size() != values.size()) throw Error(ErrorCode::DimensionMismatch, "points and values differ in count");
  const std::size_t dims = points.front().size();
  if (dims == 0) throw Error(ErrorCode::InvalidConfig, "zero-dimensional inputs");

  double mean = 0.0;
  for (double v : values) {
    if (!std::isfinite(v)) throw Error(ErrorCode::InvalidConfig, "GP targets must be finite");
    mean += v;
  }
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(values.size()));
  VectorXd y(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i)
    y(static_cast<Eigen::Index>(i)) = (values[i] - mean) / (sd > 1e-12 ? sd : 1.0);

  const auto p = static_cast<Eigen::Index>(dims + 2);
  Rng rng(mix_seed(seed, hash_tag("gp-restarts")));
  VectorXd best_theta;
  double best_lml = -std::numeric_limits<double>::infinity();
  for (std::size_t start = 0; start <= restarts; ++start) {
    VectorXd theta(p);
    if (start == 0) {
      theta.head(static_cast<Eigen::Index>(dims)).setConstant(std::log(0.3));
      theta(static_cast<Eigen::Index>(dims)) = 0.0;
      theta(static_cast<Eigen::Index>(dims + 1)) = std::log(1e-4);
    } else {
      for (Eigen::Index i = 0; i < p; ++i) {
        const auto u = static_cast<std::size_t>(i);
        theta(i) = u < dims ? rng.uniform(std::log(0.05), std::log(3.0))
                   : u == dims ? rng.uniform(-1.0, 1.0)
                               : rng.uniform(std::log(1e-6), std::log(1e-2));
      }
    }
    VectorXd grad;
    auto cur = lml_and_grad(points, y, theta, &grad);
    if (!cur) continue;
    double step = 0.5;
    for (int it = 0; it < 200 && step > 1e-5; ++it) {
      const double gn = grad.norm();
      if (!(gn > 1e-10)) break;
      VectorXd cand = theta + step * grad / gn;
      clamp_theta(cand, dims);
      VectorXd cand_grad;
      const auto v = lml_and_grad(points, y, cand, &cand_grad);
      if (v && *v > *cur) {
        theta = cand;
        grad = cand_grad;
        cur = v;
        step *= 1.3;
      } else {
        step *= 0.5;
      }
    }
    if (*cur > best_lml) {
      best_lml = *cur;
      best_theta = theta;
    }
  }
  if (best_theta.size() == 0)
    throw Error(ErrorCode::DegenerateKernelMatrix, "no hyperparameters give a positive-definite kernel matrix");
  return condition(std::move(points), std::move(values), unpack(best_theta, dims));
}

Prediction GaussianProcess::predict(std::span<const double> x) const {
  if (x.size() != dims_) throw Error(ErrorCode::DimensionMismatch, "query dimension differs from the GP");
  const std::size_t n = points_.size();
  if (n == 0) return {0.0, hyper_.signal_variance};
  std::vector<double> k(n);
  double mu = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    k[i] = matern52(points_[i], x, hyper_);
    mu += k[i] * alpha_[i];
  }
  // v = L^{-1} k by forward substitution.
  for (std::size_t i = 0; i < n; ++i) {
    double s = k[i];
    for (std::size_t j = 0; j < i; ++j) s -= chol_[i * n + j] * k[j];
    k[i] = s / chol_[i * n + i];
  }
  double var = hyper_.signal_variance;
  for (double v : k) var -= v * v;
  var = std::max(var, 0.0);
  return {y_offset_ + y_scale_ * mu, y_scale_ * y_scale_ * var};
}

double expected_improvement(double mean, double sigma, double f_best, double xi) noexcept {
  const double gain = mean - f_best - xi;
  if (!(sigma > 0.0)) return std::max(gain, 0.0);
  const double z = gain / sigma;
  const double cdf = 0.5 * std::erfc(-z / std::numbers::sqrt2);
  const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
  return std::max(gain * cdf + sigma * pdf, 0.0);
}

double expected_improvement(const GaussianProcess& gp, std::span<const double> x, double f_best, double xi) {
  const auto p = gp.predict(x);
  const double s = gp.target_scale();
  return s * expected_improvement((p.mean - gp.target_offset()) / s, std::sqrt(p.variance) / s,
                                  (f_best - gp.target_offset()) / s, xi);
}

double log_expected_improvement(double mean, double sigma, double f_best, double xi) noexcept {
  const double gain = mean - f_best - xi;
  if (!(sigma > 0.0)) return gain > 0.0 ? std::log(gain) : -std::numeric_limits<double>::infinity();
  const double z = gain / sigma;
  if (z > -8.0) return std::log(expected_improvement(z, 1.0, 0.0, 0.0)) + std::log(sigma);
  // With u = -z and Mills ratio R = Phi(-u) / phi(u), phi(z) + z Phi(z) =
  // phi(u) R T where T = 1/R - u; the continued fraction
  // 1/R = u + 1/(u + 2/(u + 3/(u + ...))) gives T without cancellation.
  const double u = -z;
  double g = u;
  for (int k = 99; k >= 1; --k) g = u + (k + 1) / g;
  const double t = 1.0 / g;
  return -0.5 * u * u - 0.5 * std::log(2.0 * std::numbers::pi) + std::log(t) - std::log(u + t) + std::log(sigma);
}

double log_expected_improvement(const GaussianProcess& gp, std::span<const double> x, double f_best, double xi) {
  const auto p = gp.predict(x);
  const double s = gp.target_scale();
  return std::log(s) + log_expected_improvement((p.mean - gp.target_offset()) / s, std::sqrt(p.variance) / s,
                                                (f_best - gp.target_offset()) / s, xi);
}

}  // namespace echoflag::bayesopt

#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace echoflag::bayesopt {

struct GpHyper {
  std::vector<double> length_scales;  // one per input dimension
  double signal_variance = 1.0;
  double noise_variance = 1e-6;
};

/// Matérn 5/2 ARD covariance.
double matern52(std::span<const double> a, std::span<const double> b, const GpHyper& h) noexcept;

struct Prediction {
  double mean = 0.0;
  double variance = 0.0;
};

/// Gaussian-process regression on the unit cube. Targets are centred and
/// scaled internally; predictions come back in the caller's units.
class GaussianProcess {
 public:
  static constexpr double kMaxJitter = 1e-6;

  /// Unconditioned GP: mean 0, variance = signal variance.
  static GaussianProcess prior(std::size_t dims, GpHyper hyper);

  /// Conditions on fixed hyperparameters. Throws DegenerateKernelMatrix when
  /// the kernel matrix stays indefinite after the jitter ladder.
  static GaussianProcess condition(std::vector<std::vector<double>> points, std::vector<double> values,
                                   GpHyper hyper);

  /// Hyperparameters by maximizing the log marginal likelihood (multi-start
  /// gradient ascent in log space), then conditions. Needs >= 2 points.
  static GaussianProcess fit(std::vector<std::vector<double>> points, std::vector<double> values,
                             std::uint64_t seed = 0, std::size_t restarts = 4);

  Prediction predict(std::span<const double> x) const;

  const GpHyper& hyper() const noexcept { return hyper_; }
  std::size_t dims() const noexcept { return dims_; }
  std::size_t size() const noexcept { return points_.size(); }
  double jitter() const noexcept { return jitter_; }
  /// Targets are modelled as offset + scale * z with z ~ GP.
  double target_offset() const noexcept { return y_offset_; }
  double target_scale() const noexcept { return y_scale_; }
  /// On the normalized targets.
  double log_marginal_likelihood() const noexcept { return lml_; }

 private:
  std::size_t dims_ = 0;
  GpHyper hyper_;
  std::vector<std::vector<double>> points_;
  double y_offset_ = 0.0;
  double y_scale_ = 1.0;
  std::vector<double> alpha_;
  std::vector<double> chol_;  // lower factor, row-major n x n
  double jitter_ = 0.0;
  double lml_ = 0.0;
};

/// Expected improvement for maximization with exploration margin xi.
double expected_improvement(double mean, double sigma, double f_best, double xi = 0.1) noexcept;
/// Same, with xi measured in standardized target units so the exploration
/// margin does not depend on the objective's scale.
double expected_improvement(const GaussianProcess& gp, std::span<const double> x, double f_best,
                            double xi = 0.1);

/// log EI, accurate where EI itself underflows; -inf when EI is exactly 0.
/// Used to rank candidates far in the tail of the posterior.
double log_expected_improvement(double mean, double sigma, double f_best, double xi = 0.1) noexcept;
double log_expected_improvement(const GaussianProcess& gp, std::span<const double> x, double f_best,
                                double xi = 0.1);

}  // namespace echoflag::bayesopt

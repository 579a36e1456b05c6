#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include <biphoton/timetag.hpp>

namespace biphoton {

/// Normalized second-order correlation. `normalization` is the accidental
/// expectation per bin (n_s*n_as*dt/T for cross-correlation) the counts were
/// divided by.
struct G2Curve {
  std::vector<double> taus_ps; // bin centers
  std::vector<double> g2;
  Histogram raw;
  double normalization = 0.0;
};

enum class FitWeighting { none, poisson };

struct FitOptions {
  std::optional<std::size_t> fit_start; // nullopt: start at the peak bin
  FitWeighting weighting = FitWeighting::none;
};

/// y(x) = y0 + A*exp(-x/tau) with y0 frozen to the trailing-20%-of-bins mean
/// before the least squares runs. tau_co_ps aliases tau_ps; linewidth_hz is
/// 1/(2*pi*tau_co) with tau in seconds.
struct ExpFitResult {
  double y0 = 0.0;
  double a = 0.0;
  double tau_ps = 0.0;
  double residual_rms = 0.0;
  std::size_t fit_start = 0;
  std::size_t fit_end = 0; // one past the last fitted bin
  double tau_co_ps = 0.0;
  double linewidth_hz = 0.0;
  FitWeighting weighting = FitWeighting::none;
  bool converged = false;
  std::size_t iterations = 0;
};

/// Histogram of delays d = t_as - t_s falling in
/// [t_min, t_min + n_bins*bin_width). Single linear sweep with a sliding
/// window over the sorted streams, never the O(N*M) cross product.
Histogram coincidence_histogram(const TimeTagStream& s, const TimeTagStream& as,
                                std::int64_t bin_width_ps, std::int64_t t_min_ps,
                                std::size_t n_bins);

/// Stationary-process estimator g2[k] = counts[k] * T / (n_s * n_as * dt).
/// Rejects zero singles or zero duration (undefined normalization).
G2Curve normalize_g2(const Histogram& h);

/// Maximum g2 value and the bin center where it occurs; ties break toward
/// smaller tau.
std::pair<double, double> g2_max(const G2Curve& c);

/// Same estimator on one stream against itself, self-pairing excluded;
/// normalization uses n(n-1) ordered pairs. Rejects streams with < 2 tags.
G2Curve autocorrelation(const TimeTagStream& s, std::int64_t bin_width_ps,
                        std::int64_t t_min_ps, std::size_t n_bins);

/// factor = g2sas_max^2 / (g2ss0 * g2asas0); > 1 certifies nonclassical
/// correlations. All inputs must be positive.
double cauchy_schwarz_factor(double g2sas_max, double g2ss0 = 2.0, double g2asas0 = 2.0);

ExpFitResult fit_exponential(const Histogram& h, const FitOptions& opts = {});
ExpFitResult fit_exponential(const G2Curve& c, const FitOptions& opts = {});

/// Shared implementation on raw samples; x must be strictly increasing and
/// evenly spaced bin centers.
ExpFitResult fit_exponential_xy(const std::vector<double>& x, const std::vector<double>& y,
                                const FitOptions& opts = {});

/// 1 / (2*pi*tau_co) with tau_co_ps converted to seconds.
double linewidth_from_tau(double tau_co_ps);

} // namespace biphoton

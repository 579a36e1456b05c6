#include <biphoton/correlation.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <biphoton/errors.hpp>

namespace biphoton {

namespace {

void check_window(std::int64_t bin_width_ps, std::int64_t t_min_ps, std::size_t n_bins,
                  std::int64_t duration_ps) {
  if (bin_width_ps <= 0) throw ValidationError("histogram: bin_width_ps must be > 0");
  if (n_bins < 1) throw ValidationError("histogram: n_bins must be >= 1");
  // Bound |t_min| + span + duration so every per-tag window edge stays
  // representable and the hot loop can use plain int64 arithmetic.
  const __int128 span = static_cast<__int128>(bin_width_ps) * static_cast<__int128>(n_bins);
  const __int128 worst = (t_min_ps < 0 ? -static_cast<__int128>(t_min_ps)
                                       : static_cast<__int128>(t_min_ps)) +
                         span + static_cast<__int128>(duration_ps);
  if (worst > static_cast<__int128>(std::numeric_limits<std::int64_t>::max()))
    throw ValidationError("histogram: delay window exceeds representable range");
}

} // namespace

Histogram coincidence_histogram(const TimeTagStream& s, const TimeTagStream& as,
                                std::int64_t bin_width_ps, std::int64_t t_min_ps,
                                std::size_t n_bins) {
  if (s.duration_ps != as.duration_ps)
    throw ValidationError("coincidence_histogram: stream durations differ");
  check_window(bin_width_ps, t_min_ps, n_bins, s.duration_ps);

  Histogram h;
  h.bin_width_ps = bin_width_ps;
  h.t_min_ps = t_min_ps;
  h.counts.assign(n_bins, 0);
  h.n_s = s.tags.size();
  h.n_as = as.tags.size();
  h.duration_ps = s.duration_ps;

  const std::int64_t span = bin_width_ps * static_cast<std::int64_t>(n_bins);
  const auto& a = s.tags;
  const auto& b = as.tags;
  std::size_t lo = 0, hi = 0;
  for (const TimeTag& tag : a) {
    const std::int64_t wlo = tag.t_ps + t_min_ps;
    const std::int64_t whi = wlo + span;
    while (lo < b.size() && b[lo].t_ps < wlo) ++lo;
    if (hi < lo) hi = lo;
    while (hi < b.size() && b[hi].t_ps < whi) ++hi;
    for (std::size_t j = lo; j < hi; ++j) {
      const auto k = static_cast<std::size_t>((b[j].t_ps - wlo) / bin_width_ps);
      ++h.counts[k];
    }
  }
  return h;
}

G2Curve normalize_g2(const Histogram& h) {
  if (h.n_s == 0 || h.n_as == 0)
    throw AnalysisError("normalize_g2: zero singles, normalization undefined (n_s=" +
                        std::to_string(h.n_s) + ", n_as=" + std::to_string(h.n_as) + ")");
  if (h.duration_ps <= 0) throw AnalysisError("normalize_g2: non-positive duration");

  G2Curve c;
  c.raw = h;
  // counts / (R_s * R_as * dt * T) with R_x = n_x / T, i.e. the accidental
  // expectation per bin for uncorrelated stationary streams.
  c.normalization = static_cast<double>(h.n_s) * static_cast<double>(h.n_as) *
                    static_cast<double>(h.bin_width_ps) / static_cast<double>(h.duration_ps);
  c.taus_ps.resize(h.counts.size());
  c.g2.resize(h.counts.size());
  for (std::size_t k = 0; k < h.counts.size(); ++k) {
    c.taus_ps[k] = h.bin_center_ps(k);
    c.g2[k] = static_cast<double>(h.counts[k]) / c.normalization;
  }
  return c;
}

std::pair<double, double> g2_max(const G2Curve& c) {
  if (c.g2.empty()) throw ValidationError("g2_max: empty curve");
  std::size_t best = 0;
  for (std::size_t k = 1; k < c.g2.size(); ++k)
    if (c.g2[k] > c.g2[best]) best = k; // strict: ties keep the smaller tau
  return {c.g2[best], c.taus_ps[best]};
}

G2Curve autocorrelation(const TimeTagStream& s, std::int64_t bin_width_ps,
                        std::int64_t t_min_ps, std::size_t n_bins) {
  check_window(bin_width_ps, t_min_ps, n_bins, s.duration_ps);
  const auto& a = s.tags;
  const auto n = a.size();
  if (n < 2)
    throw AnalysisError("autocorrelation: need >= 2 tags (self-pairs are excluded)");

  Histogram h;
  h.bin_width_ps = bin_width_ps;
  h.t_min_ps = t_min_ps;
  h.counts.assign(n_bins, 0);
  h.n_s = n;
  h.n_as = n - 1;
  h.duration_ps = s.duration_ps;

  const std::int64_t span = bin_width_ps * static_cast<std::int64_t>(n_bins);
  std::size_t lo = 0, hi = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::int64_t wlo = a[i].t_ps + t_min_ps;
    const std::int64_t whi = wlo + span;
    while (lo < n && a[lo].t_ps < wlo) ++lo;
    if (hi < lo) hi = lo;
    while (hi < n && a[hi].t_ps < whi) ++hi;
    for (std::size_t j = lo; j < hi; ++j) {
      if (j == i) continue; // a tag never pairs with itself
      const auto k = static_cast<std::size_t>((a[j].t_ps - wlo) / bin_width_ps);
      ++h.counts[k];
    }
  }

  G2Curve c;
  c.raw = h;
  // Ordered distinct pairs of a Poisson stream have expectation
  // n(n-1) * dt / T per bin, the unbiased analogue of the cross estimator.
  c.normalization = static_cast<double>(n) * static_cast<double>(n - 1) *
                    static_cast<double>(bin_width_ps) / static_cast<double>(s.duration_ps);
  c.taus_ps.resize(n_bins);
  c.g2.resize(n_bins);
  for (std::size_t k = 0; k < n_bins; ++k) {
    c.taus_ps[k] = h.bin_center_ps(k);
    c.g2[k] = static_cast<double>(h.counts[k]) / c.normalization;
  }
  return c;
}

double cauchy_schwarz_factor(double g2sas_max, double g2ss0, double g2asas0) {
  if (!(g2sas_max > 0.0) || !(g2ss0 > 0.0) || !(g2asas0 > 0.0))
    throw ValidationError("cauchy_schwarz_factor: all inputs must be positive");
  return g2sas_max * g2sas_max / (g2ss0 * g2asas0);
}

double linewidth_from_tau(double tau_co_ps) {
  if (!(tau_co_ps > 0.0)) throw ValidationError("linewidth_from_tau: tau must be > 0");
  return 1.0 / (2.0 * std::numbers::pi * tau_co_ps * 1e-12);
}

namespace {

struct LmFit {
  double a = 0.0;
  double log_tau = 0.0;
  double sse = std::numeric_limits<double>::infinity();
  bool converged = false;
  std::size_t iterations = 0;
};

double sse_of(const std::vector<double>& x, const std::vector<double>& y,
              const std::vector<double>& w, std::size_t start, double y0, double a,
              double tau) {
  double sse = 0.0;
  for (std::size_t i = start; i < x.size(); ++i) {
    const double r = y[i] - y0 - a * std::exp(-x[i] / tau);
    sse += w[i] * r * r;
  }
  return sse;
}

// Levenberg-Marquardt over (A, log tau); log keeps tau positive.
LmFit lm_minimize(const std::vector<double>& x, const std::vector<double>& y,
                  const std::vector<double>& w, std::size_t start, double y0, double a0,
                  double tau0) {
  constexpr std::size_t kMaxIters = 10000;
  constexpr double kStepTol = 1e-10;

  LmFit fit;
  fit.a = a0;
  fit.log_tau = std::log(tau0);
  fit.sse = sse_of(x, y, w, start, y0, a0, tau0);
  double lambda = 1e-3;

  for (std::size_t it = 0; it < kMaxIters; ++it) {
    fit.iterations = it + 1;
    const double tau = std::exp(fit.log_tau);
    double jtj00 = 0, jtj01 = 0, jtj11 = 0, jtr0 = 0, jtr1 = 0;
    for (std::size_t i = start; i < x.size(); ++i) {
      const double e = std::exp(-x[i] / tau);
      const double r = y[i] - y0 - fit.a * e;
      const double ja = e;                       // d model / dA
      const double jt = fit.a * (x[i] / tau) * e; // d model / d log(tau)
      jtj00 += w[i] * ja * ja;
      jtj01 += w[i] * ja * jt;
      jtj11 += w[i] * jt * jt;
      jtr0 += w[i] * ja * r;
      jtr1 += w[i] * jt * r;
    }

    bool stepped = false;
    for (int attempt = 0; attempt < 60; ++attempt) {
      const double m00 = jtj00 * (1.0 + lambda);
      const double m11 = jtj11 * (1.0 + lambda);
      const double det = m00 * m11 - jtj01 * jtj01;
      if (det == 0.0 || !std::isfinite(det)) break;
      const double da = (m11 * jtr0 - jtj01 * jtr1) / det;
      const double dt = (m00 * jtr1 - jtj01 * jtr0) / det;
      const double a_new = fit.a + da;
      const double lt_new = fit.log_tau + dt;
      const double sse_new = sse_of(x, y, w, start, y0, a_new, std::exp(lt_new));
      if (std::isfinite(sse_new) && sse_new <= fit.sse) {
        const double rel_step =
            std::max(std::abs(da) / std::max(std::abs(a_new), 1e-30), std::abs(dt));
        fit.a = a_new;
        fit.log_tau = lt_new;
        fit.sse = sse_new;
        lambda = std::max(lambda / 3.0, 1e-12);
        stepped = true;
        if (rel_step < kStepTol) {
          fit.converged = true;
          return fit;
        }
        break;
      }
      lambda *= 7.0;
    }
    if (!stepped) {
      // No downhill step found at any damping: stationary within tolerance.
      fit.converged = true;
      return fit;
    }
  }
  return fit; // iteration cap hit, converged stays false
}

} // namespace

ExpFitResult fit_exponential_xy(const std::vector<double>& x, const std::vector<double>& y,
                                const FitOptions& opts) {
  if (x.size() != y.size() || x.empty())
    throw ValidationError("fit_exponential: x/y size mismatch or empty");
  const std::size_t n = x.size();

  // Baseline comes from the data, not the fit: mean of the trailing 20%.
  const std::size_t tail = std::max<std::size_t>(1, n / 5);
  double y0 = 0.0;
  for (std::size_t i = n - tail; i < n; ++i) y0 += y[i];
  y0 /= static_cast<double>(tail);

  std::size_t start;
  if (opts.fit_start) {
    start = *opts.fit_start;
    if (start >= n) throw ValidationError("fit_exponential: fit_start out of range");
  } else {
    start = static_cast<std::size_t>(
        std::max_element(y.begin(), y.end()) - y.begin()); // first peak on ties
  }
  if (n - start < 4)
    throw ValidationError("fit_exponential: need >= 4 bins in the fit range");

  double ymax = 0.0;
  for (std::size_t i = start; i < n; ++i) ymax = std::max(ymax, std::abs(y[i]));
  if (ymax == 0.0)
    throw AnalysisError("fit_exponential: all-zero fit range");

  std::vector<double> w(n, 1.0);
  if (opts.weighting == FitWeighting::poisson)
    for (std::size_t i = 0; i < n; ++i) w[i] = 1.0 / std::max(y[i], 1.0);

  const double dt = n > 1 ? x[1] - x[0] : 1.0;
  const double window = x.back() - x.front() + dt;
  const double a0 = std::max(y[start] - y0, 1e-3 * std::max(ymax, 1.0));
  const std::array<double, 3> tau_starts = {dt, window / 10.0, window / 3.0};

  LmFit best;
  for (double tau0 : tau_starts) {
    const LmFit f = lm_minimize(x, y, w, start, y0, a0, tau0);
    if (f.sse < best.sse) best = f; // strict: first start wins ties
  }

  ExpFitResult r;
  r.y0 = y0;
  r.a = best.a;
  r.tau_ps = std::exp(best.log_tau);
  r.fit_start = start;
  r.fit_end = n;
  r.weighting = opts.weighting;
  r.iterations = best.iterations;
  r.converged = best.converged;
  if (r.a < 0.0) {
    // No decaying component; report the clamped amplitude but flag it.
    r.a = 0.0;
    r.converged = false;
  }
  double sse = 0.0;
  for (std::size_t i = start; i < n; ++i) {
    const double res = y[i] - r.y0 - r.a * std::exp(-x[i] / r.tau_ps);
    sse += res * res;
  }
  r.residual_rms = std::sqrt(sse / static_cast<double>(n - start));
  r.tau_co_ps = r.tau_ps;
  r.linewidth_hz = linewidth_from_tau(r.tau_ps);
  return r;
}

ExpFitResult fit_exponential(const Histogram& h, const FitOptions& opts) {
  std::vector<double> x(h.counts.size()), y(h.counts.size());
  for (std::size_t k = 0; k < h.counts.size(); ++k) {
    x[k] = h.bin_center_ps(k);
    y[k] = static_cast<double>(h.counts[k]);
  }
  return fit_exponential_xy(x, y, opts);
}

ExpFitResult fit_exponential(const G2Curve& c, const FitOptions& opts) {
  return fit_exponential_xy(c.taus_ps, c.g2, opts);
}

} // namespace biphoton

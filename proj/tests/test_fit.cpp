#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <biphoton/correlation.hpp>
#include <biphoton/errors.hpp>

using namespace biphoton;

namespace {

std::vector<double> centers(std::size_t n, double dt) {
  std::vector<double> x(n);
  for (std::size_t k = 0; k < n; ++k) x[k] = (double(k) + 0.5) * dt;
  return x;
}

std::vector<double> exp_samples(const std::vector<double>& x, double y0, double a,
                                double tau) {
  std::vector<double> y(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) y[k] = y0 + a * std::exp(-x[k] / tau);
  return y;
}

} // namespace

TEST_CASE("noiseless decay is recovered to high precision") {
  // 412 bins of 1.94 ns = 800 ns of data: the trailing-20% baseline estimate
  // sees e^(-16) of the amplitude, so the frozen y0 barely biases tau.
  auto x = centers(412, 1940.0);
  auto y = exp_samples(x, 0.0, 500.0, 40000.0);
  auto r = fit_exponential_xy(x, y);
  CHECK(r.converged);
  CHECK(std::abs(r.tau_ps - 40000.0) / 40000.0 < 1e-6);
  CHECK(std::abs(r.a - 500.0) / 500.0 < 1e-4);
  CHECK(r.residual_rms < 1e-3);
  CHECK(r.fit_start == 0); // peak of a pure decay is the first bin
  CHECK(r.fit_end == 412);
  CHECK(r.tau_co_ps == r.tau_ps);
  CHECK(r.linewidth_hz == doctest::Approx(1.0 / (2 * M_PI * r.tau_ps * 1e-12)));
}

TEST_CASE("nonzero baseline is taken from the trailing bins") {
  auto x = centers(412, 1940.0);
  auto y = exp_samples(x, 10.0, 500.0, 40000.0);
  auto r = fit_exponential_xy(x, y);
  CHECK(r.converged);
  CHECK(std::abs(r.y0 - 10.0) < 0.01); // tail still holds ~e^-16 of the decay
  CHECK(std::abs(r.tau_ps - 40000.0) / 40000.0 < 1e-4);
}

TEST_CASE("fit options are honored") {
  auto x = centers(206, 1940.0);
  auto y = exp_samples(x, 10.0, 500.0, 40000.0);

  FitOptions opts;
  opts.fit_start = 5;
  auto r = fit_exponential_xy(x, y, opts);
  CHECK(r.fit_start == 5);
  CHECK(std::abs(r.tau_ps - 40000.0) / 40000.0 < 1e-3);

  // Long window: the frozen trailing baseline is unbiased enough that the
  // tail-emphasizing Poisson weights still land on the true decay.
  auto xl = centers(412, 1940.0);
  auto yl = exp_samples(xl, 10.0, 500.0, 40000.0);
  opts.fit_start.reset();
  opts.weighting = FitWeighting::poisson;
  auto rw = fit_exponential_xy(xl, yl, opts);
  CHECK(rw.weighting == FitWeighting::poisson);
  CHECK(std::abs(rw.tau_ps - 40000.0) / 40000.0 < 1e-3);
}

TEST_CASE("fit input validation") {
  auto x = centers(206, 1940.0);
  auto y = exp_samples(x, 0.0, 500.0, 40000.0);
  CHECK_THROWS_AS(fit_exponential_xy({}, {}), ValidationError);
  auto y_short = y;
  y_short.pop_back();
  CHECK_THROWS_AS(fit_exponential_xy(x, y_short), ValidationError);

  FitOptions opts;
  opts.fit_start = 206;
  CHECK_THROWS_AS(fit_exponential_xy(x, y, opts), ValidationError);
  opts.fit_start = 204; // only 2 bins left
  CHECK_THROWS_AS(fit_exponential_xy(x, y, opts), ValidationError);

  std::vector<double> zx = centers(10, 100.0);
  std::vector<double> zy(10, 0.0);
  CHECK_THROWS_AS(fit_exponential_xy(zx, zy), AnalysisError);
}

TEST_CASE("a flat trace converges to zero amplitude") {
  auto x = centers(50, 1000.0);
  std::vector<double> y(50, 12.5);
  auto r = fit_exponential_xy(x, y);
  CHECK(r.converged);
  CHECK(std::abs(r.a) < 1e-6);
  CHECK(r.residual_rms < 1e-9);
  CHECK(r.tau_ps > 0.0);
}

TEST_CASE("histogram and normalized-curve fits agree on tau") {
  // The unweighted objective is scale-equivariant, so dividing the counts by
  // the accidental normalization must not move the decay constant.
  Histogram h;
  h.bin_width_ps = 1940;
  h.t_min_ps = 0;
  h.n_s = 50000;
  h.n_as = 60000;
  h.duration_ps = 20'000'000'000'000;
  h.counts.resize(206);
  for (std::size_t k = 0; k < h.counts.size(); ++k) {
    const double mu = 3.0 + 400.0 * std::exp(-h.bin_center_ps(k) / 40000.0);
    h.counts[k] = static_cast<std::uint64_t>(std::llround(mu));
  }
  auto rc = fit_exponential(h);
  auto curve = normalize_g2(h);
  auto rg = fit_exponential(curve);
  CHECK(std::abs(rc.tau_ps - rg.tau_ps) / rc.tau_ps < 1e-9);
  CHECK(rc.fit_start == rg.fit_start);
}

TEST_CASE("Poisson-noise recovery stays within a few percent") {
  std::mt19937_64 rng(3141);
  auto x = centers(206, 1940.0);
  std::vector<double> errs;
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> y(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
      const double mu = 10.0 + 500.0 * std::exp(-x[k] / 40000.0);
      y[k] = static_cast<double>(std::poisson_distribution<long>(mu)(rng));
    }
    auto r = fit_exponential_xy(x, y);
    REQUIRE(r.converged);
    errs.push_back(std::abs(r.tau_ps - 40000.0) / 40000.0);
  }
  std::sort(errs.begin(), errs.end());
  CHECK(errs[errs.size() / 2] < 0.03);
}

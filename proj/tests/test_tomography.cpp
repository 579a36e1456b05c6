#include <doctest.h>

#include <array>
#include <cmath>
#include <map>
#include <random>

#include <Eigen/Dense>

#include <biphoton/errors.hpp>
#include <biphoton/metrics.hpp>
#include <biphoton/oam.hpp>
#include <biphoton/tomography.hpp>

using namespace biphoton;
using cd = std::complex<double>;

namespace {

DensityMatrix random_physical_rho(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Matrix4cd a;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) a(i, j) = cd(n(rng), n(rng));
  Eigen::Matrix4cd rho = a * a.adjoint();
  return rho / rho.trace();
}

TomographyInput counts_from_state(const DensityMatrix& rho, double scale) {
  TomographyInput in;
  auto p = expected_probabilities(rho);
  for (std::size_t i = 0; i < 16; ++i)
    in.counts[i] = static_cast<std::uint64_t>(std::llround(scale * p[i]));
  in.accumulation_s = 1.0;
  return in;
}

double min_eigenvalue(const Eigen::Matrix4cd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(0.5 * (m + m.adjoint().eval()));
  return es.eigenvalues().minCoeff();
}

} // namespace

TEST_CASE("tomography_input_from_map wants all 16 settings") {
  std::map<std::pair<MeasurementMode, MeasurementMode>, std::uint64_t> counts;
  for (auto st : all_settings()) counts[{st.s, st.as}] = setting_index(st) + 1;
  auto in = tomography_input_from_map(counts, 2.5);
  CHECK(in.accumulation_s == 2.5);
  for (std::size_t i = 0; i < 16; ++i) CHECK(in.counts[i] == i + 1);

  counts.erase({MeasurementMode::P3, MeasurementMode::P2});
  try {
    tomography_input_from_map(counts);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("P3") != std::string::npos);
    CHECK(std::string(e.what()).find("P2") != std::string::npos);
  }
}

TEST_CASE("linear inversion undoes the forward model") {
  std::mt19937_64 rng(808);
  for (int trial = 0; trial < 10; ++trial) {
    auto rho = random_physical_rho(rng);
    auto in = counts_from_state(rho, 1e9); // rounding error ~1e-9 relative
    auto est = linear_inversion(in);
    CHECK((est - rho).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((est - est.adjoint()).norm() < 1e-9);
    CHECK(std::abs(est.trace().real() - 1.0) < 1e-6);
  }
}

TEST_CASE("linear inversion rejects zero basis counts") {
  TomographyInput in; // all zero
  CHECK_THROWS_AS(linear_inversion(in), AnalysisError);
}

TEST_CASE("T factor round trip for positive definite states") {
  std::mt19937_64 rng(809);
  for (int trial = 0; trial < 10; ++trial) {
    DensityMatrix rho =
        0.9 * random_physical_rho(rng) + 0.1 * maximally_mixed();
    Eigen::Matrix4cd t = detail::t_from_rho(rho);
    for (int i = 0; i < 4; ++i)
      for (int j = i + 1; j < 4; ++j) CHECK(std::abs(t(i, j)) < 1e-12);
    CHECK((t.adjoint() * t - rho).norm() < 1e-10);

    auto params = detail::params_from_t_matrix(t, std::log(1e4));
    CHECK((detail::rho_from_params(params) - rho).norm() < 1e-10);
    CHECK((detail::t_matrix_from_params(params) - t).norm() < 1e-12);
  }
  CHECK_THROWS_AS(detail::t_from_rho(Eigen::Matrix4cd::Zero()), AnalysisError);
}

TEST_CASE("log likelihood at T = identity matches a hand computation") {
  detail::MleParams p = detail::MleParams::Zero();
  p(0) = p(1) = p(2) = p(3) = 1.0; // T = I -> rho = I/4, every p_i = 1/4
  p(16) = std::log(100.0);         // flux 100 -> mu_i = 25

  std::array<std::uint64_t, 16> counts{};
  for (std::size_t i = 0; i < 16; ++i) counts[i] = i;

  double want_poisson = 0.0, want_gauss = 0.0;
  for (std::size_t i = 0; i < 16; ++i) {
    want_poisson += double(i) * std::log(25.0) - 25.0;
    want_gauss -= (double(i) - 25.0) * (double(i) - 25.0) /
                  (2.0 * std::max(double(i), 1.0));
  }
  CHECK(detail::log_likelihood(p, counts, Likelihood::poisson) ==
        doctest::Approx(want_poisson).epsilon(1e-12));
  CHECK(detail::log_likelihood(p, counts, Likelihood::gaussian) ==
        doctest::Approx(want_gauss).epsilon(1e-12));
}

TEST_CASE("analytic gradient matches central differences") {
  std::mt19937_64 rng(810);
  std::normal_distribution<double> n(0.0, 0.3);
  std::uniform_real_distribution<double> diag(0.2, 1.2);
  std::uniform_int_distribution<std::uint64_t> cdist(0, 2000);
  for (int trial = 0; trial < 5; ++trial) {
    detail::MleParams p;
    for (int k = 0; k < 4; ++k) p(k) = diag(rng);
    for (int k = 4; k < 16; ++k) p(k) = n(rng);
    p(16) = std::log(5000.0 + 1000.0 * trial);
    std::array<std::uint64_t, 16> counts{};
    for (auto& c : counts) c = cdist(rng);

    for (auto lk : {Likelihood::poisson, Likelihood::gaussian}) {
      auto g = detail::log_likelihood_gradient(p, counts, lk);
      detail::MleParams fd;
      for (int j = 0; j < 17; ++j) {
        const double h = 1e-5 * std::max(1.0, std::abs(p(j)));
        auto hi = p, lo = p;
        hi(j) += h;
        lo(j) -= h;
        fd(j) = (detail::log_likelihood(hi, counts, lk) -
                 detail::log_likelihood(lo, counts, lk)) /
                (2.0 * h);
      }
      CHECK((g - fd).norm() / std::max(g.norm(), 1e-12) < 1e-5);
    }
  }
}

TEST_CASE("MLE reconstructs the Bell state from exact counts") {
  auto in = counts_from_state(bell_state(), 1e6);
  auto res = mle_reconstruct(in);
  CHECK(res.converged);
  CHECK(res.multistarts == 5);
  CHECK(std::abs(res.rho.trace().real() - 1.0) < 1e-12);
  CHECK(min_eigenvalue(res.rho) > -1e-12);
  CHECK(fidelity(res.rho, bell_state()) >= 0.999);
  CHECK(concurrence(res.rho) >= 0.998);
}

TEST_CASE("MLE reconstructs the maximally mixed state with zero concurrence") {
  auto in = counts_from_state(maximally_mixed(), 1e6);
  auto res = mle_reconstruct(in);
  CHECK(res.converged);
  CHECK(fidelity(res.rho, maximally_mixed()) >= 0.999);
  CHECK(concurrence(res.rho) <= 1e-6);
}

TEST_CASE("MLE handles a rank-deficient product state") {
  Eigen::Vector4cd gg(1, 0, 0, 0);
  auto target = pure_state(gg);
  auto in = counts_from_state(target, 1e6);
  auto res = mle_reconstruct(in); // linear inversion is singular here
  CHECK(res.converged);
  CHECK(fidelity(res.rho, target) >= 0.999);
}

TEST_CASE("MLE input validation and determinism") {
  TomographyInput zeros;
  CHECK_THROWS_AS(mle_reconstruct(zeros), AnalysisError);

  auto in = counts_from_state(werner_state(0.8), 1e5);
  MleOptions bad;
  bad.multistarts = 0;
  CHECK_THROWS_AS(mle_reconstruct(in, bad), ValidationError);

  auto r1 = mle_reconstruct(in);
  auto r2 = mle_reconstruct(in);
  CHECK((r1.rho - r2.rho).norm() == 0.0);
  CHECK(r1.log_likelihood == r2.log_likelihood);
}

TEST_CASE("MLE output is physical on noisy counts") {
  std::mt19937_64 rng(811);
  for (int trial = 0; trial < 20; ++trial) {
    auto rho = random_physical_rho(rng);
    auto p = expected_probabilities(rho);
    TomographyInput in;
    for (std::size_t i = 0; i < 16; ++i)
      in.counts[i] = std::poisson_distribution<std::uint64_t>(1e4 * p[i] + 1e-9)(rng);
    auto res = mle_reconstruct(in);
    CHECK(std::abs(res.rho.trace().real() - 1.0) < 1e-9);
    CHECK(min_eigenvalue(res.rho) >= -1e-9);
    CHECK((res.rho - res.rho.adjoint()).norm() < 1e-12);
  }
}

#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>

#include <Eigen/Dense>

#include <biphoton/errors.hpp>
#include <biphoton/metrics.hpp>
#include <biphoton/oam.hpp>

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

Eigen::Vector4cd random_ket(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Vector4cd v;
  for (int i = 0; i < 4; ++i) v(i) = cd(n(rng), n(rng));
  return v / v.norm();
}

} // namespace

TEST_CASE("hermitian square root squares back") {
  std::mt19937_64 rng(111);
  for (int trial = 0; trial < 10; ++trial) {
    auto rho = random_physical_rho(rng);
    auto s = matrix_sqrt_hermitian(rho);
    CHECK((s * s - rho).norm() < 1e-10);
    CHECK((s - s.adjoint()).norm() < 1e-10);
  }
  Eigen::Matrix4cd neg = Eigen::Matrix4cd::Identity();
  neg(2, 2) = -0.5;
  CHECK_THROWS_AS(matrix_sqrt_hermitian(neg), ValidationError);
  Eigen::Matrix4cd nh = Eigen::Matrix4cd::Zero();
  nh(0, 1) = cd(1, 0);
  CHECK_THROWS_AS(matrix_sqrt_hermitian(nh), ValidationError);
}

TEST_CASE("fidelity agrees with overlap formulas") {
  CHECK(fidelity(bell_state(), bell_state()) == doctest::Approx(1.0).epsilon(1e-10));

  Eigen::Vector4cd gg(1, 0, 0, 0);
  auto rho_gg = pure_state(gg);
  CHECK(fidelity(rho_gg, bell_state()) == doctest::Approx(0.5).epsilon(1e-10));

  Eigen::Vector4cd gr(0, 1, 0, 0);
  CHECK(fidelity(pure_state(gr), rho_gg) == doctest::Approx(0.0).epsilon(1e-10));

  // pure targets reduce F to <psi|rho|psi>
  std::mt19937_64 rng(112);
  for (int trial = 0; trial < 10; ++trial) {
    auto rho = random_physical_rho(rng);
    auto psi = random_ket(rng);
    const double want = (psi.adjoint() * rho * psi)(0).real();
    CHECK(fidelity(rho, pure_state(psi)) == doctest::Approx(want).epsilon(1e-8));
    CHECK(fidelity(pure_state(psi), rho) == doctest::Approx(want).epsilon(1e-8));
    CHECK(fidelity(rho, rho) == doctest::Approx(1.0).epsilon(1e-8));
  }

  // Werner family against its Bell component: F = (1+3p)/4
  for (double p : {0.0, 0.3, 0.7, 0.9507, 1.0})
    CHECK(fidelity(werner_state(p), bell_state()) ==
          doctest::Approx((1.0 + 3.0 * p) / 4.0).epsilon(1e-10));
}

TEST_CASE("concurrence of pure states is 2|ad - bc|") {
  std::mt19937_64 rng(113);
  for (int trial = 0; trial < 10; ++trial) {
    auto psi = random_ket(rng);
    const double want = 2.0 * std::abs(psi(0) * psi(3) - psi(1) * psi(2));
    CHECK(concurrence(pure_state(psi)) == doctest::Approx(want).epsilon(1e-8));
  }
  CHECK(concurrence(bell_state()) == doctest::Approx(1.0).epsilon(1e-10));
  Eigen::Vector4cd gg(1, 0, 0, 0);
  CHECK(concurrence(pure_state(gg)) == doctest::Approx(0.0).epsilon(1e-10));
}

TEST_CASE("concurrence and purity of the Werner family") {
  for (double p : {0.0, 0.2, 1.0 / 3.0, 0.4, 0.7, 0.9507, 1.0}) {
    const double want_c = std::max(0.0, (3.0 * p - 1.0) / 2.0);
    CHECK(concurrence(werner_state(p)) == doctest::Approx(want_c).epsilon(1e-9));
    CHECK(purity(werner_state(p)) ==
          doctest::Approx(0.25 + 0.75 * p * p).epsilon(1e-10));
  }
  CHECK(purity(maximally_mixed()) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(purity(bell_state()) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("compute_metrics fills the report") {
  auto rho = werner_state(0.9);
  auto rep = compute_metrics(rho, bell_state(), "bell");
  CHECK(rep.target_label == "bell");
  CHECK(rep.fidelity == doctest::Approx((1.0 + 2.7) / 4.0).epsilon(1e-10));
  CHECK(rep.concurrence == doctest::Approx((2.7 - 1.0) / 2.0).epsilon(1e-9));
  CHECK(rep.purity == doctest::Approx(0.25 + 0.75 * 0.81).epsilon(1e-10));
  // eigenvalues descending, summing to one: (1+3p)/4 then three (1-p)/4
  CHECK(rep.eigenvalues[0] == doctest::Approx(0.925).epsilon(1e-10));
  for (int i = 1; i < 4; ++i)
    CHECK(rep.eigenvalues[i] == doctest::Approx(0.025).epsilon(1e-9));
  double sum = 0.0;
  for (double v : rep.eigenvalues) {
    sum += v;
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}

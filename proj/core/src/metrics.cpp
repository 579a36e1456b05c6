#include <biphoton/metrics.hpp>

#include <algorithm>
#include <cmath>

#include <biphoton/errors.hpp>

namespace biphoton {

namespace {

constexpr double kClampTol = 1e-9;

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

} // namespace

Eigen::Matrix4cd matrix_sqrt_hermitian(const Eigen::Matrix4cd& m) {
  if ((m - m.adjoint()).cwiseAbs().maxCoeff() > 1e-10)
    throw ValidationError("matrix_sqrt_hermitian: input not Hermitian");
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(m);
  Eigen::Vector4d ev = es.eigenvalues();
  if (ev.minCoeff() < -1e-6)
    throw ValidationError("matrix_sqrt_hermitian: eigenvalue below -1e-6, unphysical");
  for (int i = 0; i < 4; ++i) {
    // Sub-1e-12 magnitudes are eigensolver noise around rank deficiency.
    ev(i) = ev(i) < 1e-12 ? 0.0 : std::sqrt(ev(i));
  }
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
}

double fidelity(const DensityMatrix& rho1, const DensityMatrix& rho0) {
  require_physical(rho1);
  require_physical(rho0);
  const Eigen::Matrix4cd s1 = matrix_sqrt_hermitian(rho1);
  Eigen::Matrix4cd inner = s1 * rho0 * s1;
  // Theoretically Hermitian PSD; symmetrize away the rounding asymmetry.
  inner = 0.5 * (inner + inner.adjoint()).eval();
  const double f = matrix_sqrt_hermitian(inner).trace().real();
  const double f2 = f * f;
  if (f2 < -kClampTol || f2 > 1.0 + kClampTol)
    throw AnalysisError("fidelity: value outside [0,1] beyond tolerance");
  return clamp01(f2);
}

double concurrence(const DensityMatrix& rho) {
  require_physical(rho);
  // Y x Y in the computational basis is the real antidiagonal
  // diag-flip with signs (-1, 1, 1, -1).
  Eigen::Matrix4cd yy = Eigen::Matrix4cd::Zero();
  yy(0, 3) = -1.0;
  yy(1, 2) = 1.0;
  yy(2, 1) = 1.0;
  yy(3, 0) = -1.0;
  const Eigen::Matrix4cd rho_tilde = yy * rho.conjugate() * yy;

  // Hermitian route: eigenvalues of rho rho_tilde equal those of
  // sqrt(rho) rho_tilde sqrt(rho), which is Hermitian PSD.
  const Eigen::Matrix4cd sr = matrix_sqrt_hermitian(rho);
  Eigen::Matrix4cd m = sr * rho_tilde * sr;
  m = 0.5 * (m + m.adjoint()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(m, Eigen::EigenvaluesOnly);
  Eigen::Vector4d ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  std::sort(ev.data(), ev.data() + 4, std::greater<double>());
  const double c = ev(0) - ev(1) - ev(2) - ev(3);
  return clamp01(std::max(0.0, c));
}

double purity(const DensityMatrix& rho) {
  require_physical(rho);
  const double p = (rho * rho).trace().real();
  if (p < 0.25 - kClampTol || p > 1.0 + kClampTol)
    throw AnalysisError("purity: value outside [0.25, 1] beyond tolerance");
  return std::clamp(p, 0.25, 1.0);
}

MetricReport compute_metrics(const DensityMatrix& rho, const DensityMatrix& target,
                             const std::string& target_label) {
  MetricReport r;
  r.fidelity = fidelity(rho, target);
  r.concurrence = concurrence(rho);
  r.purity = purity(rho);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(rho, Eigen::EigenvaluesOnly);
  Eigen::Vector4d ev = es.eigenvalues();
  std::sort(ev.data(), ev.data() + 4, std::greater<double>());
  for (int i = 0; i < 4; ++i) r.eigenvalues[static_cast<std::size_t>(i)] = ev(i);
  r.target_label = target_label;
  return r;
}

} // namespace biphoton

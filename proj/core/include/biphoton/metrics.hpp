#pragma once

#include <array>
#include <string>

#include <Eigen/Dense>

#include <biphoton/oam.hpp>

namespace biphoton {

/// Principal square root via Hermitian eigendecomposition. Eigenvalues in
/// [-1e-6, 0) are treated as numerical noise and clamped to 0; anything
/// below -1e-6 is rejected as unphysical.
Eigen::Matrix4cd matrix_sqrt_hermitian(const Eigen::Matrix4cd& m);

/// F = Tr(sqrt(sqrt(rho1) rho0 sqrt(rho1)))^2, clamped to [0,1].
double fidelity(const DensityMatrix& rho1, const DensityMatrix& rho0);

/// Wootters concurrence C = max(0, l1-l2-l3-l4), l_i the decreasing square
/// roots of the eigenvalues of rho (YxY) rho* (YxY). Conjugation is taken in
/// the computational (|GG>..|RR>) basis.
double concurrence(const DensityMatrix& rho);

/// Tr[rho^2], in [0.25, 1] for physical two-qubit states.
double purity(const DensityMatrix& rho);

struct MetricReport {
  double fidelity = 0.0;
  double concurrence = 0.0;
  double purity = 0.0;
  std::array<double, 4> eigenvalues{}; // of the reconstructed state, descending
  std::string target_label;
};

MetricReport compute_metrics(const DensityMatrix& rho, const DensityMatrix& target,
                             const std::string& target_label);

} // namespace biphoton

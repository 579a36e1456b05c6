#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <utility>

#include <Eigen/Dense>

#include <biphoton/oam.hpp>

namespace biphoton {

/// The 16 coincidence counts of the tomography protocol, stored in
/// all_settings() order. accumulation_s is carried for reporting only.
struct TomographyInput {
  std::array<std::uint64_t, 16> counts{};
  double accumulation_s = 0.0;
};

/// Builds an input from a (mode_s, mode_as) -> counts map; throws
/// ValidationError naming the missing setting when any of the 16 is absent.
TomographyInput tomography_input_from_map(
    const std::map<std::pair<MeasurementMode, MeasurementMode>, std::uint64_t>& counts,
    double accumulation_s = 0.0);

/// Solves Tr[rho Pi_i] = counts_i / N for the Hermitian rho, with N the sum
/// of the {P1,P2}^2 counts. The result can have negative eigenvalues; it is
/// a diagnostic, not a state. Throws AnalysisError when N is zero.
Eigen::Matrix4cd linear_inversion(const TomographyInput& input);

enum class Likelihood { poisson, gaussian };

struct MleOptions {
  int multistarts = 5;
  std::uint64_t seed = 0x626970686f746full; // start-perturbation stream only
  double rel_tol = 1e-10;                   // relative log-likelihood improvement
  int max_iters = 10000;
  Likelihood likelihood = Likelihood::poisson;
};

struct TomographyResult {
  DensityMatrix rho;
  double log_likelihood = 0.0;
  int iterations = 0;
  bool converged = false;
  Eigen::Matrix4cd linear_inversion_rho;
  int multistarts = 0;
};

/// Maximum-likelihood reconstruction over rho = T'T / Tr[T'T] with T lower
/// triangular (16 real parameters) plus the overall flux as a 17th nuisance
/// parameter. PSD and unit trace hold exactly by construction. Throws
/// AnalysisError on all-zero counts.
TomographyResult mle_reconstruct(const TomographyInput& input, const MleOptions& opts = {});

namespace detail {

/// 16 T parameters (4 real diagonal, then Re/Im of the 6 subdiagonal entries
/// in row-major order) followed by nu = ln(flux).
using MleParams = Eigen::Matrix<double, 17, 1>;

Eigen::Matrix4cd t_matrix_from_params(const MleParams& p);
MleParams params_from_t_matrix(const Eigen::Matrix4cd& t, double nu);

/// rho = T'T / Tr[T'T] for the given parameter vector.
DensityMatrix rho_from_params(const MleParams& p);

/// Lower-triangular T with T'T = rho, via Cholesky of the antidiagonally
/// flipped matrix. rho must be positive definite.
Eigen::Matrix4cd t_from_rho(const DensityMatrix& rho);

double log_likelihood(const MleParams& p, const std::array<std::uint64_t, 16>& counts,
                      Likelihood lk = Likelihood::poisson);

/// Analytic gradient; validated against central finite differences in the
/// acceptance suite.
MleParams log_likelihood_gradient(const MleParams& p,
                                  const std::array<std::uint64_t, 16>& counts,
                                  Likelihood lk = Likelihood::poisson);

} // namespace detail

} // namespace biphoton

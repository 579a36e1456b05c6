#pragma once

#include <array>
#include <string>

#include <Eigen/Dense>

#include <biphoton/errors.hpp>

namespace biphoton {

/// 4x4 complex two-qubit state in the ordered basis (|GG>, |GR>, |RG>, |RR>),
/// |G>/|R> the l=0 / l=+1 OAM modes of each arm. Physical states are
/// Hermitian (1e-10), trace one (1e-10) and PSD (eigenvalues >= -1e-9).
using DensityMatrix = Eigen::Matrix4cd;

/// Projection modes realized by the vortex phase plate analyzers.
enum class MeasurementMode { P1, P2, P3, P4 };

/// Single-qubit analyzer ket in the (|G>, |R>) basis:
/// P1 = |G>, P2 = |R>, P3 = (|G>+|R>)/sqrt2, P4 = (|G>-i|R>)/sqrt2.
Eigen::Vector2cd mode_ket(MeasurementMode m);

const char* to_string(MeasurementMode m);
MeasurementMode mode_from_string(const std::string& name); // throws ValidationError

enum class Arm { stokes, anti_stokes };

/// One of the 16 analyzer configurations (Stokes mode, anti-Stokes mode).
struct Setting {
  MeasurementMode s;
  MeasurementMode as;
};

/// The 16 settings in protocol order: (P1,P1), (P1,P2), ... (P4,P4).
const std::array<Setting, 16>& all_settings();

/// Index of a setting in all_settings() order.
std::size_t setting_index(Setting st);

/// Rank-1 projector |m_s m_as><m_s m_as| on the two-qubit space.
Eigen::Matrix4cd projector(MeasurementMode m_s, MeasurementMode m_as);

/// p = <m_s m_as| rho |m_s m_as>, clamped to [0,1]. Rejects non-Hermitian rho.
double joint_pass_probability(const DensityMatrix& rho, MeasurementMode m_s,
                              MeasurementMode m_as);

/// p = Tr[rho (Pi x I)] or Tr[rho (I x Pi)], clamped to [0,1].
double marginal_pass_probability(const DensityMatrix& rho, MeasurementMode m, Arm arm);

/// Tr[rho Pi_i] for the 16 settings in all_settings() order, clamped to [0,1].
/// The four {P1,P2}^2 entries sum to 1 for any physical rho.
std::array<double, 16> expected_probabilities(const DensityMatrix& rho);

/// (|GG> + |RR>)/sqrt2, the post-beam-splitter target state.
DensityMatrix bell_state();

/// Pure state from an arbitrary 4-vector (normalized internally).
DensityMatrix pure_state(const Eigen::Vector4cd& psi);

DensityMatrix maximally_mixed();

/// p |Bell><Bell| + (1-p) I/4.
DensityMatrix werner_state(double p);

/// Throws ValidationError when rho is not Hermitian/trace-one/PSD within the
/// stated tolerances.
void require_physical(const DensityMatrix& rho, double herm_tol = 1e-10,
                      double trace_tol = 1e-10, double eig_floor = -1e-9);

bool is_physical(const DensityMatrix& rho, double herm_tol = 1e-10,
                 double trace_tol = 1e-10, double eig_floor = -1e-9);

} // namespace biphoton

#include <biphoton/oam.hpp>

#include <algorithm>
#include <cmath>

namespace biphoton {

using namespace std::complex_literals;

Eigen::Vector2cd mode_ket(MeasurementMode m) {
  const double isq2 = 1.0 / std::sqrt(2.0);
  switch (m) {
    case MeasurementMode::P1: return {1.0, 0.0};
    case MeasurementMode::P2: return {0.0, 1.0};
    case MeasurementMode::P3: return {isq2, isq2};
    case MeasurementMode::P4: return {isq2, -1i * isq2};
  }
  throw ValidationError("mode_ket: bad mode");
}

const char* to_string(MeasurementMode m) {
  switch (m) {
    case MeasurementMode::P1: return "P1";
    case MeasurementMode::P2: return "P2";
    case MeasurementMode::P3: return "P3";
    case MeasurementMode::P4: return "P4";
  }
  return "?";
}

MeasurementMode mode_from_string(const std::string& name) {
  if (name == "P1") return MeasurementMode::P1;
  if (name == "P2") return MeasurementMode::P2;
  if (name == "P3") return MeasurementMode::P3;
  if (name == "P4") return MeasurementMode::P4;
  throw ValidationError("unknown measurement mode '" + name + "' (expected P1..P4)");
}

const std::array<Setting, 16>& all_settings() {
  static const std::array<Setting, 16> table = [] {
    std::array<Setting, 16> t{};
    const MeasurementMode modes[] = {MeasurementMode::P1, MeasurementMode::P2,
                                     MeasurementMode::P3, MeasurementMode::P4};
    std::size_t k = 0;
    for (auto ms : modes)
      for (auto mas : modes) t[k++] = {ms, mas};
    return t;
  }();
  return table;
}

std::size_t setting_index(Setting st) {
  return 4 * static_cast<std::size_t>(st.s) + static_cast<std::size_t>(st.as);
}

static Eigen::Vector4cd joint_ket(MeasurementMode m_s, MeasurementMode m_as) {
  const Eigen::Vector2cd a = mode_ket(m_s);
  const Eigen::Vector2cd b = mode_ket(m_as);
  Eigen::Vector4cd v;
  v << a(0) * b(0), a(0) * b(1), a(1) * b(0), a(1) * b(1);
  return v;
}

Eigen::Matrix4cd projector(MeasurementMode m_s, MeasurementMode m_as) {
  const Eigen::Vector4cd v = joint_ket(m_s, m_as);
  return v * v.adjoint();
}

static void require_hermitian(const DensityMatrix& rho, double tol) {
  if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > tol)
    throw ValidationError("density matrix is not Hermitian within tolerance");
}

double joint_pass_probability(const DensityMatrix& rho, MeasurementMode m_s,
                              MeasurementMode m_as) {
  require_hermitian(rho, 1e-10);
  const Eigen::Vector4cd v = joint_ket(m_s, m_as);
  const std::complex<double> p = v.adjoint() * rho * v;
  // Hermitian quadratic form: imaginary part is numerical noise.
  if (std::abs(p.imag()) > 1e-12)
    throw ValidationError("joint_pass_probability: non-real expectation");
  return std::clamp(p.real(), 0.0, 1.0);
}

double marginal_pass_probability(const DensityMatrix& rho, MeasurementMode m, Arm arm) {
  require_hermitian(rho, 1e-10);
  const Eigen::Matrix2cd pi = mode_ket(m) * mode_ket(m).adjoint();
  // Basis index is 2*i_s + i_as, so Pi x I and I x Pi expand blockwise.
  Eigen::Matrix4cd op = Eigen::Matrix4cd::Zero();
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k) {
        if (arm == Arm::stokes)
          op(2 * i + k, 2 * j + k) = pi(i, j);
        else
          op(2 * k + i, 2 * k + j) = pi(i, j);
      }
  const double p = (rho * op).trace().real();
  return std::clamp(p, 0.0, 1.0);
}

std::array<double, 16> expected_probabilities(const DensityMatrix& rho) {
  require_hermitian(rho, 1e-10);
  std::array<double, 16> out{};
  for (std::size_t i = 0; i < 16; ++i) {
    const auto& st = all_settings()[i];
    out[i] = joint_pass_probability(rho, st.s, st.as);
  }
  return out;
}

DensityMatrix bell_state() {
  Eigen::Vector4cd psi;
  psi << 1.0, 0.0, 0.0, 1.0;
  return pure_state(psi);
}

DensityMatrix pure_state(const Eigen::Vector4cd& psi) {
  const double n = psi.norm();
  if (n <= 0.0) throw ValidationError("pure_state: zero vector");
  const Eigen::Vector4cd v = psi / n;
  return v * v.adjoint();
}

DensityMatrix maximally_mixed() { return DensityMatrix::Identity() / 4.0; }

DensityMatrix werner_state(double p) {
  if (p < 0.0 || p > 1.0) throw ValidationError("werner_state: p outside [0,1]");
  return p * bell_state() + (1.0 - p) * maximally_mixed();
}

bool is_physical(const DensityMatrix& rho, double herm_tol, double trace_tol,
                 double eig_floor) {
  if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > herm_tol) return false;
  if (std::abs(rho.trace().real() - 1.0) > trace_tol) return false;
  if (std::abs(rho.trace().imag()) > trace_tol) return false;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(rho, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() >= eig_floor;
}

void require_physical(const DensityMatrix& rho, double herm_tol, double trace_tol,
                      double eig_floor) {
  if (!is_physical(rho, herm_tol, trace_tol, eig_floor))
    throw ValidationError("density matrix violates Hermitian/trace/PSD invariants");
}

} // namespace biphoton

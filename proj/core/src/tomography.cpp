#include <biphoton/tomography.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <biphoton/errors.hpp>
#include <biphoton/rng.hpp>

namespace biphoton {

TomographyInput tomography_input_from_map(
    const std::map<std::pair<MeasurementMode, MeasurementMode>, std::uint64_t>& counts,
    double accumulation_s) {
  TomographyInput in;
  in.accumulation_s = accumulation_s;
  for (const auto& st : all_settings()) {
    const auto it = counts.find({st.s, st.as});
    if (it == counts.end())
      throw ValidationError(std::string("tomography input: missing setting (") +
                            to_string(st.s) + "," + to_string(st.as) + ")");
    in.counts[setting_index(st)] = it->second;
  }
  return in;
}

namespace {

const std::array<Eigen::Matrix4cd, 16>& setting_projectors() {
  static const std::array<Eigen::Matrix4cd, 16> table = [] {
    std::array<Eigen::Matrix4cd, 16> t;
    for (std::size_t i = 0; i < 16; ++i) {
      const auto& st = all_settings()[i];
      t[i] = projector(st.s, st.as);
    }
    return t;
  }();
  return table;
}

// Hermitian <-> 16 real parameters: 4 diagonal entries, then Re/Im of the
// 6 upper-triangle entries (i<j) in row-major order.
constexpr std::array<std::pair<int, int>, 6> kOffDiag = {
    {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}};

std::uint64_t norm_sum(const TomographyInput& input) {
  using M = MeasurementMode;
  return input.counts[setting_index({M::P1, M::P1})] +
         input.counts[setting_index({M::P1, M::P2})] +
         input.counts[setting_index({M::P2, M::P1})] +
         input.counts[setting_index({M::P2, M::P2})];
}

} // namespace

Eigen::Matrix4cd linear_inversion(const TomographyInput& input) {
  const std::uint64_t nhat = norm_sum(input);
  if (nhat == 0)
    throw AnalysisError("linear_inversion: {P1,P2}^2 counts sum to zero");

  // Tr[H Pi] is linear in the 16 real parameters of Hermitian H:
  // sum_k H_kk Pi_kk + sum_{i<j} 2(Re H_ij Re Pi_ij + Im H_ij Im Pi_ij).
  Eigen::Matrix<double, 16, 16> m;
  Eigen::Matrix<double, 16, 1> phat;
  const auto& pis = setting_projectors();
  for (int row = 0; row < 16; ++row) {
    const Eigen::Matrix4cd& pi = pis[static_cast<std::size_t>(row)];
    for (int k = 0; k < 4; ++k) m(row, k) = pi(k, k).real();
    for (int q = 0; q < 6; ++q) {
      const auto [i, j] = kOffDiag[static_cast<std::size_t>(q)];
      m(row, 4 + 2 * q) = 2.0 * pi(i, j).real();
      m(row, 5 + 2 * q) = 2.0 * pi(i, j).imag();
    }
    phat(row) = static_cast<double>(input.counts[static_cast<std::size_t>(row)]) /
                static_cast<double>(nhat);
  }

  const Eigen::Matrix<double, 16, 1> theta = m.fullPivLu().solve(phat);

  Eigen::Matrix4cd h = Eigen::Matrix4cd::Zero();
  for (int k = 0; k < 4; ++k) h(k, k) = theta(k);
  for (int q = 0; q < 6; ++q) {
    const auto [i, j] = kOffDiag[static_cast<std::size_t>(q)];
    h(i, j) = std::complex<double>(theta(4 + 2 * q), theta(5 + 2 * q));
    h(j, i) = std::conj(h(i, j));
  }
  return h;
}

namespace detail {

Eigen::Matrix4cd t_matrix_from_params(const MleParams& p) {
  Eigen::Matrix4cd t = Eigen::Matrix4cd::Zero();
  for (int k = 0; k < 4; ++k) t(k, k) = p(k);
  // Subdiagonal (j>k) row-major: (1,0) (2,0) (2,1) (3,0) (3,1) (3,2).
  constexpr std::array<std::pair<int, int>, 6> sub = {
      {{1, 0}, {2, 0}, {2, 1}, {3, 0}, {3, 1}, {3, 2}}};
  for (int q = 0; q < 6; ++q) {
    const auto [j, k] = sub[static_cast<std::size_t>(q)];
    t(j, k) = std::complex<double>(p(4 + 2 * q), p(5 + 2 * q));
  }
  return t;
}

MleParams params_from_t_matrix(const Eigen::Matrix4cd& t, double nu) {
  MleParams p;
  for (int k = 0; k < 4; ++k) p(k) = t(k, k).real();
  constexpr std::array<std::pair<int, int>, 6> sub = {
      {{1, 0}, {2, 0}, {2, 1}, {3, 0}, {3, 1}, {3, 2}}};
  for (int q = 0; q < 6; ++q) {
    const auto [j, k] = sub[static_cast<std::size_t>(q)];
    p(4 + 2 * q) = t(j, k).real();
    p(5 + 2 * q) = t(j, k).imag();
  }
  p(16) = nu;
  return p;
}

DensityMatrix rho_from_params(const MleParams& p) {
  const Eigen::Matrix4cd t = t_matrix_from_params(p);
  const Eigen::Matrix4cd tt = t.adjoint() * t;
  const double tr = tt.trace().real();
  if (!(tr > 0.0)) throw AnalysisError("mle: T'T has zero trace");
  return tt / tr;
}

Eigen::Matrix4cd t_from_rho(const DensityMatrix& rho) {
  // With P the antidiagonal flip, P rho P = L L' gives the lower-triangular
  // T = P L' P satisfying T'T = rho.
  Eigen::Matrix4cd flip = Eigen::Matrix4cd::Zero();
  for (int i = 0; i < 4; ++i) flip(i, 3 - i) = 1.0;
  const Eigen::Matrix4cd b = flip * rho * flip;
  const Eigen::LLT<Eigen::Matrix4cd> llt(b);
  if (llt.info() != Eigen::Success)
    throw AnalysisError("t_from_rho: matrix not positive definite");
  const Eigen::Matrix4cd l = llt.matrixL();
  return flip * l.adjoint() * flip;
}

namespace {

struct Forward {
  std::array<double, 16> q;  // Tr[T'T Pi_i]
  double trace;              // Tr[T'T]
  std::array<double, 16> p;  // q / trace, clamped away from 0
};

constexpr double kProbFloor = 1e-12;

Forward forward_model(const Eigen::Matrix4cd& t) {
  Forward f;
  const Eigen::Matrix4cd tt = t.adjoint() * t;
  f.trace = tt.trace().real();
  const auto& pis = setting_projectors();
  for (std::size_t i = 0; i < 16; ++i) {
    f.q[i] = (tt * pis[i]).trace().real();
    f.p[i] = std::max(f.q[i] / f.trace, kProbFloor);
  }
  return f;
}

} // namespace

double log_likelihood(const MleParams& p, const std::array<std::uint64_t, 16>& counts,
                      Likelihood lk) {
  const Forward f = forward_model(t_matrix_from_params(p));
  const double flux = std::exp(p(16));
  double ll = 0.0;
  if (lk == Likelihood::poisson) {
    for (std::size_t i = 0; i < 16; ++i) {
      const double mu = flux * f.p[i];
      ll += static_cast<double>(counts[i]) * std::log(mu) - mu;
    }
  } else {
    for (std::size_t i = 0; i < 16; ++i) {
      const double c = static_cast<double>(counts[i]);
      const double mu = flux * f.p[i];
      const double var = std::max(c, 1.0);
      ll -= (c - mu) * (c - mu) / (2.0 * var);
    }
  }
  return ll;
}

MleParams log_likelihood_gradient(const MleParams& p,
                                  const std::array<std::uint64_t, 16>& counts,
                                  Likelihood lk) {
  const Eigen::Matrix4cd t = t_matrix_from_params(p);
  const Forward f = forward_model(t);
  const double flux = std::exp(p(16));

  // dLL/dp_i and dLL/dnu for the chosen likelihood.
  std::array<double, 16> dl_dp{};
  double dl_dnu = 0.0;
  for (std::size_t i = 0; i < 16; ++i) {
    const double c = static_cast<double>(counts[i]);
    const double mu = flux * f.p[i];
    if (lk == Likelihood::poisson) {
      dl_dp[i] = (f.p[i] > kProbFloor) ? (c / f.p[i] - flux) : 0.0;
      dl_dnu += c - mu;
    } else {
      const double var = std::max(c, 1.0);
      dl_dp[i] = (f.p[i] > kProbFloor) ? (c - mu) / var * flux : 0.0;
      dl_dnu += (c - mu) / var * mu;
    }
  }

  // dq_i/dT via S = Pi_i T': dq/dRe T_jk = 2 Re S_kj, dq/dIm T_jk = -2 Im S_kj;
  // d trace / dT_jk = 2 T_jk (as a real pair).
  const auto& pis = setting_projectors();
  std::array<Eigen::Matrix4cd, 16> s;
  const Eigen::Matrix4cd tadj = t.adjoint();
  for (std::size_t i = 0; i < 16; ++i) s[i] = pis[i] * tadj;

  auto grad_entry = [&](int j, int k, bool imag_part) {
    double g = 0.0;
    const double dtr = 2.0 * (imag_part ? t(j, k).imag() : t(j, k).real());
    for (std::size_t i = 0; i < 16; ++i) {
      const double dq = imag_part ? -2.0 * s[i](k, j).imag() : 2.0 * s[i](k, j).real();
      const double dp = (dq - f.q[i] / f.trace * dtr) / f.trace;
      g += dl_dp[i] * dp;
    }
    return g;
  };

  MleParams grad;
  for (int k = 0; k < 4; ++k) grad(k) = grad_entry(k, k, false);
  constexpr std::array<std::pair<int, int>, 6> sub = {
      {{1, 0}, {2, 0}, {2, 1}, {3, 0}, {3, 1}, {3, 2}}};
  for (int q = 0; q < 6; ++q) {
    const auto [j, k] = sub[static_cast<std::size_t>(q)];
    grad(4 + 2 * q) = grad_entry(j, k, false);
    grad(5 + 2 * q) = grad_entry(j, k, true);
  }
  grad(16) = dl_dnu;
  return grad;
}

} // namespace detail

namespace {

struct OptimResult {
  detail::MleParams params;
  double ll = -std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
};

// BFGS on f = -LL with Armijo backtracking. 17 parameters, dense inverse
// Hessian approximation.
OptimResult bfgs_maximize(const detail::MleParams& start,
                          const std::array<std::uint64_t, 16>& counts,
                          const MleOptions& opts) {
  using Vec = detail::MleParams;
  using Mat = Eigen::Matrix<double, 17, 17>;

  OptimResult out;
  Vec x = start;
  double f = -detail::log_likelihood(x, counts, opts.likelihood);
  Vec g = -detail::log_likelihood_gradient(x, counts, opts.likelihood);
  Mat h = Mat::Identity();

  for (int it = 0; it < opts.max_iters; ++it) {
    out.iterations = it + 1;
    Vec d = -(h * g);
    if (d.dot(g) >= 0.0) { // safeguard against a corrupted curvature estimate
      h = Mat::Identity();
      d = -g;
    }

    // Armijo backtracking.
    double step = 1.0;
    const double slope = g.dot(d);
    double f_new = f;
    Vec x_new = x;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      x_new = x + step * d;
      f_new = -detail::log_likelihood(x_new, counts, opts.likelihood);
      if (std::isfinite(f_new) && f_new <= f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break; // no progress possible along this direction

    const Vec g_new = -detail::log_likelihood_gradient(x_new, counts, opts.likelihood);
    const Vec s = x_new - x;
    const Vec y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      const Mat ident = Mat::Identity();
      h = (ident - rho * s * y.transpose()) * h * (ident - rho * y * s.transpose()) +
          rho * s * s.transpose();
    } // else: skip update; T has a scale-ray degeneracy that can zero out sy

    const double improvement = f - f_new;
    x = x_new;
    g = g_new;
    f = f_new;
    if (improvement >= 0.0 &&
        improvement <= opts.rel_tol * std::max(1.0, std::abs(f))) {
      out.converged = true;
      break;
    }
  }

  out.params = x;
  out.ll = -f;
  return out;
}

} // namespace

TomographyResult mle_reconstruct(const TomographyInput& input, const MleOptions& opts) {
  std::uint64_t total = 0;
  for (auto c : input.counts) total += c;
  if (total == 0) throw AnalysisError("mle_reconstruct: all 16 counts are zero");
  if (opts.multistarts < 1)
    throw ValidationError("mle_reconstruct: multistarts must be >= 1");

  TomographyResult result;
  result.multistarts = opts.multistarts;

  // Flux starts at the {P1,P2}^2 sum, which estimates N when the four basis
  // settings partition the pair flux; fall back to total/4 for odd inputs.
  const std::uint64_t nhat = norm_sum(input);
  const double flux0 = std::max(
      {static_cast<double>(nhat), static_cast<double>(total) / 4.0, 1.0});
  const double nu0 = std::log(flux0);

  // Start 1: linear inversion, eigenvalue-clamped into the PD cone.
  std::vector<detail::MleParams> starts;
  try {
    Eigen::Matrix4cd li = linear_inversion(input);
    result.linear_inversion_rho = li;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(li);
    Eigen::Vector4d ev = es.eigenvalues().cwiseMax(1e-6);
    Eigen::Matrix4cd clamped =
        es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
    clamped /= clamped.trace().real();
    starts.push_back(detail::params_from_t_matrix(detail::t_from_rho(clamped), nu0));
  } catch (const AnalysisError&) {
    result.linear_inversion_rho = maximally_mixed();
    starts.push_back(
        detail::params_from_t_matrix(detail::t_from_rho(maximally_mixed()), nu0));
  }

  // Remaining starts: random lower-triangular T, scaled to unit trace.
  Xoshiro256pp rng = derive_stream(opts.seed, "mle_starts");
  while (starts.size() < static_cast<std::size_t>(opts.multistarts)) {
    detail::MleParams p;
    for (int k = 0; k < 16; ++k) p(k) = 2.0 * uniform_open01(rng) - 1.0;
    for (int k = 0; k < 4; ++k) p(k) = std::abs(p(k)) + 0.05;
    p(16) = nu0;
    // Normalize so T'T has trace ~1; keeps all starts on a comparable scale.
    const Eigen::Matrix4cd t = detail::t_matrix_from_params(p);
    const double tr = (t.adjoint() * t).trace().real();
    for (int k = 0; k < 16; ++k) p(k) /= std::sqrt(tr);
    starts.push_back(p);
  }

  OptimResult best;
  for (const auto& s : starts) {
    const OptimResult r = bfgs_maximize(s, input.counts, opts);
    if (r.ll > best.ll) best = r;
  }

  result.rho = detail::rho_from_params(best.params);
  result.log_likelihood = best.ll;
  result.iterations = best.iterations;
  result.converged = best.converged;
  return result;
}

} // namespace biphoton

#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <utility>

#include <biphoton/errors.hpp>
#include <biphoton/oam.hpp>
#include <biphoton/rng.hpp>
#include <biphoton/timetag.hpp>

namespace biphoton {

/// Full stochastic model of one run: pair emission is a homogeneous Poisson
/// process, the anti-Stokes photon trails the Stokes one by a one-sided
/// exponential delay (mean tau_co_ps), each arm is thinned by its collection
/// efficiency, an optional analyzer setting projects the OAM state, and
/// independent Poisson noise is added per arm.
struct SourceConfig {
  double pair_rate_hz = 0.0;   // generated pairs per second, before losses
  double tau_co_ps = 40000.0;  // 1/e biphoton wave-packet decay
  double eta_s = 1.0;
  double eta_as = 1.0;
  double noise_s_hz = 0.0;
  double noise_as_hz = 0.0;
  std::int64_t duration_ps = 0;
  DensityMatrix rho = bell_state();
  std::optional<Setting> setting; // nullopt: no projection, all pairs pass
  std::uint64_t seed = 0;
};

/// Throws ValidationError on non-finite rates, eta outside [0,1],
/// tau_co <= 0, duration <= 0, or unphysical rho.
void validate_config(const SourceConfig& cfg);

/// Exponential biphoton delay with mean tau_co_ps, rounded to integer ps.
/// The boundary draw u=1 maps to delay 0.
template <class Urbg>
std::int64_t sample_pair_delay(Urbg& g, double tau_co_ps) {
  if (!(tau_co_ps > 0.0))
    throw ValidationError("sample_pair_delay: tau_co_ps must be > 0");
  return std::llround(-tau_co_ps * std::log(uniform_open01(g)));
}

/// Monte Carlo run. Deterministic for fixed config+seed: identical inputs
/// produce bit-identical streams. Returns (stokes, anti_stokes).
std::pair<TimeTagStream, TimeTagStream> simulate(const SourceConfig& cfg);

/// Analytic expectation pair_rate * duration * eta_s * eta_as * p_joint,
/// the oracle the Monte Carlo counts are tested against.
double expected_setting_counts(const SourceConfig& cfg, Setting st);

} // namespace biphoton

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <biphoton/oam.hpp>
#include <biphoton/source_sim.hpp>

namespace biphoton {

/// Every tunable of the toolkit, flattened to match the flat `key = value`
/// config file format (units spelled in the key names). Defaults reproduce
/// the paper-like regime; absolute rates are assumptions, not paper values.
struct Params {
  // source model
  double pair_rate_hz = 20000.0;
  double tau_co_ps = 40000.0;
  double eta_s = 0.040;
  double eta_as = 0.032;
  double noise_s_hz = 4000.0;
  double noise_as_hz = 4235.0;
  std::int64_t duration_ps = 160'000'000'000'000; // 160 s
  std::string target_state = "bell"; // bell | bell_source | mixed | werner
  double werner_p = 0.95;
  std::string setting_s = "none"; // none | P1..P4
  std::string setting_as = "none";

  // correlation analysis
  std::int64_t bin_width_ps = 1940;
  std::int64_t t_min_ps = 0;
  std::int64_t n_bins = 206;
  std::string fit_start = "auto"; // auto | <bin index>
  std::string fit_weighting = "none"; // none | poisson
  double g2_ss0 = 2.0;   // assumed thermal autocorrelation values
  double g2_asas0 = 2.0;

  // tomography
  std::int64_t coincidence_window_ps = 40000;
  std::int64_t tomo_duration_per_setting_ps = 160'000'000'000'000;

  // output
  bool write_binary_tags = false;

  // stochastic (excluded from the config hash)
  std::uint64_t seed = 1;
};

/// Reads a flat `key = value` file ('#' comments, blank lines allowed).
/// Duplicate keys keep the last value.
std::vector<std::pair<std::string, std::string>> read_kv_file(
    const std::filesystem::path& p);

/// Applies key/value pairs onto params. Unknown keys and unparsable values
/// are rejected.
void apply_kv(Params& params, const std::vector<std::pair<std::string, std::string>>& kv);

/// Named presets; only "paper" exists. It pins the paper-stated knobs
/// (1.94 ns bins, 160 s accumulation, tau_co = 40 ns, eta 4.0%/3.2%) and
/// fills the unstated rates with documented assumptions.
void apply_preset(Params& params, const std::string& name);

/// Canonical (key, value) serialization, fixed order, seed included.
std::vector<std::pair<std::string, std::string>> serialize_config(const Params& params);

/// FNV-1a over the canonical serialization minus the seed, so reseeding a
/// run never changes its config identity. Format "fnv1a64:<16 hex digits>".
std::string config_hash(const Params& params);

/// Target state selected by target_state/werner_p.
DensityMatrix target_density_matrix(const Params& params);

/// Human-readable coordinate frame note for the chosen target.
std::string target_frame_note(const Params& params);

/// SourceConfig for the main (correlation) run; setting from
/// setting_s/setting_as, "none" meaning no projection.
SourceConfig make_source_config(const Params& params);

} // namespace biphoton

#include <biphoton/source_sim.hpp>

#include <algorithm>
#include <string>
#include <vector>

namespace biphoton {

void validate_config(const SourceConfig& cfg) {
  auto finite_nonneg = [](double v) { return std::isfinite(v) && v >= 0.0; };
  if (!finite_nonneg(cfg.pair_rate_hz))
    throw ValidationError("source config: pair_rate_hz must be finite and >= 0");
  if (!(std::isfinite(cfg.tau_co_ps) && cfg.tau_co_ps > 0.0))
    throw ValidationError("source config: tau_co_ps must be finite and > 0");
  if (!(cfg.eta_s >= 0.0 && cfg.eta_s <= 1.0 && cfg.eta_as >= 0.0 && cfg.eta_as <= 1.0))
    throw ValidationError("source config: eta_s/eta_as must lie in [0,1]");
  if (!finite_nonneg(cfg.noise_s_hz) || !finite_nonneg(cfg.noise_as_hz))
    throw ValidationError("source config: noise rates must be finite and >= 0");
  if (cfg.duration_ps <= 0)
    throw ValidationError("source config: duration_ps must be > 0");
  require_physical(cfg.rho);
}

namespace {

constexpr double kPsPerSecond = 1e12;

// Homogeneous Poisson tags over [0, duration), sorted by construction.
std::vector<TimeTag> poisson_tags(Xoshiro256pp& g, double rate_hz,
                                  std::int64_t duration_ps, Channel ch) {
  std::vector<TimeTag> out;
  if (rate_hz <= 0.0) return out;
  const double mean_gap_ps = kPsPerSecond / rate_hz;
  out.reserve(static_cast<std::size_t>(
      1.1 * rate_hz * static_cast<double>(duration_ps) / kPsPerSecond + 16.0));
  double t = 0.0;
  for (;;) {
    t += exp_interval(g, mean_gap_ps);
    const std::int64_t tp = std::llround(t);
    if (tp >= duration_ps) break;
    out.push_back({ch, tp});
  }
  return out;
}

} // namespace

std::pair<TimeTagStream, TimeTagStream> simulate(const SourceConfig& cfg) {
  validate_config(cfg);

  double p_joint = 1.0, p_s = 1.0, p_as = 1.0;
  if (cfg.setting) {
    p_joint = joint_pass_probability(cfg.rho, cfg.setting->s, cfg.setting->as);
    p_s = marginal_pass_probability(cfg.rho, cfg.setting->s, Arm::stokes);
    p_as = marginal_pass_probability(cfg.rho, cfg.setting->as, Arm::anti_stokes);
  }
  // Joint and marginal detection probabilities per generated pair. A lost or
  // projected-away partner still leaves its mate detectable at the marginal
  // rate; that is what produces the experiment's uncorrelated singles floor.
  const double prob_both = p_joint * cfg.eta_s * cfg.eta_as;
  const double prob_s_only = p_s * cfg.eta_s - prob_both;
  const double prob_as_only = p_as * cfg.eta_as - prob_both;

  Xoshiro256pp pair_rng = derive_stream(cfg.seed, "pairs");
  Xoshiro256pp noise_s_rng = derive_stream(cfg.seed, "noise_s");
  Xoshiro256pp noise_as_rng = derive_stream(cfg.seed, "noise_as");

  std::vector<TimeTag> sig_s, sig_as;
  std::uint64_t pairs_generated = 0, pairs_detected = 0;
  if (cfg.pair_rate_hz > 0.0) {
    const double mean_gap_ps = kPsPerSecond / cfg.pair_rate_hz;
    const double expected =
        cfg.pair_rate_hz * static_cast<double>(cfg.duration_ps) / kPsPerSecond;
    sig_s.reserve(static_cast<std::size_t>(expected * cfg.eta_s * 1.1 + 16.0));
    sig_as.reserve(static_cast<std::size_t>(expected * cfg.eta_as * 1.1 + 16.0));
    double t = 0.0;
    for (;;) {
      t += exp_interval(pair_rng, mean_gap_ps);
      const std::int64_t t_s = std::llround(t);
      if (t_s >= cfg.duration_ps) break;
      ++pairs_generated;
      const double u = uniform_open01(pair_rng);
      bool keep_s = false, keep_as = false;
      if (u <= prob_both) {
        keep_s = keep_as = true;
      } else if (u <= prob_both + prob_s_only) {
        keep_s = true;
      } else if (u <= prob_both + prob_s_only + prob_as_only) {
        keep_as = true;
      }
      if (keep_s) sig_s.push_back({Channel::stokes, t_s});
      if (keep_as) {
        const std::int64_t t_as = t_s + sample_pair_delay(pair_rng, cfg.tau_co_ps);
        if (t_as < cfg.duration_ps)
          sig_as.push_back({Channel::anti_stokes, t_as});
        else
          keep_as = false; // partner emitted past the end of the run
      }
      if (keep_s && keep_as) ++pairs_detected;
    }
  }

  // Stokes signal tags inherit emission order; anti-Stokes delays can swap
  // neighbors, so that side needs an explicit sort before merging.
  std::sort(sig_as.begin(), sig_as.end(),
            [](const TimeTag& a, const TimeTag& b) { return a.t_ps < b.t_ps; });

  const std::vector<TimeTag> noise_s =
      poisson_tags(noise_s_rng, cfg.noise_s_hz, cfg.duration_ps, Channel::stokes);
  const std::vector<TimeTag> noise_as =
      poisson_tags(noise_as_rng, cfg.noise_as_hz, cfg.duration_ps, Channel::anti_stokes);

  auto combine = [&](std::vector<TimeTag>&& signal, const std::vector<TimeTag>& noise,
                     Channel ch, const char* name) {
    TimeTagStream s;
    s.duration_ps = cfg.duration_ps;
    s.tags.resize(signal.size() + noise.size());
    std::merge(signal.begin(), signal.end(), noise.begin(), noise.end(), s.tags.begin(),
               [](const TimeTag& a, const TimeTag& b) { return a.t_ps < b.t_ps; });
    s.meta["channel"] = name;
    s.meta["rng_algorithm"] = kRngAlgorithm;
    s.meta["seed"] = std::to_string(cfg.seed);
    s.meta["pairs_generated"] = std::to_string(pairs_generated);
    s.meta["pairs_detected_both"] = std::to_string(pairs_detected);
    s.meta["n_noise_tags"] = std::to_string(noise.size());
    s.meta["n_tags"] = std::to_string(s.tags.size());
    (void)ch;
    return s;
  };

  return {combine(std::move(sig_s), noise_s, Channel::stokes, "stokes"),
          combine(std::move(sig_as), noise_as, Channel::anti_stokes, "anti_stokes")};
}

double expected_setting_counts(const SourceConfig& cfg, Setting st) {
  validate_config(cfg);
  const double duration_s = static_cast<double>(cfg.duration_ps) / kPsPerSecond;
  return cfg.pair_rate_hz * duration_s * cfg.eta_s * cfg.eta_as *
         joint_pass_probability(cfg.rho, st.s, st.as);
}

} // namespace biphoton

#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include <json.hpp>

#include <biphoton/config.hpp>
#include <biphoton/errors.hpp>
#include <biphoton/io.hpp>
#include <biphoton/oam.hpp>
#include <biphoton/pipeline.hpp>
#include <biphoton/source_sim.hpp>
#include <biphoton/tomography.hpp>

using namespace biphoton;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / "biphoton-pipeline-tests" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

nlohmann::json load_report(const fs::path& dir) {
  return nlohmann::json::parse(slurp(dir / "report.json"));
}

// The paper-like defaults, shortened so a unit test finishes in milliseconds.
Params short_params(std::uint64_t seed, std::int64_t duration_ps,
                    std::int64_t tomo_per_setting_ps) {
  Params p;
  apply_preset(p, "paper");
  p.duration_ps = duration_ps;
  p.tomo_duration_per_setting_ps = tomo_per_setting_ps;
  p.seed = seed;
  return p;
}

bool has_stage_error(const StageErrors& errs, const std::string& stage) {
  for (const auto& [s, msg] : errs)
    if (s == stage) return true;
  return false;
}

} // namespace

TEST_CASE("correlate_and_fit recovers the coincidence peak from simulated tags") {
  const auto params = short_params(11, 20'000'000'000'000, 0);
  const auto [s, as] = simulate(make_source_config(params));
  const auto cr = correlate_and_fit(params, s, as);

  CHECK(cr.errors.empty());
  REQUIRE(cr.g2_available);
  REQUIRE(cr.cs_available);
  REQUIRE(cr.fit_available);

  // The zero-delay peak towers over the accidental floor and violates the
  // classical bound by orders of magnitude. Shot noise can move the argmax
  // among the first few near-equal bins of the decay.
  CHECK(cr.g2_max_value > 5.0);
  CHECK(cr.g2_tau_at_max_ps < 10 * params.bin_width_ps);
  CHECK(cr.cs_factor > 10.0);

  CHECK(cr.fit.converged);
  CHECK(cr.fit.tau_ps > 20000.0);
  CHECK(cr.fit.tau_ps < 80000.0);
}

TEST_CASE("the in-memory pipeline reports healthy stages end to end") {
  const auto params = short_params(3, 4'000'000'000'000, 1'000'000'000'000);
  const auto out = run_pipeline_in_memory(params);

  CHECK(out.exit_code == 0);
  CHECK(out.n_s > 1000);
  CHECK(out.n_as > 1000);
  CHECK(out.pairs_generated > 0);
  CHECK(out.pairs_detected_both > 0);
  CHECK(out.corr.g2_available);
  CHECK(out.corr.cs_available);
  CHECK(out.corr.fit_available);
  REQUIRE(out.tomo.available);
  CHECK(out.tomo.metrics.fidelity > 0.5);

  const auto j = nlohmann::json::parse(out.report.dump());
  CHECK(j["schema_version"].get<int>() == 1);
  CHECK(j["command"].get<std::string>() == "pipeline");
  CHECK(j["provenance"]["config_hash"].get<std::string>() == config_hash(params));
  CHECK(j["provenance"]["rng_algorithm"].get<std::string>() == "xoshiro256++");
  CHECK(j["stages"]["simulate"].get<std::string>() == "ok");
  CHECK(j["stages"]["g2"].get<std::string>() == "ok");
  CHECK(j["stages"]["cs"].get<std::string>() == "ok");
  CHECK(j["stages"]["fit"].get<std::string>() == "ok");
  CHECK(j["stages"]["tomography"].get<std::string>() == "ok");
  CHECK(j["g2"]["g2_max"].get<double>() == out.corr.g2_max_value);
  CHECK(j["fit"]["tau_ps"].get<double>() == out.corr.fit.tau_ps);
  CHECK(j["tomography"]["fidelity"].get<double>() == out.tomo.metrics.fidelity);
  CHECK(j["simulate"]["n_tags_stokes"].get<std::uint64_t>() == out.n_s);
  CHECK(j["errors"].size() == 0);
}

TEST_CASE("a pair-free noisy run stays flat and far from the Bell target") {
  auto params = short_params(21, 10'000'000'000'000, 5'000'000'000'000);
  params.pair_rate_hz = 0.0;
  // High noise rates so the accidental expectation per bin (~17) makes the
  // g2 estimator tight; at the preset's ~0.3 per bin a single 2-count bin
  // already reads g2 ~ 6.
  params.noise_s_hz = 3.0e4;
  params.noise_as_hz = 3.0e4;
  const auto out = run_pipeline_in_memory(params);

  REQUIRE(out.corr.g2_available);
  REQUIRE(out.corr.cs_available);
  // Uncorrelated streams: g2 ~ 1 everywhere, so no quantum violation.
  CHECK(out.corr.g2_max_value < 2.0);
  CHECK(out.corr.cs_factor < 2.0);

  // Accidental-only tomography reconstructs something near the maximally
  // mixed state; physicality still holds exactly.
  REQUIRE(out.tomo.available);
  CHECK(out.tomo.metrics.fidelity < 0.6);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(out.tomo.mle.rho);
  CHECK(es.eigenvalues().minCoeff() >= -1e-9);
}

TEST_CASE("an empty run records every analysis failure and exits 3") {
  auto params = short_params(1, 1'000'000'000'000, 1'000'000'000'000);
  params.pair_rate_hz = 0.0;
  params.noise_s_hz = 0.0;
  params.noise_as_hz = 0.0;
  const auto out = run_pipeline_in_memory(params);

  CHECK(out.exit_code == 3);
  CHECK(!out.corr.g2_available);
  CHECK(!out.corr.cs_available);
  CHECK(!out.corr.fit_available);
  CHECK(!out.tomo.available);
  CHECK(has_stage_error(out.corr.errors, "g2"));
  CHECK(has_stage_error(out.corr.errors, "cs"));
  CHECK(has_stage_error(out.corr.errors, "fit"));
  CHECK(has_stage_error(out.tomo.errors, "tomography"));

  const auto j = nlohmann::json::parse(out.report.dump());
  CHECK(j["stages"]["simulate"].get<std::string>() == "ok");
  CHECK(j["stages"]["g2"].get<std::string>() == "failed");
  CHECK(j["stages"]["cs"].get<std::string>() == "failed");
  CHECK(j["stages"]["fit"].get<std::string>() == "failed");
  CHECK(j["stages"]["tomography"].get<std::string>() == "failed");
  CHECK(j["errors"].size() >= 4);
}

TEST_CASE("simulate writes tag files the readers accept") {
  const auto params = short_params(5, 8'000'000'000'000, 0);
  const auto dir = fresh_dir("sim-text");
  CHECK(cmd_simulate(params, dir) == 0);

  REQUIRE(fs::exists(dir / "stokes.txt"));
  REQUIRE(fs::exists(dir / "anti_stokes.txt"));
  REQUIRE(fs::exists(dir / "report.json"));
  CHECK(!fs::exists(dir / "stokes.bin"));

  const auto s = read_timetags(dir / "stokes.txt");
  const auto as = read_timetags(dir / "anti_stokes.txt");
  CHECK(s.duration_ps == params.duration_ps);
  CHECK(s.meta.at("channel") == "stokes");
  CHECK(as.meta.at("channel") == "anti_stokes");
  CHECK(s.meta.at("config_hash") == config_hash(params));
  CHECK(s.meta.at("seed") == "5");
  CHECK(s.meta.at("rng_algorithm") == "xoshiro256++");

  const auto j = load_report(dir);
  CHECK(j["command"].get<std::string>() == "simulate");
  CHECK(j["simulate"]["n_tags_stokes"].get<std::uint64_t>() == s.tags.size());
  CHECK(j["provenance"]["config_hash"].get<std::string>() == config_hash(params));

  // The binary variant carries the same tags through a different container.
  auto bin_params = params;
  bin_params.write_binary_tags = true;
  const auto bdir = fresh_dir("sim-binary");
  CHECK(cmd_simulate(bin_params, bdir) == 0);
  REQUIRE(fs::exists(bdir / "stokes.bin"));
  const auto sb = read_timetags(bdir / "stokes.bin");
  REQUIRE(sb.tags.size() == s.tags.size());
  for (std::size_t i = 0; i < s.tags.size(); ++i)
    CHECK(sb.tags[i].t_ps == s.tags[i].t_ps);
}

TEST_CASE("pipeline artifacts match the in-memory run byte for byte") {
  const auto params = short_params(3, 4'000'000'000'000, 1'000'000'000'000);
  const auto out = run_pipeline_in_memory(params);

  const auto dir = fresh_dir("pipe");
  CHECK(cmd_pipeline(params, dir, /*emit_tags=*/false) == out.exit_code);
  REQUIRE(fs::exists(dir / "report.json"));
  REQUIRE(fs::exists(dir / "histogram.csv"));
  REQUIRE(fs::exists(dir / "fit_curve.csv"));
  REQUIRE(fs::exists(dir / "tomo_counts.csv"));
  REQUIRE(fs::exists(dir / "rho_real.csv"));
  REQUIRE(fs::exists(dir / "rho_imag.csv"));
  CHECK(!fs::exists(dir / "stokes.txt"));

  // Same seed, same config: the artifact must equal the in-memory report.
  CHECK(slurp(dir / "report.json") == out.report.dump() + "\n");

  const auto hc = read_histogram_csv(dir / "histogram.csv");
  REQUIRE(hc.counts.size() == out.corr.histogram.counts.size());
  for (std::size_t k = 0; k < hc.counts.size(); ++k) {
    CHECK(hc.counts[k] == out.corr.histogram.counts[k]);
    CHECK(hc.g2[k] == out.corr.curve.g2[k]);
  }

  const auto ti = read_tomo_counts_csv(dir / "tomo_counts.csv");
  CHECK(ti.counts == out.tomo.input.counts);

  const auto tdir2 = fresh_dir("pipe-tags");
  CHECK(cmd_pipeline(params, tdir2, /*emit_tags=*/true) == out.exit_code);
  CHECK(fs::exists(tdir2 / "stokes.txt"));
  CHECK(fs::exists(tdir2 / "anti_stokes.txt"));
}

TEST_CASE("fit and tomo commands reuse pipeline artifacts") {
  const auto params = short_params(3, 4'000'000'000'000, 1'000'000'000'000);
  const auto out = run_pipeline_in_memory(params);
  const auto dir = fresh_dir("reuse");
  REQUIRE(cmd_pipeline(params, dir, false) == out.exit_code);

  // Refitting the histogram CSV reproduces the pipeline's decay constant.
  const auto fdir = fresh_dir("refit");
  CHECK(cmd_fit(params, dir / "histogram.csv", "counts", fdir) == 0);
  const auto fj = load_report(fdir);
  CHECK(fj["command"].get<std::string>() == "fit");
  CHECK(fj["fit"]["tau_ps"].get<double>() ==
        doctest::Approx(out.corr.fit.tau_ps).epsilon(1e-9));
  CHECK(fs::exists(fdir / "fit_curve.csv"));

  const auto gdir = fresh_dir("refit-g2");
  CHECK(cmd_fit(params, dir / "histogram.csv", "g2", gdir) == 0);
  CHECK_THROWS_AS(cmd_fit(params, dir / "histogram.csv", "bogus", fresh_dir("refit-bad")),
                  ValidationError);

  // Re-running tomography from the counts CSV reproduces the reconstruction.
  const auto tdir2 = fresh_dir("retomo");
  CHECK(cmd_tomo(params, dir / "tomo_counts.csv", tdir2) == 0);
  const auto tj = load_report(tdir2);
  CHECK(tj["command"].get<std::string>() == "tomo");
  CHECK(tj["tomography"]["fidelity"].get<double>() == out.tomo.metrics.fidelity);
  CHECK(fs::exists(tdir2 / "rho_real.csv"));

  // Correlating the emitted tag files matches the pipeline's histogram.
  const auto sdir = fresh_dir("sim-for-corr");
  REQUIRE(cmd_simulate(params, sdir) == 0);
  const auto cdir = fresh_dir("corr");
  const int rc = cmd_correlate(params, sdir / "stokes.txt", sdir / "anti_stokes.txt", cdir);
  CHECK(rc == 0);
  const auto cj = load_report(cdir);
  CHECK(cj["command"].get<std::string>() == "correlate");
  CHECK(cj["g2"]["g2_max"].get<double>() == out.corr.g2_max_value);
  const auto hc = read_histogram_csv(cdir / "histogram.csv");
  CHECK(hc.counts == out.corr.histogram.counts);
}

TEST_CASE("exact Bell counts drive the tomo command to high fidelity") {
  // llround(1e6 * p) for the ideal Bell state: diag (P1,P1)=(P2,P2)=0.5e6 in
  // the same-mode settings, etc. Build through the forward model.
  const auto rho = bell_state();
  std::map<std::pair<MeasurementMode, MeasurementMode>, std::uint64_t> m;
  const auto probs = expected_probabilities(rho);
  for (const auto& st : all_settings())
    m[{st.s, st.as}] = static_cast<std::uint64_t>(
        std::llround(1e6 * probs[static_cast<std::size_t>(setting_index(st))]));
  const auto input = tomography_input_from_map(m, 1.0);

  const auto csv = fresh_dir("bell-counts") / "counts.csv";
  write_tomo_counts_csv(csv, input);

  auto params = short_params(0, 1'000'000'000'000, 1'000'000'000'000);
  const auto dir = fresh_dir("bell-tomo");
  CHECK(cmd_tomo(params, csv, dir) == 0);
  const auto j = load_report(dir);
  CHECK(j["tomography"]["fidelity"].get<double>() >= 0.999);
  CHECK(j["tomography"]["concurrence"].get<double>() >= 0.998);
}

TEST_CASE("identical configuration and seed reproduce the report exactly") {
  const auto params = short_params(77, 2'000'000'000'000, 500'000'000'000);
  const auto a = run_pipeline_in_memory(params);
  const auto b = run_pipeline_in_memory(params);
  CHECK(a.report.dump() == b.report.dump());
  CHECK(a.corr.histogram.counts == b.corr.histogram.counts);
  CHECK(a.tomo.input.counts == b.tomo.input.counts);
}

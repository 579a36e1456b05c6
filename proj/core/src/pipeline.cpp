#include <biphoton/pipeline.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <system_error>

#include <Eigen/Dense>

#include <biphoton/errors.hpp>
#include <biphoton/io.hpp>
#include <biphoton/rng.hpp>
#include <biphoton/version.hpp>

namespace biphoton {

namespace {

FitOptions fit_options_from(const Params& params) {
  FitOptions opts;
  if (params.fit_start != "auto") {
    std::size_t idx = 0;
    const char* b = params.fit_start.data();
    const char* e = b + params.fit_start.size();
    auto [ptr, ec] = std::from_chars(b, e, idx);
    if (ec != std::errc() || ptr != e)
      throw ValidationError("fit_start must be 'auto' or a bin index, got '" +
                            params.fit_start + "'");
    opts.fit_start = idx;
  }
  if (params.fit_weighting == "poisson")
    opts.weighting = FitWeighting::poisson;
  else if (params.fit_weighting != "none")
    throw ValidationError("fit_weighting must be 'none' or 'poisson', got '" +
                          params.fit_weighting + "'");
  return opts;
}

std::uint64_t meta_u64(const TimeTagStream& s, const char* key) {
  auto it = s.meta.find(key);
  if (it == s.meta.end()) return 0;
  std::uint64_t v = 0;
  const char* b = it->second.data();
  std::from_chars(b, b + it->second.size(), v);
  return v;
}

std::string target_label(const Params& params) {
  if (params.target_state == "werner") {
    char buf[48];
    std::snprintf(buf, sizeof buf, "werner(p=%g)", params.werner_p);
    return buf;
  }
  return params.target_state;
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec)
    throw ValidationError("cannot create output directory '" + dir.string() +
                          "': " + ec.message());
}

JsonValue config_json(const Params& p) {
  auto c = JsonValue::object();
  c["pair_rate_hz"] = JsonValue::num(p.pair_rate_hz);
  c["tau_co_ps"] = JsonValue::num(p.tau_co_ps);
  c["eta_s"] = JsonValue::num(p.eta_s);
  c["eta_as"] = JsonValue::num(p.eta_as);
  c["noise_s_hz"] = JsonValue::num(p.noise_s_hz);
  c["noise_as_hz"] = JsonValue::num(p.noise_as_hz);
  c["duration_ps"] = JsonValue::integer(p.duration_ps);
  c["target_state"] = JsonValue::str(p.target_state);
  c["werner_p"] = JsonValue::num(p.werner_p);
  c["setting_s"] = JsonValue::str(p.setting_s);
  c["setting_as"] = JsonValue::str(p.setting_as);
  c["bin_width_ps"] = JsonValue::integer(p.bin_width_ps);
  c["t_min_ps"] = JsonValue::integer(p.t_min_ps);
  c["n_bins"] = JsonValue::integer(p.n_bins);
  c["fit_start"] = JsonValue::str(p.fit_start);
  c["fit_weighting"] = JsonValue::str(p.fit_weighting);
  c["g2_ss0"] = JsonValue::num(p.g2_ss0);
  c["g2_asas0"] = JsonValue::num(p.g2_asas0);
  c["coincidence_window_ps"] = JsonValue::integer(p.coincidence_window_ps);
  c["tomo_duration_per_setting_ps"] = JsonValue::integer(p.tomo_duration_per_setting_ps);
  c["write_binary_tags"] = JsonValue::boolean(p.write_binary_tags);
  c["seed"] = JsonValue::uinteger(p.seed);
  return c;
}

JsonValue base_report(const Params& params, const char* command) {
  auto r = JsonValue::object();
  r["schema_version"] = JsonValue::integer(1);
  r["command"] = JsonValue::str(command);
  r["tool"] = JsonValue::object();
  r["tool"]["name"] = JsonValue::str(kToolName);
  r["tool"]["version"] = JsonValue::str(kToolVersion);
  auto prov = JsonValue::object();
  prov["rng_algorithm"] = JsonValue::str(kRngAlgorithm);
  prov["seed"] = JsonValue::uinteger(params.seed);
  prov["config_hash"] = JsonValue::str(config_hash(params));
  prov["delay_convention"] = JsonValue::str(
      "delay = t_anti_stokes - t_stokes in ps; histogram bin k covers "
      "[t_min_ps + k*bin_width_ps, t_min_ps + (k+1)*bin_width_ps)");
  prov["coordinate_frame"] = JsonValue::str(target_frame_note(params));
  auto assumptions = JsonValue::array();
  assumptions.push_back(JsonValue::str(
      "pair_rate_hz, noise_s_hz and noise_as_hz are run assumptions chosen to "
      "reproduce the published singles rates, not measured values"));
  assumptions.push_back(JsonValue::str(
      "g2_ss0 and g2_asas0 are assumed thermal zero-delay autocorrelation "
      "values, not measured on this data"));
  assumptions.push_back(JsonValue::str(
      "tomo_duration_per_setting_ps is an assumed accumulation time per "
      "analyzer setting"));
  prov["assumptions"] = assumptions;
  auto limitations = JsonValue::array();
  limitations.push_back(JsonValue::str(
      "the biphoton wave packet is one-sided exponential; the detector-limited "
      "rising edge near zero delay is not modeled"));
  limitations.push_back(JsonValue::str(
      "detector dead time, afterpulsing and timing jitter are not modeled"));
  prov["limitations"] = limitations;
  r["provenance"] = prov;
  r["config"] = config_json(params);
  r["stages"] = JsonValue::object();
  r["errors"] = JsonValue::array();
  return r;
}

void append_errors(JsonValue& report, const StageErrors& errs) {
  for (const auto& [stage, message] : errs) {
    auto e = JsonValue::object();
    e["stage"] = JsonValue::str(stage);
    e["message"] = JsonValue::str(message);
    report["errors"].push_back(e);
  }
}

JsonValue simulate_section(const TimeTagStream& s, const TimeTagStream& as) {
  auto sec = JsonValue::object();
  sec["duration_ps"] = JsonValue::integer(s.duration_ps);
  sec["n_tags_stokes"] = JsonValue::uinteger(s.tags.size());
  sec["n_tags_anti_stokes"] = JsonValue::uinteger(as.tags.size());
  sec["pairs_generated"] = JsonValue::uinteger(meta_u64(s, "pairs_generated"));
  sec["pairs_detected_both"] = JsonValue::uinteger(meta_u64(s, "pairs_detected_both"));
  sec["noise_tags_stokes"] = JsonValue::uinteger(meta_u64(s, "n_noise_tags"));
  sec["noise_tags_anti_stokes"] = JsonValue::uinteger(meta_u64(as, "n_noise_tags"));
  return sec;
}

JsonValue g2_section(const CorrelateResult& cr, const Params& params) {
  auto sec = JsonValue::object();
  sec["g2_max"] = JsonValue::num(cr.g2_max_value);
  sec["tau_at_max_ps"] = JsonValue::num(cr.g2_tau_at_max_ps);
  sec["accidentals_per_bin"] = JsonValue::num(cr.curve.normalization);
  sec["g2_ss0_assumed"] = JsonValue::num(params.g2_ss0);
  sec["g2_asas0_assumed"] = JsonValue::num(params.g2_asas0);
  sec["cs_factor"] =
      cr.cs_available ? JsonValue::num(cr.cs_factor) : JsonValue::null();
  return sec;
}

JsonValue fit_section(const ExpFitResult& f) {
  auto sec = JsonValue::object();
  sec["y0"] = JsonValue::num(f.y0);
  sec["a"] = JsonValue::num(f.a);
  sec["tau_ps"] = JsonValue::num(f.tau_ps);
  sec["tau_co_ps"] = JsonValue::num(f.tau_co_ps);
  sec["linewidth_hz"] = JsonValue::num(f.linewidth_hz);
  sec["residual_rms"] = JsonValue::num(f.residual_rms);
  sec["fit_start_bin"] = JsonValue::uinteger(f.fit_start);
  sec["fit_end_bin"] = JsonValue::uinteger(f.fit_end);
  sec["weighting"] =
      JsonValue::str(f.weighting == FitWeighting::poisson ? "poisson" : "none");
  sec["converged"] = JsonValue::boolean(f.converged);
  sec["iterations"] = JsonValue::uinteger(f.iterations);
  return sec;
}

JsonValue matrix_json(const Eigen::Matrix4d& m) {
  auto rows = JsonValue::array();
  for (int i = 0; i < 4; ++i) {
    auto row = JsonValue::array();
    for (int j = 0; j < 4; ++j) row.push_back(JsonValue::num(m(i, j)));
    rows.push_back(row);
  }
  return rows;
}

JsonValue tomo_section(const TomoStageResult& tr, const Params& params) {
  auto sec = JsonValue::object();
  sec["accumulation_s_per_setting"] = JsonValue::num(tr.input.accumulation_s);
  sec["coincidence_window_ps"] = JsonValue::integer(params.coincidence_window_ps);
  auto counts = JsonValue::array();
  for (Setting st : all_settings()) {
    auto row = JsonValue::object();
    row["mode_s"] = JsonValue::str(to_string(st.s));
    row["mode_as"] = JsonValue::str(to_string(st.as));
    row["counts"] = JsonValue::uinteger(tr.input.counts[setting_index(st)]);
    counts.push_back(row);
  }
  sec["counts"] = counts;
  if (tr.available) {
    sec["rho_real"] = matrix_json(tr.mle.rho.real());
    sec["rho_imag"] = matrix_json(tr.mle.rho.imag());
    auto eigs = JsonValue::array();
    for (double v : tr.metrics.eigenvalues) eigs.push_back(JsonValue::num(v));
    sec["eigenvalues"] = eigs;
    sec["fidelity"] = JsonValue::num(tr.metrics.fidelity);
    sec["concurrence"] = JsonValue::num(tr.metrics.concurrence);
    sec["purity"] = JsonValue::num(tr.metrics.purity);
    sec["target_label"] = JsonValue::str(tr.metrics.target_label);
    sec["log_likelihood"] = JsonValue::num(tr.mle.log_likelihood);
    sec["iterations"] = JsonValue::integer(tr.mle.iterations);
    sec["converged"] = JsonValue::boolean(tr.mle.converged);
    sec["multistarts"] = JsonValue::integer(tr.mle.multistarts);
    sec["linear_inversion_min_eigenvalue"] = JsonValue::num(tr.linear_inversion_min_eig);
  }
  return sec;
}

const char* ok_or_failed(bool ok) { return ok ? "ok" : "failed"; }

void fill_correlate_report(JsonValue& report, const CorrelateResult& cr,
                           const Params& params) {
  report["stages"]["g2"] = JsonValue::str(ok_or_failed(cr.g2_available));
  report["stages"]["cs"] = JsonValue::str(ok_or_failed(cr.cs_available));
  report["stages"]["fit"] =
      JsonValue::str(ok_or_failed(cr.fit_available && cr.fit.converged));
  if (cr.g2_available) report["g2"] = g2_section(cr, params);
  if (cr.fit_available) report["fit"] = fit_section(cr.fit);
  append_errors(report, cr.errors);
}

void fill_tomo_report(JsonValue& report, const TomoStageResult& tr,
                      const Params& params) {
  report["stages"]["tomography"] =
      JsonValue::str(ok_or_failed(tr.available && tr.mle.converged));
  report["tomography"] = tomo_section(tr, params);
  append_errors(report, tr.errors);
}

/// CSV column of the model y0 + A exp(-x/tau) over the fitted bins only; the
/// model has no rising edge, so bins before fit_start are not extrapolated.
void write_fit_curve_csv(const std::filesystem::path& p, const std::vector<double>& x,
                         const ExpFitResult& f) {
  std::string out = "tau_ps,fit_counts\n";
  for (std::size_t k = f.fit_start; k < f.fit_end && k < x.size(); ++k) {
    double y = f.y0 + f.a * std::exp(-x[k] / f.tau_ps);
    out += format_g17(x[k]);
    out += ',';
    out += format_g17(y);
    out += '\n';
  }
  std::FILE* fp = std::fopen(p.string().c_str(), "wb");
  if (!fp) throw ValidationError("cannot open '" + p.string() + "' for writing");
  std::fwrite(out.data(), 1, out.size(), fp);
  std::fclose(fp);
}

std::vector<double> bin_centers(const Histogram& h) {
  std::vector<double> x(h.counts.size());
  for (std::size_t k = 0; k < x.size(); ++k) x[k] = h.bin_center_ps(k);
  return x;
}

G2Curve curve_for_csv(const CorrelateResult& cr) {
  if (cr.g2_available) return cr.curve;
  G2Curve c;
  c.raw = cr.histogram;
  c.taus_ps = bin_centers(cr.histogram);
  c.g2.assign(cr.histogram.counts.size(), 0.0);
  c.normalization = 0.0;
  return c;
}

void annotate_stream(TimeTagStream& s, const Params& params) {
  s.meta["config_hash"] = config_hash(params);
  s.meta["tool"] = std::string(kToolName) + " " + kToolVersion;
}

void write_tag_pair(const Params& params, const std::filesystem::path& out_dir,
                    TimeTagStream& s, TimeTagStream& as) {
  annotate_stream(s, params);
  annotate_stream(as, params);
  if (params.write_binary_tags) {
    write_timetags_binary(out_dir / "stokes.bin", s);
    write_timetags_binary(out_dir / "anti_stokes.bin", as);
  } else {
    write_timetags_text(out_dir / "stokes.txt", s);
    write_timetags_text(out_dir / "anti_stokes.txt", as);
  }
}

int exit_code_for(const StageErrors& errs) { return errs.empty() ? 0 : 3; }

} // namespace

CorrelateResult correlate_and_fit(const Params& params, const TimeTagStream& s,
                                  const TimeTagStream& as) {
  if (params.n_bins <= 0) throw ValidationError("n_bins must be >= 1");
  FitOptions fopts = fit_options_from(params); // validate before the sweep
  CorrelateResult out;
  out.histogram = coincidence_histogram(s, as, params.bin_width_ps, params.t_min_ps,
                                        static_cast<std::size_t>(params.n_bins));
  try {
    out.curve = normalize_g2(out.histogram);
    out.g2_available = true;
    auto [v, tau] = g2_max(out.curve);
    out.g2_max_value = v;
    out.g2_tau_at_max_ps = tau;
    if (v > 0.0) {
      out.cs_factor = cauchy_schwarz_factor(v, params.g2_ss0, params.g2_asas0);
      out.cs_available = true;
    } else {
      out.errors.emplace_back(
          "cs", "cauchy-schwarz factor undefined: every histogram bin is empty");
    }
  } catch (const AnalysisError& e) {
    out.errors.emplace_back("g2", e.what());
    out.errors.emplace_back("cs", "cauchy-schwarz factor unavailable: g2 stage failed");
  }
  try {
    out.fit = fit_exponential(out.histogram, fopts);
    out.fit_available = true;
    if (!out.fit.converged)
      out.errors.emplace_back("fit", "exponential fit did not converge");
  } catch (const AnalysisError& e) {
    out.errors.emplace_back("fit", e.what());
  }
  return out;
}

TomographyInput simulate_tomography_counts(const Params& params) {
  if (params.coincidence_window_ps <= 0)
    throw ValidationError("coincidence_window_ps must be >= 1");
  TomographyInput input;
  input.accumulation_s =
      static_cast<double>(params.tomo_duration_per_setting_ps) / 1e12;
  SourceConfig base = make_source_config(params);
  base.duration_ps = params.tomo_duration_per_setting_ps;
  for (Setting st : all_settings()) {
    SourceConfig cfg = base;
    cfg.setting = st;
    // Independent, reproducible stream per setting; the label keeps the
    // derivation stable if the settings order ever gains entries.
    std::string label =
        std::string("tomo/") + to_string(st.s) + "," + to_string(st.as);
    cfg.seed = params.seed ^ fnv1a64(label);
    auto [s, as] = simulate(cfg);
    Histogram h =
        coincidence_histogram(s, as, params.coincidence_window_ps, 0, 1);
    input.counts[setting_index(st)] = h.counts[0];
  }
  return input;
}

TomoStageResult reconstruct_tomography(const Params& params,
                                       const TomographyInput& input) {
  TomoStageResult out;
  out.input = input;
  try {
    out.mle = mle_reconstruct(input);
    Eigen::Matrix4cd herm =
        0.5 * (out.mle.linear_inversion_rho +
               out.mle.linear_inversion_rho.adjoint().eval());
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(herm);
    out.linear_inversion_min_eig = es.eigenvalues().minCoeff();
    out.metrics = compute_metrics(out.mle.rho, target_density_matrix(params),
                                  target_label(params));
    out.available = true;
    if (!out.mle.converged)
      out.errors.emplace_back("tomography",
                              "likelihood maximization did not converge");
  } catch (const AnalysisError& e) {
    out.errors.emplace_back("tomography", e.what());
  }
  return out;
}

namespace {

struct PipelineRun {
  PipelineOutcome out;
  TimeTagStream s;
  TimeTagStream as;
};

PipelineRun run_pipeline_full(const Params& params) {
  PipelineRun run;
  SourceConfig cfg = make_source_config(params);
  auto [s, as] = simulate(cfg);
  run.s = std::move(s);
  run.as = std::move(as);
  PipelineOutcome& out = run.out;
  out.n_s = run.s.tags.size();
  out.n_as = run.as.tags.size();
  out.pairs_generated = meta_u64(run.s, "pairs_generated");
  out.pairs_detected_both = meta_u64(run.s, "pairs_detected_both");
  out.corr = correlate_and_fit(params, run.s, run.as);
  out.tomo = reconstruct_tomography(params, simulate_tomography_counts(params));

  out.report = base_report(params, "pipeline");
  out.report["stages"]["simulate"] = JsonValue::str("ok");
  out.report["simulate"] = simulate_section(run.s, run.as);
  fill_correlate_report(out.report, out.corr, params);
  fill_tomo_report(out.report, out.tomo, params);

  StageErrors all = out.corr.errors;
  all.insert(all.end(), out.tomo.errors.begin(), out.tomo.errors.end());
  out.exit_code = exit_code_for(all);
  return run;
}

} // namespace

PipelineOutcome run_pipeline_in_memory(const Params& params) {
  return run_pipeline_full(params).out;
}

int cmd_simulate(const Params& params, const std::filesystem::path& out_dir) {
  ensure_dir(out_dir);
  SourceConfig cfg = make_source_config(params);
  auto [s, as] = simulate(cfg);
  write_tag_pair(params, out_dir, s, as);
  JsonValue report = base_report(params, "simulate");
  report["stages"]["simulate"] = JsonValue::str("ok");
  report["simulate"] = simulate_section(s, as);
  write_json(out_dir / "report.json", report);
  return 0;
}

int cmd_correlate(const Params& params, const std::filesystem::path& in_s,
                  const std::filesystem::path& in_as,
                  const std::filesystem::path& out_dir) {
  ensure_dir(out_dir);
  TimeTagStream s = read_timetags(in_s);
  TimeTagStream as = read_timetags(in_as);
  CorrelateResult cr = correlate_and_fit(params, s, as);
  write_histogram_csv(out_dir / "histogram.csv", curve_for_csv(cr));
  if (cr.fit_available)
    write_fit_curve_csv(out_dir / "fit_curve.csv", bin_centers(cr.histogram), cr.fit);
  JsonValue report = base_report(params, "correlate");
  fill_correlate_report(report, cr, params);
  write_json(out_dir / "report.json", report);
  return exit_code_for(cr.errors);
}

int cmd_fit(const Params& params, const std::filesystem::path& histogram_csv,
            const std::string& column, const std::filesystem::path& out_dir) {
  ensure_dir(out_dir);
  HistogramCsv hc = read_histogram_csv(histogram_csv);
  std::vector<double> y;
  if (column == "counts")
    y.assign(hc.counts.begin(), hc.counts.end());
  else if (column == "g2")
    y = hc.g2;
  else
    throw ValidationError("fit column must be 'counts' or 'g2', got '" + column + "'");

  JsonValue report = base_report(params, "fit");
  StageErrors errs;
  bool fit_ok = false;
  ExpFitResult fit;
  try {
    fit = fit_exponential_xy(hc.taus_ps, y, fit_options_from(params));
    fit_ok = true;
    if (!fit.converged) errs.emplace_back("fit", "exponential fit did not converge");
  } catch (const AnalysisError& e) {
    errs.emplace_back("fit", e.what());
  }
  report["stages"]["fit"] = JsonValue::str(ok_or_failed(fit_ok && fit.converged));
  if (fit_ok) {
    report["fit"] = fit_section(fit);
    write_fit_curve_csv(out_dir / "fit_curve.csv", hc.taus_ps, fit);
  }
  append_errors(report, errs);
  write_json(out_dir / "report.json", report);
  return exit_code_for(errs);
}

int cmd_tomo(const Params& params,
             const std::optional<std::filesystem::path>& counts_csv,
             const std::filesystem::path& out_dir) {
  ensure_dir(out_dir);
  TomographyInput input;
  if (counts_csv) {
    input = read_tomo_counts_csv(*counts_csv);
    input.accumulation_s =
        static_cast<double>(params.tomo_duration_per_setting_ps) / 1e12;
  } else {
    input = simulate_tomography_counts(params);
  }
  TomoStageResult tr = reconstruct_tomography(params, input);
  write_tomo_counts_csv(out_dir / "tomo_counts.csv", tr.input);
  if (tr.available) {
    write_matrix_csv(out_dir / "rho_real.csv", tr.mle.rho.real());
    write_matrix_csv(out_dir / "rho_imag.csv", tr.mle.rho.imag());
  }
  JsonValue report = base_report(params, "tomo");
  fill_tomo_report(report, tr, params);
  write_json(out_dir / "report.json", report);
  return exit_code_for(tr.errors);
}

int cmd_pipeline(const Params& params, const std::filesystem::path& out_dir,
                 bool emit_tags) {
  ensure_dir(out_dir);
  PipelineRun run = run_pipeline_full(params);
  if (emit_tags) write_tag_pair(params, out_dir, run.s, run.as);
  write_histogram_csv(out_dir / "histogram.csv", curve_for_csv(run.out.corr));
  if (run.out.corr.fit_available)
    write_fit_curve_csv(out_dir / "fit_curve.csv",
                        bin_centers(run.out.corr.histogram), run.out.corr.fit);
  write_tomo_counts_csv(out_dir / "tomo_counts.csv", run.out.tomo.input);
  if (run.out.tomo.available) {
    write_matrix_csv(out_dir / "rho_real.csv", run.out.tomo.mle.rho.real());
    write_matrix_csv(out_dir / "rho_imag.csv", run.out.tomo.mle.rho.imag());
  }
  write_json(out_dir / "report.json", run.out.report);
  return run.out.exit_code;
}

} // namespace biphoton

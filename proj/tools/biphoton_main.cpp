// Command line front end: simulate | correlate | fit | tomo | pipeline.
// Exit codes: 0 success, 1 unexpected failure, 2 invalid configuration or
// input, 3 completed with recorded analysis failures.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include <biphoton/config.hpp>
#include <biphoton/errors.hpp>
#include <biphoton/pipeline.hpp>
#include <biphoton/version.hpp>

namespace {

struct CommonOpts {
  std::string preset;
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--preset", opts.preset, "Named parameter preset (paper)");
  cmd->add_option("--config", opts.config, "key = value parameter file");
  cmd->add_option("--set", opts.sets, "Override one parameter, key=value (repeatable)");
  cmd->add_option("--seed", opts.seed, "Master RNG seed (wins over preset and config)");
  cmd->add_option("-o,--out", opts.out, "Output directory (default: out)");
}

biphoton::Params resolve_params(const CommonOpts& opts) {
  biphoton::Params params;
  if (!opts.preset.empty()) biphoton::apply_preset(params, opts.preset);
  if (!opts.config.empty())
    biphoton::apply_kv(params, biphoton::read_kv_file(opts.config));
  if (!opts.sets.empty()) {
    std::vector<std::pair<std::string, std::string>> kv;
    for (const std::string& s : opts.sets) {
      auto eq = s.find('=');
      if (eq == std::string::npos)
        throw biphoton::ValidationError("--set expects key=value, got '" + s + "'");
      kv.emplace_back(s.substr(0, eq), s.substr(eq + 1));
    }
    biphoton::apply_kv(params, kv);
  }
  if (opts.seed) params.seed = *opts.seed;
  return params;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"narrowband biphoton source simulator and analyzer"};
  app.set_version_flag("--version",
                       std::string(biphoton::kToolName) + " " + biphoton::kToolVersion);
  app.require_subcommand(1);

  CommonOpts sim_opts;
  CLI::App* sim = app.add_subcommand("simulate", "Generate a pair of time-tag files");
  add_common(sim, sim_opts);

  CommonOpts corr_opts;
  std::string in_s, in_as;
  CLI::App* corr = app.add_subcommand(
      "correlate", "Histogram + g2 + Cauchy-Schwarz + decay fit from tag files");
  add_common(corr, corr_opts);
  corr->add_option("--in-s", in_s, "Stokes time-tag file")
      ->required();
  corr->add_option("--in-as", in_as, "anti-Stokes time-tag file")
      ->required();

  CommonOpts fit_opts;
  std::string fit_in, fit_column = "counts";
  CLI::App* fit = app.add_subcommand("fit", "Exponential decay fit of a histogram CSV");
  add_common(fit, fit_opts);
  fit->add_option("--in", fit_in, "Histogram CSV (tau_ps,counts,g2)")
      ->required();
  fit->add_option("--column", fit_column, "Column to fit: counts | g2");

  CommonOpts tomo_opts;
  std::string tomo_counts;
  CLI::App* tomo = app.add_subcommand(
      "tomo", "OAM state tomography (simulated counts, or --counts CSV)");
  add_common(tomo, tomo_opts);
  tomo->add_option("--counts", tomo_counts, "Measured counts CSV (mode_s,mode_as,counts)");

  CommonOpts pipe_opts;
  bool emit_tags = false;
  CLI::App* pipe = app.add_subcommand(
      "pipeline", "simulate -> correlate -> fit -> tomography, one report");
  add_common(pipe, pipe_opts);
  pipe->add_flag("--emit-tags", emit_tags, "Also write the simulated tag files");

  CLI11_PARSE(app, argc, argv);

  try {
    int rc = 0;
    std::string out;
    if (app.got_subcommand(sim)) {
      rc = biphoton::cmd_simulate(resolve_params(sim_opts), sim_opts.out);
      out = sim_opts.out;
    } else if (app.got_subcommand(corr)) {
      rc = biphoton::cmd_correlate(resolve_params(corr_opts), in_s, in_as, corr_opts.out);
      out = corr_opts.out;
    } else if (app.got_subcommand(fit)) {
      rc = biphoton::cmd_fit(resolve_params(fit_opts), fit_in, fit_column, fit_opts.out);
      out = fit_opts.out;
    } else if (app.got_subcommand(tomo)) {
      std::optional<std::filesystem::path> counts;
      if (!tomo_counts.empty()) counts = tomo_counts;
      rc = biphoton::cmd_tomo(resolve_params(tomo_opts), counts, tomo_opts.out);
      out = tomo_opts.out;
    } else if (app.got_subcommand(pipe)) {
      rc = biphoton::cmd_pipeline(resolve_params(pipe_opts), pipe_opts.out, emit_tags);
      out = pipe_opts.out;
    }
    std::cerr << "report: " << out << "/report.json\n";
    if (rc == 3) std::cerr << "completed with analysis failures (see errors[])\n";
    return rc;
  } catch (const biphoton::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const biphoton::AnalysisError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 1;
  }
}

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <biphoton/config.hpp>
#include <biphoton/correlation.hpp>
#include <biphoton/metrics.hpp>
#include <biphoton/report.hpp>
#include <biphoton/timetag.hpp>
#include <biphoton/tomography.hpp>

namespace biphoton {

/// (stage, message) pairs. Hard validation failures throw instead; these are
/// the recoverable analysis conditions a pipeline run records and survives.
using StageErrors = std::vector<std::pair<std::string, std::string>>;

struct CorrelateResult {
  Histogram histogram;
  bool g2_available = false;
  G2Curve curve;
  double g2_max_value = 0.0;
  double g2_tau_at_max_ps = 0.0;
  bool cs_available = false;
  double cs_factor = 0.0;
  bool fit_available = false;
  ExpFitResult fit;
  StageErrors errors;
};

/// Histogram -> g2 -> peak -> Cauchy-Schwarz -> exponential fit, each branch
/// failing soft (recorded in errors) on degenerate data.
CorrelateResult correlate_and_fit(const Params& params, const TimeTagStream& s,
                                  const TimeTagStream& as);

/// Drives one Monte Carlo run per analyzer setting (seeds derived from the
/// master seed) and counts coincidences inside [0, coincidence_window_ps).
TomographyInput simulate_tomography_counts(const Params& params);

struct TomoStageResult {
  TomographyInput input;
  bool available = false; // reconstruction + metrics succeeded
  TomographyResult mle;
  MetricReport metrics;
  double linear_inversion_min_eig = 0.0;
  StageErrors errors;
};

TomoStageResult reconstruct_tomography(const Params& params, const TomographyInput& input);

struct PipelineOutcome {
  std::uint64_t n_s = 0;
  std::uint64_t n_as = 0;
  std::uint64_t pairs_generated = 0;
  std::uint64_t pairs_detected_both = 0;
  CorrelateResult corr;
  TomoStageResult tomo;
  JsonValue report;
  int exit_code = 0;
};

/// Full chain without touching the filesystem; cmd_pipeline adds artifacts.
PipelineOutcome run_pipeline_in_memory(const Params& params);

/// CLI entry points. All write into out_dir (created if needed) and return
/// the process exit code: 0 success, 3 when recoverable analysis failures or
/// non-convergence were recorded. Validation problems throw ValidationError
/// (the CLI maps those to exit 2).
int cmd_simulate(const Params& params, const std::filesystem::path& out_dir);
int cmd_correlate(const Params& params, const std::filesystem::path& in_s,
                  const std::filesystem::path& in_as, const std::filesystem::path& out_dir);
int cmd_fit(const Params& params, const std::filesystem::path& histogram_csv,
            const std::string& column, const std::filesystem::path& out_dir);
int cmd_tomo(const Params& params, const std::optional<std::filesystem::path>& counts_csv,
             const std::filesystem::path& out_dir);
int cmd_pipeline(const Params& params, const std::filesystem::path& out_dir,
                 bool emit_tags);

} // namespace biphoton

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <biphoton/correlation.hpp>
#include <biphoton/timetag.hpp>
#include <biphoton/tomography.hpp>

namespace biphoton {

/// Doubles are serialized with 17 significant digits everywhere so every
/// artifact round-trips exactly.
std::string format_g17(double v);

/// Line-oriented text format: `# key=value` header lines (duration_ps
/// mandatory), then `<channel:0|1>,<t_ps>` records, 0=Stokes.
void write_timetags_text(const std::filesystem::path& p, const TimeTagStream& s);
TimeTagStream read_timetags_text(const std::filesystem::path& p);

/// Binary form: 12-byte magic "BIPHOTONTAG1" + u32 LE header length, the
/// same text header block, then little-endian (u8 channel, u64 t_ps) records.
void write_timetags_binary(const std::filesystem::path& p, const TimeTagStream& s);
TimeTagStream read_timetags_binary(const std::filesystem::path& p);

/// Sniffs the magic and dispatches to the text or binary reader.
TimeTagStream read_timetags(const std::filesystem::path& p);

/// Histogram/curve CSV with header tau_ps,counts,g2.
void write_histogram_csv(const std::filesystem::path& p, const G2Curve& c);

struct HistogramCsv {
  std::vector<double> taus_ps;
  std::vector<std::uint64_t> counts;
  std::vector<double> g2;
};
HistogramCsv read_histogram_csv(const std::filesystem::path& p);

/// Tomography counts CSV with header mode_s,mode_as,counts, modes spelled
/// P1..P4, exactly 16 rows, order-insensitive. Reading rejects duplicate
/// rows and names any missing setting.
void write_tomo_counts_csv(const std::filesystem::path& p, const TomographyInput& in);
TomographyInput read_tomo_counts_csv(const std::filesystem::path& p);

/// 4x4 CSV grid of one real component of a density matrix.
void write_matrix_csv(const std::filesystem::path& p, const Eigen::Matrix4d& m);

} // namespace biphoton

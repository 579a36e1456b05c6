#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace biphoton {

enum class Channel : std::uint8_t { stokes = 0, anti_stokes = 1 };

/// One detection event. Times are integer picoseconds since run start; the
/// paper-scale quantities (1.94 ns bins, 40 ns decay) need sub-ns resolution
/// and integers keep binning free of float-comparison ambiguity.
struct TimeTag {
  Channel channel;
  std::int64_t t_ps;
};

/// Ordered detection record for one run. Tags must be sorted non-decreasing
/// in time and every tag.t_ps must lie in [0, duration_ps).
struct TimeTagStream {
  std::int64_t duration_ps = 0;
  std::vector<TimeTag> tags;
  std::map<std::string, std::string> meta;
};

struct StreamViolation {
  std::size_t index;
  std::string what;
};

/// Reports every out-of-order or out-of-range tag with its index.
/// Empty result means the stream is valid.
std::vector<StreamViolation> validate_stream(const TimeTagStream& s);

/// Time-sorted union of two streams of equal duration, stable on ties
/// (a before b). Throws ValidationError on duration mismatch.
TimeTagStream merge_streams(const TimeTagStream& a, const TimeTagStream& b);

/// Coincidence histogram over delays d = t_as - t_s. Bin k covers
/// [t_min + k*dt, t_min + (k+1)*dt). Carries the singles totals and duration
/// so the g2 normalization needs no side channel.
struct Histogram {
  std::int64_t bin_width_ps = 1;
  std::int64_t t_min_ps = 0;
  std::vector<std::uint64_t> counts;
  std::uint64_t n_s = 0;
  std::uint64_t n_as = 0;
  std::int64_t duration_ps = 0;

  double bin_center_ps(std::size_t k) const {
    return static_cast<double>(t_min_ps) +
           (static_cast<double>(k) + 0.5) * static_cast<double>(bin_width_ps);
  }
};

} // namespace biphoton

#include <biphoton/timetag.hpp>

#include <algorithm>
#include <string>

#include <biphoton/errors.hpp>

namespace biphoton {

std::vector<StreamViolation> validate_stream(const TimeTagStream& s) {
  std::vector<StreamViolation> out;
  for (std::size_t i = 0; i < s.tags.size(); ++i) {
    const auto t = s.tags[i].t_ps;
    if (t < 0 || t >= s.duration_ps) {
      out.push_back({i, "out of range: t_ps=" + std::to_string(t) +
                            " not in [0, " + std::to_string(s.duration_ps) + ")"});
    }
    if (i > 0 && t < s.tags[i - 1].t_ps) {
      out.push_back({i, "order: t_ps=" + std::to_string(t) + " precedes previous tag at " +
                            std::to_string(s.tags[i - 1].t_ps)});
    }
  }
  return out;
}

TimeTagStream merge_streams(const TimeTagStream& a, const TimeTagStream& b) {
  if (a.duration_ps != b.duration_ps) {
    throw ValidationError("merge_streams: duration mismatch (" +
                          std::to_string(a.duration_ps) + " vs " +
                          std::to_string(b.duration_ps) + ")");
  }
  TimeTagStream out;
  out.duration_ps = a.duration_ps;
  out.tags.reserve(a.tags.size() + b.tags.size());
  // std::merge is stable: on equal keys the first range (a) wins.
  std::merge(a.tags.begin(), a.tags.end(), b.tags.begin(), b.tags.end(),
             std::back_inserter(out.tags),
             [](const TimeTag& x, const TimeTag& y) { return x.t_ps < y.t_ps; });
  return out;
}

} // namespace biphoton

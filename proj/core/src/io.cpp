#include <biphoton/io.hpp>

#include <array>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string_view>

#include <biphoton/errors.hpp>

namespace biphoton {

namespace {

constexpr char kMagic[12] = {'B', 'I', 'P', 'H', 'O', 'T', 'O', 'N', 'T', 'A', 'G', '1'};

std::ofstream open_out(const std::filesystem::path& p, std::ios::openmode mode) {
  std::ofstream f(p, mode);
  if (!f) throw ValidationError("cannot open for writing: " + p.string());
  return f;
}

std::ifstream open_in(const std::filesystem::path& p, std::ios::openmode mode) {
  std::ifstream f(p, mode);
  if (!f) throw ValidationError("cannot open for reading: " + p.string());
  return f;
}

void require_clean_meta(const std::string& k, const std::string& v) {
  if (k.empty() || k.find_first_of("=\n\r") != std::string::npos ||
      v.find_first_of("\n\r") != std::string::npos)
    throw ValidationError("metadata key/value contains '=' or newline: " + k);
}

std::string header_block(const TimeTagStream& s) {
  std::ostringstream os;
  os << "# duration_ps=" << s.duration_ps << "\n";
  for (const auto& [k, v] : s.meta) {
    if (k == "duration_ps") continue;
    require_clean_meta(k, v);
    os << "# " << k << "=" << v << "\n";
  }
  return os.str();
}

std::int64_t parse_i64(std::string_view sv, const char* what, std::size_t line_no) {
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(sv.data(), sv.data() + sv.size(), v);
  if (ec != std::errc() || ptr != sv.data() + sv.size())
    throw ValidationError(std::string("bad ") + what + " at line " +
                          std::to_string(line_no) + ": '" + std::string(sv) + "'");
  return v;
}

// Parses `# key=value` header lines shared by the text and binary forms.
// Returns the mandatory duration and fills meta.
std::int64_t parse_header_line(std::string_view line, std::size_t line_no,
                               std::map<std::string, std::string>& meta,
                               std::optional<std::int64_t>& duration) {
  std::size_t i = 1; // past '#'
  while (i < line.size() && line[i] == ' ') ++i;
  const auto eq = line.find('=', i);
  if (eq == std::string_view::npos)
    throw ValidationError("header line " + std::to_string(line_no) + " lacks key=value");
  const std::string key{line.substr(i, eq - i)};
  const std::string value{line.substr(eq + 1)};
  if (key == "duration_ps")
    duration = parse_i64(value, "duration_ps", line_no);
  else
    meta[key] = value;
  return 0;
}

void enforce_valid(const TimeTagStream& s, const std::filesystem::path& p) {
  const auto violations = validate_stream(s);
  if (!violations.empty()) {
    std::ostringstream os;
    os << p.string() << ": stream violates ordering/range invariants:";
    for (std::size_t i = 0; i < violations.size() && i < 5; ++i)
      os << " [index " << violations[i].index << ": " << violations[i].what << "]";
    if (violations.size() > 5) os << " (+" << violations.size() - 5 << " more)";
    throw ValidationError(os.str());
  }
}

TimeTagStream parse_text_records(std::istream& in, const std::filesystem::path& p) {
  TimeTagStream s;
  std::optional<std::int64_t> duration;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      parse_header_line(line, line_no, s.meta, duration);
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw ValidationError(p.string() + ": line " + std::to_string(line_no) +
                            " is not '<channel>,<t_ps>'");
    const std::int64_t ch = parse_i64(std::string_view(line).substr(0, comma),
                                      "channel", line_no);
    if (ch != 0 && ch != 1)
      throw ValidationError(p.string() + ": line " + std::to_string(line_no) +
                            ": channel must be 0 or 1");
    const std::int64_t t =
        parse_i64(std::string_view(line).substr(comma + 1), "t_ps", line_no);
    s.tags.push_back({static_cast<Channel>(ch), t});
  }
  if (!duration)
    throw ValidationError(p.string() + ": missing mandatory '# duration_ps=' header");
  s.duration_ps = *duration;
  return s;
}

} // namespace

std::string format_g17(double v) {
  std::array<char, 64> buf{};
  const int n = std::snprintf(buf.data(), buf.size(), "%.17g", v);
  return std::string(buf.data(), static_cast<std::size_t>(n));
}

void write_timetags_text(const std::filesystem::path& p, const TimeTagStream& s) {
  enforce_valid(s, p);
  auto f = open_out(p, std::ios::out | std::ios::trunc);
  f << header_block(s);
  for (const TimeTag& t : s.tags)
    f << int(static_cast<std::uint8_t>(t.channel)) << ',' << t.t_ps << '\n';
  if (!f) throw ValidationError("write failed: " + p.string());
}

TimeTagStream read_timetags_text(const std::filesystem::path& p) {
  auto f = open_in(p, std::ios::in);
  TimeTagStream s = parse_text_records(f, p);
  enforce_valid(s, p);
  return s;
}

void write_timetags_binary(const std::filesystem::path& p, const TimeTagStream& s) {
  enforce_valid(s, p);
  auto f = open_out(p, std::ios::out | std::ios::trunc | std::ios::binary);
  const std::string header = header_block(s);
  if (header.size() > 0xffffffffull)
    throw ValidationError("binary header too large");
  const std::uint32_t hlen = static_cast<std::uint32_t>(header.size());
  f.write(kMagic, sizeof(kMagic));
  std::array<char, 4> lenb{};
  for (int i = 0; i < 4; ++i) lenb[static_cast<std::size_t>(i)] =
      static_cast<char>((hlen >> (8 * i)) & 0xff);
  f.write(lenb.data(), 4);
  f.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (const TimeTag& t : s.tags) {
    const auto ch = static_cast<char>(t.channel);
    f.write(&ch, 1);
    const auto u = static_cast<std::uint64_t>(t.t_ps);
    std::array<char, 8> tb{};
    for (int i = 0; i < 8; ++i) tb[static_cast<std::size_t>(i)] =
        static_cast<char>((u >> (8 * i)) & 0xff);
    f.write(tb.data(), 8);
  }
  if (!f) throw ValidationError("write failed: " + p.string());
}

TimeTagStream read_timetags_binary(const std::filesystem::path& p) {
  auto f = open_in(p, std::ios::in | std::ios::binary);
  std::array<char, 12> magic{};
  std::array<char, 4> lenb{};
  if (!f.read(magic.data(), 12) || std::memcmp(magic.data(), kMagic, 12) != 0)
    throw ValidationError(p.string() + ": bad magic, not a binary time-tag file");
  if (!f.read(lenb.data(), 4))
    throw ValidationError(p.string() + ": truncated preamble");
  std::uint32_t hlen = 0;
  for (int i = 0; i < 4; ++i)
    hlen |= static_cast<std::uint32_t>(static_cast<unsigned char>(
                lenb[static_cast<std::size_t>(i)]))
            << (8 * i);
  std::string header(hlen, '\0');
  if (!f.read(header.data(), hlen))
    throw ValidationError(p.string() + ": truncated header");

  TimeTagStream s;
  std::optional<std::int64_t> duration;
  std::istringstream hs(header);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(hs, line)) {
    ++line_no;
    if (line.empty() || line[0] != '#') continue;
    parse_header_line(line, line_no, s.meta, duration);
  }
  if (!duration)
    throw ValidationError(p.string() + ": missing duration_ps in binary header");
  s.duration_ps = *duration;

  std::array<char, 9> rec{};
  while (f.read(rec.data(), 9)) {
    const auto ch = static_cast<unsigned char>(rec[0]);
    if (ch > 1)
      throw ValidationError(p.string() + ": record channel byte must be 0 or 1");
    std::uint64_t u = 0;
    for (int i = 0; i < 8; ++i)
      u |= static_cast<std::uint64_t>(static_cast<unsigned char>(
               rec[static_cast<std::size_t>(1 + i)]))
           << (8 * i);
    if (u > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max()))
      throw ValidationError(p.string() + ": timestamp exceeds int64 range");
    s.tags.push_back({static_cast<Channel>(ch), static_cast<std::int64_t>(u)});
  }
  if (f.gcount() != 0)
    throw ValidationError(p.string() + ": trailing partial record");
  enforce_valid(s, p);
  return s;
}

TimeTagStream read_timetags(const std::filesystem::path& p) {
  auto f = open_in(p, std::ios::in | std::ios::binary);
  std::array<char, 12> magic{};
  const bool is_binary =
      f.read(magic.data(), 12) && std::memcmp(magic.data(), kMagic, 12) == 0;
  f.close();
  return is_binary ? read_timetags_binary(p) : read_timetags_text(p);
}

void write_histogram_csv(const std::filesystem::path& p, const G2Curve& c) {
  auto f = open_out(p, std::ios::out | std::ios::trunc);
  f << "tau_ps,counts,g2\n";
  for (std::size_t k = 0; k < c.g2.size(); ++k)
    f << format_g17(c.taus_ps[k]) << ',' << c.raw.counts[k] << ',' << format_g17(c.g2[k])
      << '\n';
  if (!f) throw ValidationError("write failed: " + p.string());
}

HistogramCsv read_histogram_csv(const std::filesystem::path& p) {
  auto f = open_in(p, std::ios::in);
  std::string line;
  if (!std::getline(f, line) || line.rfind("tau_ps,counts,g2", 0) != 0)
    throw ValidationError(p.string() + ": expected header 'tau_ps,counts,g2'");
  HistogramCsv out;
  std::size_t line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string a, b, c;
    if (!std::getline(ls, a, ',') || !std::getline(ls, b, ',') || !std::getline(ls, c))
      throw ValidationError(p.string() + ": malformed row at line " +
                            std::to_string(line_no));
    try {
      out.taus_ps.push_back(std::stod(a));
      out.counts.push_back(static_cast<std::uint64_t>(std::stoull(b)));
      out.g2.push_back(std::stod(c));
    } catch (const std::exception&) {
      throw ValidationError(p.string() + ": unparsable numbers at line " +
                            std::to_string(line_no));
    }
  }
  if (out.taus_ps.empty())
    throw ValidationError(p.string() + ": no data rows");
  return out;
}

void write_tomo_counts_csv(const std::filesystem::path& p, const TomographyInput& in) {
  auto f = open_out(p, std::ios::out | std::ios::trunc);
  f << "mode_s,mode_as,counts\n";
  for (const auto& st : all_settings())
    f << to_string(st.s) << ',' << to_string(st.as) << ','
      << in.counts[setting_index(st)] << '\n';
  if (!f) throw ValidationError("write failed: " + p.string());
}

TomographyInput read_tomo_counts_csv(const std::filesystem::path& p) {
  auto f = open_in(p, std::ios::in);
  std::string line;
  if (!std::getline(f, line) || line.rfind("mode_s,mode_as,counts", 0) != 0)
    throw ValidationError(p.string() + ": expected header 'mode_s,mode_as,counts'");

  std::map<std::pair<MeasurementMode, MeasurementMode>, std::uint64_t> counts;
  std::size_t line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string a, b, c;
    if (!std::getline(ls, a, ',') || !std::getline(ls, b, ',') || !std::getline(ls, c))
      throw ValidationError(p.string() + ": malformed row at line " +
                            std::to_string(line_no));
    const auto ms = mode_from_string(a);
    const auto mas = mode_from_string(b);
    if (counts.count({ms, mas}))
      throw ValidationError(p.string() + ": duplicate setting (" + a + "," + b + ")");
    try {
      counts[{ms, mas}] = static_cast<std::uint64_t>(std::stoull(c));
    } catch (const std::exception&) {
      throw ValidationError(p.string() + ": bad count at line " + std::to_string(line_no));
    }
  }
  return tomography_input_from_map(counts); // names any missing setting
}

void write_matrix_csv(const std::filesystem::path& p, const Eigen::Matrix4d& m) {
  auto f = open_out(p, std::ios::out | std::ios::trunc);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) f << format_g17(m(i, j)) << (j == 3 ? '\n' : ',');
  }
  if (!f) throw ValidationError("write failed: " + p.string());
}

} // namespace biphoton

#include "sbm/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "sbm/error.hpp"

namespace sbm {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingChannel: return "MissingChannel";
    case ErrorCode::NonUniformSampling: return "NonUniformSampling";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::EmptyFile: return "EmptyFile";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::UnknownChannel: return "UnknownChannel";
    case ErrorCode::CutoffAboveNyquist: return "CutoffAboveNyquist";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::SignalTooShort: return "SignalTooShort";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::TooShort: return "TooShort";
    case ErrorCode::InsufficientHistory: return "InsufficientHistory";
    case ErrorCode::NotPSD: return "NotPSD";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::DivergenceDetected: return "DivergenceDetected";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::TooFewModels: return "TooFewModels";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

TimeSeriesFrame::TimeSeriesFrame(double start_time_s, double sample_interval_s,
                                 std::vector<Channel> channels, TimeAxis axis)
    : start_time_s_(start_time_s),
      sample_interval_s_(sample_interval_s),
      channels_(std::move(channels)),
      axis_(axis) {
  if (!(sample_interval_s_ > 0.0) || !std::isfinite(sample_interval_s_)) {
    throw Error(ErrorCode::InvalidSpec, "sample interval must be positive");
  }
  if (channels_.empty()) throw Error(ErrorCode::InvalidSpec, "frame has no channels");
  const std::size_t n = channels_.front().values.size();
  if (n == 0) throw Error(ErrorCode::InvalidSpec, "frame has no samples");
  std::set<std::string_view> seen;
  for (const auto& ch : channels_) {
    if (ch.values.size() != n) {
      throw Error(ErrorCode::LengthMismatch, "channel '" + ch.name + "' has " +
                                                 std::to_string(ch.values.size()) + " samples, expected " +
                                                 std::to_string(n));
    }
    if (!seen.insert(ch.name).second) {
      throw Error(ErrorCode::InvalidSpec, "duplicate channel name '" + ch.name + "'");
    }
  }
  for (std::size_t row = 0; row < n; ++row) {
    for (const auto& ch : channels_) {
      if (!std::isfinite(ch.values[row])) throw NonFiniteValueError(row + 1, ch.name);
    }
  }
}

std::vector<std::string> TimeSeriesFrame::channel_names() const {
  std::vector<std::string> names;
  names.reserve(channels_.size());
  for (const auto& ch : channels_) names.push_back(ch.name);
  return names;
}

bool TimeSeriesFrame::has_channel(std::string_view name) const {
  return std::any_of(channels_.begin(), channels_.end(),
                     [&](const Channel& ch) { return ch.name == name; });
}

std::size_t TimeSeriesFrame::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < channels_.size(); ++i) {
    if (channels_[i].name == name) return i;
  }
  throw Error(ErrorCode::MissingChannel, "no channel named '" + std::string(name) + "'");
}

std::span<const double> TimeSeriesFrame::channel(std::string_view name) const {
  return channels_[index_of(name)].values;
}

void ChannelRoleMap::validate_shape() const {
  if (correlated_setpoints.size() != 6) {
    throw Error(ErrorCode::InvalidSpec, "expected 6 correlated setpoints, got " +
                                            std::to_string(correlated_setpoints.size()));
  }
  std::set<std::string> names;
  auto add = [&](const std::string& n) {
    if (n.empty()) throw Error(ErrorCode::InvalidSpec, "empty role channel name");
    if (!names.insert(n).second) {
      throw Error(ErrorCode::InvalidSpec, "channel '" + n + "' assigned to more than one role");
    }
  };
  add(output);
  for (const auto& n : correlated_setpoints) add(n);
  add(independent_setpoint);
  add(excluded_setpoint);
  add(disturbance);
}

void ChannelRoleMap::validate(const TimeSeriesFrame& frame) const {
  validate_shape();
  auto need = [&](const std::string& n) {
    if (!frame.has_channel(n)) {
      throw Error(ErrorCode::MissingChannel, "role channel '" + n + "' not in frame");
    }
  };
  need(output);
  for (const auto& n : correlated_setpoints) need(n);
  need(independent_setpoint);
  need(excluded_setpoint);
  need(disturbance);
}

ChannelRoleMap default_roles() {
  return ChannelRoleMap{
      .output = "W_fac",
      .correlated_setpoints = {"sp_c1", "sp_c2", "sp_c3", "sp_c4", "sp_c5", "sp_c6"},
      .independent_setpoint = "sp_ind",
      .excluded_setpoint = "sp_exc",
      .disturbance = "T",
  };
}

// ---------------------------------------------------------------------------
// Timestamps

std::optional<double> parse_iso8601(std::string_view s) {
  using namespace std::chrono;
  // YYYY-MM-DD[T| ]HH:MM:SS[.fff][Z]
  if (s.size() < 19 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') ||
      s[13] != ':' || s[16] != ':') {
    return std::nullopt;
  }
  auto num = [&](std::size_t pos, std::size_t len) -> std::optional<int> {
    int v = 0;
    auto [p, ec] = std::from_chars(s.data() + pos, s.data() + pos + len, v);
    if (ec != std::errc() || p != s.data() + pos + len) return std::nullopt;
    return v;
  };
  auto yy = num(0, 4), mo = num(5, 2), dd = num(8, 2), hh = num(11, 2), mi = num(14, 2),
       ss = num(17, 2);
  if (!yy || !mo || !dd || !hh || !mi || !ss) return std::nullopt;
  const year_month_day ymd{year{*yy}, month{static_cast<unsigned>(*mo)},
                           day{static_cast<unsigned>(*dd)}};
  if (!ymd.ok() || *hh > 23 || *mi > 59 || *ss > 60) return std::nullopt;
  double frac = 0.0;
  std::size_t pos = 19;
  if (pos < s.size() && s[pos] == '.') {
    std::size_t end = pos + 1;
    while (end < s.size() && std::isdigit(static_cast<unsigned char>(s[end]))) ++end;
    if (end == pos + 1) return std::nullopt;
    std::from_chars(s.data() + pos, s.data() + end, frac);
    pos = end;
  }
  if (pos < s.size() && s[pos] == 'Z') ++pos;
  if (pos != s.size()) return std::nullopt;
  const auto days_since = sys_days{ymd}.time_since_epoch().count();
  return static_cast<double>(days_since) * 86400.0 + *hh * 3600.0 + *mi * 60.0 + *ss + frac;
}

std::string format_iso8601(double t) {
  using namespace std::chrono;
  const double whole = std::floor(t);
  const auto secs = static_cast<long long>(whole);
  const long long day_count = (secs >= 0 ? secs : secs - 86399) / 86400;
  const long long rem = secs - day_count * 86400;
  const year_month_day ymd{sys_days{days{day_count}}};
  char buf[64];
  const double frac = t - whole;
  int n = std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02lld:%02lld:%02lld", int(ymd.year()),
                        unsigned(ymd.month()), unsigned(ymd.day()), rem / 3600, (rem / 60) % 60,
                        rem % 60);
  std::string out(buf, static_cast<std::size_t>(n));
  if (frac > 0.0) {
    std::snprintf(buf, sizeof buf, "%.6f", frac);
    std::string f(buf + 1);  // drop the leading 0
    while (!f.empty() && f.back() == '0') f.pop_back();
    if (f.size() > 1) out += f;
  }
  out += 'Z';
  return out;
}

std::string format_double(double value) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::general, 17);
  return std::string(buf, p);
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::optional<double> parse_number(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

}  // namespace

TimeSeriesFrame parse_csv(std::string_view text, const LoadOptions& options) {
  std::vector<std::string_view> lines;
  {
    std::size_t start = 0;
    while (start <= text.size()) {
      auto nl = text.find('\n', start);
      auto line = trim(text.substr(start, nl == text.npos ? text.npos : nl - start));
      if (!line.empty()) lines.push_back(line);
      if (nl == text.npos) break;
      start = nl + 1;
    }
  }
  if (lines.empty()) throw Error(ErrorCode::EmptyFile, "no header row");
  if (lines.size() == 1) throw Error(ErrorCode::EmptyFile, "no data rows");

  // Strip a UTF-8 byte-order mark.
  std::string_view header_line = lines.front();
  if (header_line.starts_with("\xEF\xBB\xBF")) header_line.remove_prefix(3);
  const auto header = split(header_line);
  if (header.size() < 2) throw Error(ErrorCode::ParseError, "header needs a time column and at least one channel");

  std::vector<Channel> channels;
  for (std::size_t c = 1; c < header.size(); ++c) {
    channels.push_back(Channel{std::string(header[c]), {}});
    channels.back().values.reserve(lines.size() - 1);
  }

  std::vector<double> times;
  times.reserve(lines.size() - 1);
  std::optional<TimeAxis> axis;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto fields = split(lines[r]);
    if (fields.size() != header.size()) {
      throw Error(ErrorCode::ParseError, "row " + std::to_string(r) + " has " +
                                             std::to_string(fields.size()) + " fields, expected " +
                                             std::to_string(header.size()));
    }
    if (!axis) axis = parse_number(fields[0]) ? options.numeric_time : TimeAxis::Iso8601;
    std::optional<double> t = *axis == TimeAxis::Iso8601 ? parse_iso8601(fields[0]) : parse_number(fields[0]);
    if (!t || !std::isfinite(*t)) {
      throw Error(ErrorCode::ParseError, "row " + std::to_string(r) + ": bad timestamp '" +
                                             std::string(fields[0]) + "'");
    }
    times.push_back(*t);
    for (std::size_t c = 1; c < fields.size(); ++c) {
      auto v = parse_number(fields[c]);
      if (!v) {
        throw Error(ErrorCode::ParseError, "row " + std::to_string(r) + ", channel '" +
                                               channels[c - 1].name + "': cannot parse '" +
                                               std::string(fields[c]) + "'");
      }
      if (!std::isfinite(*v)) throw NonFiniteValueError(r, channels[c - 1].name);
      channels[c - 1].values.push_back(*v);
    }
  }

  // Convert the time column to seconds and verify uniform spacing.
  double interval = 0.0;
  if (*axis == TimeAxis::Index) {
    interval = options.nominal_interval_s.value_or(60.0);
    for (auto& t : times) t *= interval;
  } else if (options.nominal_interval_s) {
    interval = *options.nominal_interval_s;
  } else if (times.size() >= 2) {
    interval = times[1] - times[0];
  } else {
    interval = 60.0;
  }
  if (!(interval > 0.0)) {
    throw Error(ErrorCode::NonUniformSampling, "non-positive sample interval");
  }
  for (std::size_t i = 1; i < times.size(); ++i) {
    const double gap = times[i] - times[i - 1];
    if (std::abs(gap - interval) > 0.01 * interval) {
      throw Error(ErrorCode::NonUniformSampling,
                  "rows " + std::to_string(i) + "-" + std::to_string(i + 1) + " are " +
                      format_double(gap) + " s apart, nominal " + format_double(interval) + " s");
    }
  }

  TimeSeriesFrame frame(times.front(), interval, std::move(channels), *axis);
  if (options.roles) options.roles->validate(frame);
  return frame;
}

TimeSeriesFrame load_csv(const std::filesystem::path& path, const LoadOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), options);
}

std::string format_csv(const TimeSeriesFrame& frame) {
  std::string out = "t";
  for (const auto& ch : frame.channels()) {
    out += ',';
    out += ch.name;
  }
  out += '\n';
  const double dt = frame.sample_interval_s();
  for (std::size_t i = 0; i < frame.length(); ++i) {
    const double t = frame.start_time_s() + static_cast<double>(i) * dt;
    switch (frame.time_axis()) {
      case TimeAxis::Index: out += std::to_string(std::llround(t / dt)); break;
      case TimeAxis::Seconds: out += format_double(t); break;
      case TimeAxis::Iso8601: out += format_iso8601(t); break;
    }
    for (const auto& ch : frame.channels()) {
      out += ',';
      out += format_double(ch.values[i]);
    }
    out += '\n';
  }
  return out;
}

void write_csv(const TimeSeriesFrame& frame, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
  out << format_csv(frame);
  if (!out) throw Error(ErrorCode::IoError, "write failed for '" + path.string() + "'");
}

TimeSeriesFrame slice_window(const TimeSeriesFrame& frame, std::size_t start, std::size_t length) {
  if (length == 0 || start > frame.length() || length > frame.length() - start) {
    throw Error(ErrorCode::OutOfRange, "window [" + std::to_string(start) + ", " +
                                           std::to_string(start + length) + ") outside frame of length " +
                                           std::to_string(frame.length()));
  }
  std::vector<Channel> channels;
  channels.reserve(frame.channel_count());
  for (const auto& ch : frame.channels()) {
    const auto first = ch.values.begin() + static_cast<std::ptrdiff_t>(start);
    channels.push_back(Channel{ch.name, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(length))});
  }
  return TimeSeriesFrame(frame.start_time_s() + static_cast<double>(start) * frame.sample_interval_s(),
                         frame.sample_interval_s(), std::move(channels), frame.time_axis());
}

TimeSeriesFrame select_channels(const TimeSeriesFrame& frame, const std::vector<std::string>& names) {
  std::vector<Channel> channels;
  channels.reserve(names.size());
  for (const auto& n : names) {
    const auto values = frame.channel(n);
    channels.push_back(Channel{n, std::vector<double>(values.begin(), values.end())});
  }
  return TimeSeriesFrame(frame.start_time_s(), frame.sample_interval_s(), std::move(channels),
                         frame.time_axis());
}

std::size_t samples_per_day(const TimeSeriesFrame& frame) {
  return static_cast<std::size_t>(std::llround(86400.0 / frame.sample_interval_s()));
}

}  // namespace sbm

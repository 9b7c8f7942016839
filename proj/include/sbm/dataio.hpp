#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sbm {

/// How the first CSV column is interpreted and written back.
enum class TimeAxis {
  Index,    // plain sample indices; seconds = index * interval
  Seconds,  // numeric seconds
  Iso8601,  // UTC timestamps, e.g. 2024-01-01T00:00:00Z
};

struct Channel {
  std::string name;
  std::vector<double> values;
};

/// Uniformly sampled multichannel record. Immutable after construction; the
/// constructor enforces equal channel lengths (>= 1), a positive interval,
/// unique names and finite values.
class TimeSeriesFrame {
 public:
  TimeSeriesFrame(double start_time_s, double sample_interval_s, std::vector<Channel> channels,
                  TimeAxis axis = TimeAxis::Index);

  double start_time_s() const noexcept { return start_time_s_; }
  double sample_interval_s() const noexcept { return sample_interval_s_; }
  TimeAxis time_axis() const noexcept { return axis_; }
  std::size_t length() const noexcept { return channels_.front().values.size(); }
  std::size_t channel_count() const noexcept { return channels_.size(); }

  const std::vector<Channel>& channels() const noexcept { return channels_; }
  std::vector<std::string> channel_names() const;
  bool has_channel(std::string_view name) const;
  std::size_t index_of(std::string_view name) const;  // throws MissingChannel
  std::span<const double> channel(std::string_view name) const;
  std::span<const double> channel(std::size_t index) const { return channels_.at(index).values; }

 private:
  double start_time_s_;
  double sample_interval_s_;
  std::vector<Channel> channels_;
  TimeAxis axis_;
};

/// Which raw channels play which part in the scale-bridging model.
struct ChannelRoleMap {
  std::string output;
  std::vector<std::string> correlated_setpoints;  // exactly 6
  std::string independent_setpoint;
  std::string excluded_setpoint;
  std::string disturbance;

  /// Throws MissingChannel if a name is absent, InvalidSpec if the names are
  /// not disjoint or the correlated group does not have 6 members.
  void validate(const TimeSeriesFrame& frame) const;
  void validate_shape() const;
};

/// Role names used by the synthetic plant generator.
ChannelRoleMap default_roles();

struct LoadOptions {
  /// Nominal sample interval in seconds. When unset, ISO and seconds axes
  /// infer it from the first two rows; index axes use 60 s.
  std::optional<double> nominal_interval_s;
  /// How purely numeric time columns are read.
  TimeAxis numeric_time = TimeAxis::Index;
  /// When given, every role channel must be present.
  std::optional<ChannelRoleMap> roles;
};

TimeSeriesFrame load_csv(const std::filesystem::path& path, const LoadOptions& options = {});
TimeSeriesFrame parse_csv(std::string_view text, const LoadOptions& options = {});

/// Values are written with 17 significant digits so they round-trip exactly.
void write_csv(const TimeSeriesFrame& frame, const std::filesystem::path& path);
std::string format_csv(const TimeSeriesFrame& frame);

TimeSeriesFrame slice_window(const TimeSeriesFrame& frame, std::size_t start, std::size_t length);

/// New frame holding only the named channels, in the given order.
TimeSeriesFrame select_channels(const TimeSeriesFrame& frame, const std::vector<std::string>& names);

std::size_t samples_per_day(const TimeSeriesFrame& frame);

// Timestamp helpers shared with writers elsewhere.
std::string format_iso8601(double seconds_since_epoch);
std::optional<double> parse_iso8601(std::string_view text);
std::string format_double(double value);

}  // namespace sbm

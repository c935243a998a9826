#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sewhar {

// Naive local date-time, microseconds since 1970-01-01 00:00:00.
struct Timestamp {
  std::int64_t micros = 0;

  auto operator<=>(const Timestamp&) const = default;
};

// Accepts "YYYY-MM-DD" and "HH:MM:SS[.fraction]" (up to 6 fractional digits).
std::optional<Timestamp> parse_timestamp(std::string_view date, std::string_view time);

// "YYYY-MM-DD HH:MM:SS.ffffff"
std::string format_timestamp(Timestamp t);

enum class Marker { Begin, End };

struct Annotation {
  std::string activity;
  Marker marker = Marker::Begin;

  bool operator==(const Annotation&) const = default;
};

struct SensorEvent {
  Timestamp timestamp;
  std::string sensor_id;
  std::string value;
  std::optional<Annotation> annotation;

  bool operator==(const SensorEvent&) const = default;
};

inline constexpr std::string_view kOtherLabel = "Other";

// A run of events carrying one activity label. Events are stored without
// their begin/end annotations; the label carries that information.
struct Episode {
  std::string label;
  std::vector<SensorEvent> events;

  bool operator==(const Episode&) const = default;
};

struct Dataset {
  std::vector<Episode> episodes;
  std::vector<std::string> class_names;  // first-appearance order
  std::string source;

  std::size_t event_count() const;
};

// Builds a Dataset, deriving class_names from the episode labels.
Dataset make_dataset(std::vector<Episode> episodes, std::string source);

// Throws MalformedLine.
SensorEvent parse_line(std::string_view line);

struct ParseOptions {
  bool lenient = true;  // skip malformed lines with a warning instead of throwing
};

struct RawLog {
  std::vector<SensorEvent> events;
  std::size_t skipped_lines = 0;
  std::vector<std::string> warnings;
};

// Blank lines are ignored. Throws MalformedLine (strict mode) or EmptyInput.
RawLog parse_log(std::istream& in, const ParseOptions& options = {});

struct SegmentOptions {
  bool lenient = true;  // strict mode throws DanglingEnd
};

struct Segmentation {
  std::vector<Episode> episodes;  // ordered by first event
  std::vector<std::string> warnings;
};

// Splits an event stream into labeled episodes using the begin/end markers.
// Overlapping activities are resolved last-begin-wins: an unannotated event
// belongs to the most recently begun activity that is still open. Events
// outside every activity form maximal "Other" runs.
Segmentation segment_episodes(std::span<const SensorEvent> events, const SegmentOptions& options = {});

// Episode artifact: one JSON object per line, {"label":..,"events":[{"t","s","v"}]}.
void write_dataset(std::ostream& out, const Dataset& dataset);
Dataset read_dataset(std::istream& in, std::string source);

void save_dataset(const std::string& path, const Dataset& dataset);
Dataset load_dataset(const std::string& path);

}  // namespace sewhar

#include "sewhar/event_log.hpp"

#include "sewhar/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_set>

namespace sewhar {

namespace {

constexpr std::int64_t kMicrosPerSecond = 1'000'000;
constexpr std::int64_t kMicrosPerDay = 86'400 * kMicrosPerSecond;

template <typename Int>
bool parse_int(std::string_view s, Int& out) {
  if (s.empty()) return false;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc{} && ptr == end;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) fields.push_back(line.substr(i, j - i));
    i = j;
  }
  return fields;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool is_blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

std::optional<Timestamp> parse_timestamp(std::string_view date, std::string_view time) {
  if (date.size() != 10 || date[4] != '-' || date[7] != '-') return std::nullopt;
  int y = 0;
  unsigned mo = 0, d = 0;
  if (!parse_int(date.substr(0, 4), y) || !parse_int(date.substr(5, 2), mo) ||
      !parse_int(date.substr(8, 2), d)) {
    return std::nullopt;
  }
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{mo},
                                        std::chrono::day{d}};
  if (!ymd.ok()) return std::nullopt;

  if (time.size() < 8 || time[2] != ':' || time[5] != ':') return std::nullopt;
  int hh = 0, mm = 0, ss = 0;
  if (!parse_int(time.substr(0, 2), hh) || !parse_int(time.substr(3, 2), mm) ||
      !parse_int(time.substr(6, 2), ss)) {
    return std::nullopt;
  }
  if (hh > 23 || mm > 59 || ss > 60) return std::nullopt;

  std::int64_t frac_micros = 0;
  if (time.size() > 8) {
    if (time[8] != '.') return std::nullopt;
    const std::string_view frac = time.substr(9);
    if (frac.empty() || frac.size() > 6) return std::nullopt;
    if (!parse_int(frac, frac_micros)) return std::nullopt;
    for (std::size_t i = frac.size(); i < 6; ++i) frac_micros *= 10;
  }

  const auto days = std::chrono::sys_days{ymd}.time_since_epoch().count();
  return Timestamp{days * kMicrosPerDay +
                   ((hh * 60 + mm) * 60 + ss) * kMicrosPerSecond + frac_micros};
}

std::string format_timestamp(Timestamp t) {
  std::int64_t days = t.micros / kMicrosPerDay;
  std::int64_t rem = t.micros % kMicrosPerDay;
  if (rem < 0) {
    rem += kMicrosPerDay;
    --days;
  }
  const std::chrono::year_month_day ymd{std::chrono::sys_days{std::chrono::days{days}}};
  const std::int64_t secs = rem / kMicrosPerSecond;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u %02lld:%02lld:%02lld.%06lld",
                static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()), static_cast<long long>(secs / 3600),
                static_cast<long long>((secs / 60) % 60), static_cast<long long>(secs % 60),
                static_cast<long long>(rem % kMicrosPerSecond));
  return buf;
}

std::size_t Dataset::event_count() const {
  std::size_t n = 0;
  for (const auto& e : episodes) n += e.events.size();
  return n;
}

Dataset make_dataset(std::vector<Episode> episodes, std::string source) {
  Dataset ds;
  std::unordered_set<std::string> seen;
  for (const auto& ep : episodes) {
    if (seen.insert(ep.label).second) ds.class_names.push_back(ep.label);
  }
  ds.episodes = std::move(episodes);
  ds.source = std::move(source);
  return ds;
}

SensorEvent parse_line(std::string_view line) {
  const auto fields = split_ws(line);
  if (fields.size() < 4) {
    throw MalformedLine("expected at least 4 fields, got " + std::to_string(fields.size()));
  }
  if (fields.size() != 4 && fields.size() != 6) {
    throw MalformedLine("expected 4 or 6 fields, got " + std::to_string(fields.size()));
  }
  auto ts = parse_timestamp(fields[0], fields[1]);
  if (!ts) {
    throw MalformedLine("unparseable date/time '" + std::string(fields[0]) + " " +
                        std::string(fields[1]) + "'");
  }

  SensorEvent ev;
  ev.timestamp = *ts;
  ev.sensor_id = std::string(fields[2]);
  ev.value = std::string(fields[3]);
  if (fields.size() == 6) {
    const std::string marker = lower(fields[5]);
    Annotation ann;
    ann.activity = std::string(fields[4]);
    if (marker == "begin") {
      ann.marker = Marker::Begin;
    } else if (marker == "end") {
      ann.marker = Marker::End;
    } else {
      throw MalformedLine("unknown marker word '" + std::string(fields[5]) + "'");
    }
    ev.annotation = std::move(ann);
  }
  return ev;
}

RawLog parse_log(std::istream& in, const ParseOptions& options) {
  RawLog log;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (is_blank(line)) continue;
    try {
      log.events.push_back(parse_line(line));
    } catch (const MalformedLine& e) {
      if (!options.lenient) throw MalformedLine(e.what(), line_number);
      ++log.skipped_lines;
      log.warnings.push_back("line " + std::to_string(line_number) + ": " + e.what());
    }
  }
  if (log.events.empty()) throw EmptyInput("no parseable events in input");
  return log;
}

Segmentation segment_episodes(std::span<const SensorEvent> events, const SegmentOptions& options) {
  // Each begin opens an episode slot; events are routed to the slot on top of
  // the open-activity stack. Slots are created in first-event order, so the
  // output needs no sorting.
  struct Slot {
    Episode episode;
  };
  std::vector<Slot> slots;
  std::vector<std::size_t> open;  // stack of slot indexes
  std::optional<std::size_t> other_slot;
  Segmentation result;

  auto strip = [](const SensorEvent& ev) {
    SensorEvent copy = ev;
    copy.annotation.reset();
    return copy;
  };
  auto new_slot = [&](const std::string& label) {
    slots.push_back(Slot{Episode{label, {}}});
    return slots.size() - 1;
  };

  for (std::size_t i = 0; i < events.size(); ++i) {
    const SensorEvent& ev = events[i];
    if (i > 0 && ev.timestamp < events[i - 1].timestamp) {
      result.warnings.push_back("event " + std::to_string(i) + ": timestamp earlier than predecessor");
    }

    std::optional<std::size_t> target;
    if (ev.annotation && ev.annotation->marker == Marker::Begin) {
      const std::size_t s = new_slot(ev.annotation->activity);
      open.push_back(s);
      other_slot.reset();
      target = s;
    } else if (ev.annotation && ev.annotation->marker == Marker::End) {
      const std::string& name = ev.annotation->activity;
      auto it = std::find_if(open.rbegin(), open.rend(),
                             [&](std::size_t s) { return slots[s].episode.label == name; });
      if (it != open.rend()) {
        target = *it;
        open.erase(std::next(it).base());
      } else {
        const std::string msg = "event " + std::to_string(i) + ": end of '" + name +
                                "' without an open begin";
        if (!options.lenient) throw DanglingEnd(msg);
        result.warnings.push_back(msg);
      }
    }

    if (!target) {
      if (!open.empty()) {
        target = open.back();
      } else {
        if (!other_slot) other_slot = new_slot(std::string(kOtherLabel));
        target = other_slot;
      }
    }
    slots[*target].episode.events.push_back(strip(ev));
    // Any labeled event ends the current "Other" run.
    if (*target != other_slot.value_or(slots.size())) other_slot.reset();
  }

  for (std::size_t s : open) {
    result.warnings.push_back("activity '" + slots[s].episode.label +
                              "' still open at end of stream; closed at last event");
  }

  result.episodes.reserve(slots.size());
  for (auto& slot : slots) {
    if (!slot.episode.events.empty()) result.episodes.push_back(std::move(slot.episode));
  }
  return result;
}

void write_dataset(std::ostream& out, const Dataset& dataset) {
  for (const auto& ep : dataset.episodes) {
    nlohmann::json events = nlohmann::json::array();
    for (const auto& ev : ep.events) {
      events.push_back({{"t", format_timestamp(ev.timestamp)}, {"s", ev.sensor_id}, {"v", ev.value}});
    }
    const nlohmann::json record = {{"label", ep.label}, {"events", std::move(events)}};
    out << record.dump() << '\n';
  }
}

Dataset read_dataset(std::istream& in, std::string source) {
  std::vector<Episode> episodes;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (is_blank(line)) continue;
    const auto where = "episode artifact line " + std::to_string(line_number) + ": ";
    try {
      const auto record = nlohmann::json::parse(line);
      Episode ep;
      ep.label = record.at("label").get<std::string>();
      for (const auto& e : record.at("events")) {
        const auto t = e.at("t").get<std::string>();
        const auto space = t.find(' ');
        auto ts = space == std::string::npos
                      ? std::nullopt
                      : parse_timestamp(std::string_view(t).substr(0, space),
                                        std::string_view(t).substr(space + 1));
        if (!ts) throw ArtifactError(where + "bad timestamp '" + t + "'");
        ep.events.push_back(SensorEvent{*ts, e.at("s").get<std::string>(),
                                        e.at("v").get<std::string>(), std::nullopt});
      }
      if (ep.label.empty() || ep.events.empty()) throw ArtifactError(where + "empty label or events");
      episodes.push_back(std::move(ep));
    } catch (const nlohmann::json::exception& e) {
      throw ArtifactError(where + e.what());
    }
  }
  return make_dataset(std::move(episodes), std::move(source));
}

void save_dataset(const std::string& path, const Dataset& dataset) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArtifactError("cannot open '" + path + "' for writing");
  write_dataset(out, dataset);
  if (!out) throw ArtifactError("write failed for '" + path + "'");
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArtifactError("cannot open '" + path + "'");
  return read_dataset(in, path);
}

}  // namespace sewhar

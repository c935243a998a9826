#include <doctest.h>

#include "sewhar/error.hpp"
#include "sewhar/event_log.hpp"

#include <sstream>

using namespace sewhar;

namespace {

SensorEvent ev(int second, const std::string& sensor, std::optional<Annotation> a = std::nullopt) {
  SensorEvent e;
  e.timestamp = *parse_timestamp("2010-01-01", "00:00:" + std::string(second < 10 ? "0" : "") + std::to_string(second));
  e.sensor_id = sensor;
  e.value = "ON";
  e.annotation = std::move(a);
  return e;
}

Annotation begin(const std::string& a) { return {a, Marker::Begin}; }
Annotation end(const std::string& a) { return {a, Marker::End}; }

std::vector<std::string> sensors(const Episode& ep) {
  std::vector<std::string> out;
  for (const auto& e : ep.events) out.push_back(e.sensor_id);
  return out;
}

}  // namespace

TEST_CASE("parse_line: annotated line") {
  const auto e = parse_line("2009-10-16 06:25:30.000088 M020 ON Bed_to_Toilet begin");
  CHECK(e.sensor_id == "M020");
  CHECK(e.value == "ON");
  REQUIRE(e.annotation);
  CHECK(e.annotation->activity == "Bed_to_Toilet");
  CHECK(e.annotation->marker == Marker::Begin);
  CHECK(format_timestamp(e.timestamp) == "2009-10-16 06:25:30.000088");
}

TEST_CASE("parse_line: plain line and tabs") {
  const auto e = parse_line("2009-10-16 00:01:04.000059 M028 ON");
  CHECK(e.sensor_id == "M028");
  CHECK(e.value == "ON");
  CHECK_FALSE(e.annotation);

  const auto t = parse_line("2009-10-16\t00:01:04\tT001\t21.5\tRelax\tend");
  CHECK(t.value == "21.5");
  REQUIRE(t.annotation);
  CHECK(t.annotation->marker == Marker::End);
}

TEST_CASE("parse_line: malformed input") {
  CHECK_THROWS_AS(parse_line("garbage"), MalformedLine);
  CHECK_THROWS_AS(parse_line("2009-10-16 00:01:04 M028"), MalformedLine);
  // annotation without a marker
  CHECK_THROWS_AS(parse_line("2009-10-16 00:01:04 M028 ON Relax"), MalformedLine);
  CHECK_THROWS_AS(parse_line("2009-10-16 00:01:04 M028 ON Relax sideways"), MalformedLine);
  CHECK_THROWS_AS(parse_line("2009-13-16 00:01:04 M028 ON"), MalformedLine);
  CHECK_THROWS_AS(parse_line("2009-10-16 25:01:04 M028 ON"), MalformedLine);
}

TEST_CASE("timestamps order and round trip") {
  const auto a = *parse_timestamp("2009-10-16", "00:01:04.5");
  const auto b = *parse_timestamp("2009-10-16", "00:01:04.500001");
  CHECK(a < b);
  CHECK(b.micros - a.micros == 1);
  CHECK(format_timestamp(a) == "2009-10-16 00:01:04.500000");
  CHECK_FALSE(parse_timestamp("2009-10-16", "00:01"));
  CHECK_FALSE(parse_timestamp("2009-02-30", "00:00:00"));
}

TEST_CASE("parse_log: lenient and strict") {
  const std::string good =
      "2009-10-16 00:01:04 M028 ON\n"
      "2009-10-16 00:01:05 M029 ON\n"
      "\n"
      "2009-10-16 00:01:06 M030 OFF\n";
  {
    std::istringstream in(good);
    const auto log = parse_log(in);
    CHECK(log.events.size() == 3);
    CHECK(log.skipped_lines == 0);
  }
  const std::string bad = good + "not a line\n";
  {
    std::istringstream in(bad);
    const auto log = parse_log(in);
    CHECK(log.events.size() == 3);
    CHECK(log.skipped_lines == 1);
    CHECK(log.warnings.size() == 1);
  }
  {
    std::istringstream in(bad);
    try {
      parse_log(in, ParseOptions{false});
      FAIL("expected MalformedLine");
    } catch (const MalformedLine& e) {
      CHECK(e.line_number() == 5);
    }
  }
  {
    std::istringstream in("\n\n");
    CHECK_THROWS_AS(parse_log(in), EmptyInput);
  }
}

TEST_CASE("segment_episodes: single activity") {
  const std::vector<SensorEvent> events = {ev(1, "a", begin("A")), ev(2, "b"), ev(3, "c", end("A"))};
  const auto seg = segment_episodes(events);
  REQUIRE(seg.episodes.size() == 1);
  CHECK(seg.episodes[0].label == "A");
  CHECK(sensors(seg.episodes[0]) == std::vector<std::string>{"a", "b", "c"});
  // markers are carried by the label, not by the stored events
  for (const auto& e : seg.episodes[0].events) CHECK_FALSE(e.annotation);
}

TEST_CASE("segment_episodes: Other runs around an activity") {
  const std::vector<SensorEvent> events = {ev(1, "e1"), ev(2, "e2", begin("A")), ev(3, "e3", end("A")), ev(4, "e4")};
  const auto seg = segment_episodes(events);
  REQUIRE(seg.episodes.size() == 3);
  CHECK(seg.episodes[0].label == "Other");
  CHECK(sensors(seg.episodes[0]) == std::vector<std::string>{"e1"});
  CHECK(seg.episodes[1].label == "A");
  CHECK(sensors(seg.episodes[1]) == std::vector<std::string>{"e2", "e3"});
  CHECK(seg.episodes[2].label == "Other");
  CHECK(sensors(seg.episodes[2]) == std::vector<std::string>{"e4"});
}

TEST_CASE("segment_episodes: nested activities, last begin wins") {
  const std::vector<SensorEvent> events = {ev(1, "e1", begin("A")), ev(2, "e2", begin("B")), ev(3, "e3", end("B")),
                                           ev(4, "e4", end("A"))};
  const auto seg = segment_episodes(events);
  REQUIRE(seg.episodes.size() == 2);
  CHECK(seg.episodes[0].label == "A");
  CHECK(sensors(seg.episodes[0]) == std::vector<std::string>{"e1", "e4"});
  CHECK(seg.episodes[1].label == "B");
  CHECK(sensors(seg.episodes[1]) == std::vector<std::string>{"e2", "e3"});
}

TEST_CASE("segment_episodes: dangling end") {
  const std::vector<SensorEvent> events = {ev(1, "e1"), ev(2, "e2", end("A"))};
  const auto seg = segment_episodes(events);
  CHECK(seg.warnings.size() == 1);
  REQUIRE(seg.episodes.size() == 1);
  CHECK(seg.episodes[0].label == "Other");
  CHECK(seg.episodes[0].events.size() == 2);
  CHECK_THROWS_AS(segment_episodes(events, SegmentOptions{false}), DanglingEnd);
}

TEST_CASE("segment_episodes: unclosed activity runs to the end") {
  const std::vector<SensorEvent> events = {ev(1, "e1", begin("A")), ev(2, "e2"), ev(3, "e3")};
  const auto seg = segment_episodes(events);
  REQUIRE(seg.episodes.size() == 1);
  CHECK(seg.episodes[0].events.size() == 3);
  CHECK(seg.warnings.size() == 1);
}

TEST_CASE("dataset artifact round trip") {
  const std::vector<SensorEvent> events = {ev(1, "e1"), ev(2, "e2", begin("A")), ev(3, "e3", end("A")),
                                           ev(4, "e4", begin("B")), ev(5, "e5", end("B"))};
  const auto ds = make_dataset(segment_episodes(events).episodes, "test");
  CHECK(ds.class_names == std::vector<std::string>{"Other", "A", "B"});
  CHECK(ds.event_count() == 5);

  std::stringstream buf;
  write_dataset(buf, ds);
  const auto back = read_dataset(buf, "test");
  CHECK(back.episodes == ds.episodes);
  CHECK(back.class_names == ds.class_names);

  std::istringstream broken("{\"label\": \"A\"}\n");
  CHECK_THROWS_AS(read_dataset(broken, "x"), ArtifactError);
}

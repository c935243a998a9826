#include <doctest.h>

#include "sewhar/encoding.hpp"
#include "sewhar/error.hpp"
#include "sewhar/event_log.hpp"
#include "sewhar/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

using namespace sewhar;

namespace {

std::map<std::string, std::size_t> episode_counts(const Dataset& ds) {
  std::map<std::string, std::size_t> out;
  for (const auto& ep : ds.episodes) ++out[ep.label];
  return out;
}

}  // namespace

TEST_CASE("synth is deterministic per seed") {
  SynthConfig c;
  c.episodes_per_class = 20;
  c.seed = 4;
  const auto a = generate(c);
  const auto b = generate(c);
  CHECK(a.episodes == b.episodes);
  c.seed = 5;
  CHECK(generate(c).episodes != a.episodes);
}

TEST_CASE("synth class sizes follow the imbalance") {
  SynthConfig c;
  c.episodes_per_class = 100;
  c.imbalance = 10.0;
  const auto counts = episode_counts(generate(c));
  const auto names = synth_class_names(c.num_classes);
  CHECK(counts.at(names.front()) == 100);
  CHECK(counts.at(names.back()) == 10);
  CHECK(counts.at("Other") == 100);
  for (std::size_t i = 1; i < names.size(); ++i) CHECK(counts.at(names[i]) <= counts.at(names[i - 1]));

  c.other_episodes = 0;
  CHECK(episode_counts(generate(c)).count("Other") == 0);
}

TEST_CASE("synth episodes: lengths, sensors, no adjacent Other") {
  SynthConfig c;
  c.episodes_per_class = 50;
  c.min_length = 7;
  c.max_length = 30;
  const auto ds = generate(c);
  const auto ids = synth_sensor_ids(c.num_sensors);
  const std::set<std::string> known(ids.begin(), ids.end());
  for (std::size_t i = 0; i < ds.episodes.size(); ++i) {
    const auto& ep = ds.episodes[i];
    CHECK(ep.events.size() >= 7);
    CHECK(ep.events.size() <= 30);
    for (const auto& e : ep.events) CHECK(known.count(e.sensor_id) == 1);
    if (i > 0 && ep.label == "Other") CHECK(ds.episodes[i - 1].label != "Other");
  }
  // timestamps strictly increase across the whole log
  Timestamp last{-1};
  for (const auto& ep : ds.episodes) {
    for (const auto& e : ep.events) {
      CHECK(last < e.timestamp);
      last = e.timestamp;
    }
  }
}

TEST_CASE("synth mean episode length") {
  SynthConfig c;
  c.num_classes = 2;
  c.episodes_per_class = 5000;
  c.imbalance = 1.0;
  c.min_length = 5;
  c.max_length = 150;
  const auto ds = generate(c);
  const double mean = static_cast<double>(ds.event_count()) / static_cast<double>(ds.episodes.size());
  CHECK(std::abs(mean - 77.5) < 0.05 * 77.5);
}

TEST_CASE("synth disjoint sensors without noise are separable") {
  SynthConfig c;
  c.disjoint = true;
  c.sensors_per_class = 6;
  c.noise_rate = 0.0;
  c.other_episodes = 0;
  c.episodes_per_class = 30;
  const auto ds = generate(c);
  std::map<std::string, std::set<std::string>> sensors;
  for (const auto& ep : ds.episodes) {
    for (const auto& e : ep.events) sensors[ep.label].insert(e.sensor_id);
  }
  for (auto a = sensors.begin(); a != sensors.end(); ++a) {
    for (auto b = std::next(a); b != sensors.end(); ++b) {
      std::vector<std::string> common;
      std::set_intersection(a->second.begin(), a->second.end(), b->second.begin(), b->second.end(),
                            std::back_inserter(common));
      CHECK(common.empty());
    }
  }
}

TEST_CASE("synth raw log segments back into the same episodes") {
  SynthConfig c;
  c.episodes_per_class = 15;
  c.min_length = 2;
  c.max_length = 12;
  const auto ds = generate(c);
  std::stringstream buf;
  write_raw_log(buf, ds);
  const auto log = parse_log(buf, ParseOptions{false});
  const auto seg = segment_episodes(log.events, SegmentOptions{false});
  CHECK(seg.warnings.empty());
  CHECK(seg.episodes == ds.episodes);
}

TEST_CASE("synth values and validation") {
  CHECK(synth_sensor_values("M001") == std::vector<std::string>{"ON", "OFF"});
  CHECK(synth_sensor_values("D001") == std::vector<std::string>{"OPEN", "CLOSE"});
  CHECK(synth_sensor_ids(10).size() == 10);

  SynthConfig c;
  c.num_classes = 1;
  CHECK_THROWS_AS(c.validate(), InvalidConfig);
  c = {};
  c.noise_rate = 1.5;
  CHECK_THROWS_AS(c.validate(), InvalidConfig);
  c = {};
  c.disjoint = true;
  c.num_sensors = 10;
  CHECK_THROWS_AS(c.validate(), InvalidConfig);
  c = {};
  c.min_length = 10;
  c.max_length = 5;
  CHECK_THROWS_AS(c.validate(), InvalidConfig);

  // one-event labeled episodes cannot carry both markers
  c = {};
  c.min_length = c.max_length = 1;
  c.episodes_per_class = 3;
  std::ostringstream out;
  CHECK_THROWS_AS(write_raw_log(out, generate(c)), InvalidConfig);
}

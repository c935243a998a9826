#pragma once

#include "sewhar/event_log.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace sewhar {

struct SynthConfig {
  std::size_t num_sensors = 40;
  std::size_t num_classes = 6;
  std::size_t episodes_per_class = 200;  // episodes of the largest class
  std::size_t min_length = 5;
  std::size_t max_length = 150;
  std::size_t sensors_per_class = 8;
  double affinity_exponent = 1.0;  // Zipf exponent over a class's preferred sensors
  bool disjoint = false;           // give every class its own sensors
  double noise_rate = 0.1;
  double imbalance = 5.0;  // largest / smallest class size
  // Episodes of uniform-random events labeled "Other"; -1 means
  // episodes_per_class, 0 disables the class.
  long other_episodes = -1;
  std::uint64_t seed = 0;

  void validate() const;  // throws InvalidConfig
  std::size_t other_count() const;
  // Episode count of class c (0-based); geometric from episodes_per_class
  // down to episodes_per_class / imbalance.
  std::size_t class_size(std::size_t c) const;
};

// Sensor identifiers M001.., D001.., T001.. in a fixed 7:2:1 pattern.
std::vector<std::string> synth_sensor_ids(std::size_t num_sensors);

// Values a sensor can report: ON/OFF, OPEN/CLOSE, or a handful of
// temperatures for T sensors.
std::vector<std::string> synth_sensor_values(const std::string& sensor_id);

// Preferred sensor indexes and their draw weights for every class.
struct Affinity {
  std::vector<std::size_t> sensors;
  std::vector<double> weights;  // unnormalized
};
std::vector<Affinity> synth_affinities(const SynthConfig& config);

std::vector<std::string> synth_class_names(std::size_t num_classes);

// Deterministic for a fixed config. Episodes are interleaved in random order
// and no two "Other" episodes are adjacent, so the raw log written by
// write_raw_log segments back into the same episodes.
Dataset generate(const SynthConfig& config);

// CASAS-style text: begin marker on the first event of a labeled episode,
// end marker on the last. Throws InvalidConfig for a labeled episode with
// fewer than two events (begin and end cannot share a line).
void write_raw_log(std::ostream& out, const Dataset& dataset);

}  // namespace sewhar

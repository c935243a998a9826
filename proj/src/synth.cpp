#include "sewhar/synth.hpp"

#include "sewhar/error.hpp"
#include "sewhar/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

namespace sewhar {

namespace {

// 2026-01-01 00:00:00
constexpr std::int64_t kSynthEpochMicros = 1767225600LL * 1'000'000;

constexpr std::array kActivityNames = {
    "Sleep", "Meal_Preparation", "Relax", "Work", "Bed_to_Toilet", "Eating",
    "Wash_Dishes", "Enter_Home", "Leave_Home", "Housekeeping", "Personal_Hygiene", "Take_Medicine",
};

std::size_t pick_weighted(Rng& rng, const std::vector<double>& cumulative) {
  const double x = rng.uniform() * cumulative.back();
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), x);
  return std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), cumulative.size() - 1);
}

}  // namespace

void SynthConfig::validate() const {
  if (num_classes < 2) throw InvalidConfig("synth: num_classes must be at least 2");
  if (num_sensors < 1) throw InvalidConfig("synth: num_sensors must be at least 1");
  if (episodes_per_class < 1) throw InvalidConfig("synth: episodes_per_class must be at least 1");
  if (min_length < 1 || min_length > max_length) throw InvalidConfig("synth: need 1 <= min_length <= max_length");
  if (sensors_per_class < 1 || sensors_per_class > num_sensors) {
    throw InvalidConfig("synth: sensors_per_class must lie in [1, num_sensors]");
  }
  if (disjoint && sensors_per_class * num_classes > num_sensors) {
    throw InvalidConfig("synth: disjoint sensor sets need num_sensors >= num_classes * sensors_per_class");
  }
  if (!(noise_rate >= 0.0 && noise_rate <= 1.0)) throw InvalidConfig("synth: noise_rate must lie in [0, 1]");
  if (!(imbalance >= 1.0) || !std::isfinite(imbalance)) throw InvalidConfig("synth: imbalance must be >= 1");
  if (!(affinity_exponent >= 0.0) || !std::isfinite(affinity_exponent)) {
    throw InvalidConfig("synth: affinity_exponent must be >= 0");
  }
  if (other_episodes < -1) throw InvalidConfig("synth: other_episodes must be >= 0 (or -1 for the default)");
  std::size_t labeled = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (class_size(c) == 0) throw InvalidConfig("synth: imbalance leaves class " + std::to_string(c) + " empty");
    labeled += class_size(c);
  }
  if (other_count() > labeled + 1) {
    throw InvalidConfig("synth: more Other episodes than gaps between labeled episodes");
  }
}

std::size_t SynthConfig::other_count() const {
  return other_episodes < 0 ? episodes_per_class : static_cast<std::size_t>(other_episodes);
}

std::size_t SynthConfig::class_size(std::size_t c) const {
  if (num_classes < 2) return episodes_per_class;
  const double t = static_cast<double>(c) / static_cast<double>(num_classes - 1);
  return static_cast<std::size_t>(std::llround(static_cast<double>(episodes_per_class) * std::pow(imbalance, -t)));
}

std::vector<std::string> synth_sensor_ids(std::size_t num_sensors) {
  std::vector<std::string> ids;
  std::size_t m = 0, d = 0, t = 0;
  char buf[16];
  for (std::size_t i = 0; i < num_sensors; ++i) {
    const std::size_t slot = i % 10;
    if (slot < 7) {
      std::snprintf(buf, sizeof buf, "M%03zu", ++m);
    } else if (slot < 9) {
      std::snprintf(buf, sizeof buf, "D%03zu", ++d);
    } else {
      std::snprintf(buf, sizeof buf, "T%03zu", ++t);
    }
    ids.emplace_back(buf);
  }
  return ids;
}

std::vector<std::string> synth_sensor_values(const std::string& sensor_id) {
  switch (sensor_id.empty() ? 'M' : sensor_id[0]) {
    case 'D':
      return {"OPEN", "CLOSE"};
    case 'T':
      return {"19.5", "20", "20.5", "21", "21.5"};
    default:
      return {"ON", "OFF"};
  }
}

std::vector<std::string> synth_class_names(std::size_t num_classes) {
  std::vector<std::string> names;
  for (std::size_t c = 0; c < num_classes; ++c) {
    names.push_back(c < kActivityNames.size() ? std::string(kActivityNames[c]) : "Activity_" + std::to_string(c + 1));
  }
  return names;
}

std::vector<Affinity> synth_affinities(const SynthConfig& config) {
  Rng rng(derive_seed(config.seed, 0));
  std::vector<std::size_t> all(config.num_sensors);
  std::iota(all.begin(), all.end(), 0);
  if (config.disjoint) rng.shuffle(std::span(all));

  std::vector<Affinity> out(config.num_classes);
  for (std::size_t c = 0; c < config.num_classes; ++c) {
    Affinity& a = out[c];
    if (config.disjoint) {
      a.sensors.assign(all.begin() + static_cast<std::ptrdiff_t>(c * config.sensors_per_class),
                       all.begin() + static_cast<std::ptrdiff_t>((c + 1) * config.sensors_per_class));
    } else {
      // partial Fisher-Yates: the first k entries become a uniform random subset
      std::vector<std::size_t> pool = all;
      for (std::size_t i = 0; i < config.sensors_per_class; ++i) {
        std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
      }
      a.sensors.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(config.sensors_per_class));
    }
    for (std::size_t r = 0; r < a.sensors.size(); ++r) {
      a.weights.push_back(1.0 / std::pow(static_cast<double>(r + 1), config.affinity_exponent));
    }
  }
  return out;
}

Dataset generate(const SynthConfig& config) {
  config.validate();
  const auto ids = synth_sensor_ids(config.num_sensors);
  std::vector<std::vector<std::string>> values;
  for (const auto& id : ids) values.push_back(synth_sensor_values(id));
  const auto affinities = synth_affinities(config);
  const auto names = synth_class_names(config.num_classes);

  std::vector<std::vector<double>> cumulative;
  for (const auto& a : affinities) {
    cumulative.emplace_back(a.weights.size());
    std::partial_sum(a.weights.begin(), a.weights.end(), cumulative.back().begin());
  }

  // Episode order: labeled episodes shuffled, Other episodes dropped into
  // distinct gaps so no two of them touch.
  Rng order_rng(derive_seed(config.seed, 1));
  std::vector<int> labeled;
  for (std::size_t c = 0; c < config.num_classes; ++c) labeled.insert(labeled.end(), config.class_size(c), static_cast<int>(c));
  order_rng.shuffle(std::span(labeled));
  std::vector<std::size_t> gaps(labeled.size() + 1);
  std::iota(gaps.begin(), gaps.end(), 0);
  order_rng.shuffle(std::span(gaps));
  std::vector<bool> other_before(gaps.size(), false);
  for (std::size_t i = 0; i < config.other_count(); ++i) other_before[gaps[i]] = true;

  std::vector<int> plan;  // class index, -1 for Other
  for (std::size_t i = 0; i <= labeled.size(); ++i) {
    if (other_before[i]) plan.push_back(-1);
    if (i < labeled.size()) plan.push_back(labeled[i]);
  }

  std::vector<Episode> episodes(plan.size());
  std::int64_t clock = kSynthEpochMicros;
  for (std::size_t e = 0; e < plan.size(); ++e) {
    Rng rng(derive_seed(config.seed, 100 + e));
    const int c = plan[e];
    Episode& ep = episodes[e];
    ep.label = c < 0 ? std::string(kOtherLabel) : names[static_cast<std::size_t>(c)];
    const auto length = static_cast<std::size_t>(
        rng.between(static_cast<std::int64_t>(config.min_length), static_cast<std::int64_t>(config.max_length)));
    ep.events.reserve(length);
    for (std::size_t i = 0; i < length; ++i) {
      std::size_t sensor;
      const bool noise = rng.bernoulli(config.noise_rate);
      if (c < 0 || noise) {
        sensor = rng.below(config.num_sensors);
      } else {
        const auto& a = affinities[static_cast<std::size_t>(c)];
        sensor = a.sensors[pick_weighted(rng, cumulative[static_cast<std::size_t>(c)])];
      }
      const auto& vs = values[sensor];
      SensorEvent ev;
      ev.timestamp = Timestamp{clock};
      clock += 1'000'000;
      ev.sensor_id = ids[sensor];
      ev.value = vs[rng.below(vs.size())];
      ep.events.push_back(std::move(ev));
    }
  }

  char source[160];
  std::snprintf(source, sizeof source, "synth(seed=%llu,classes=%zu,sensors=%zu,noise=%g)",
                static_cast<unsigned long long>(config.seed), config.num_classes, config.num_sensors,
                config.noise_rate);
  return make_dataset(std::move(episodes), source);
}

void write_raw_log(std::ostream& out, const Dataset& dataset) {
  for (const auto& ep : dataset.episodes) {
    const bool labeled = ep.label != kOtherLabel;
    if (labeled && ep.events.size() < 2) {
      throw InvalidConfig("raw log: labeled episode '" + ep.label + "' has fewer than two events");
    }
    for (std::size_t i = 0; i < ep.events.size(); ++i) {
      const auto& ev = ep.events[i];
      out << format_timestamp(ev.timestamp) << ' ' << ev.sensor_id << ' ' << ev.value;
      if (labeled && i == 0) out << ' ' << ep.label << " begin";
      if (labeled && i + 1 == ep.events.size()) out << ' ' << ep.label << " end";
      out << '\n';
    }
  }
}

}  // namespace sewhar

#include "properties.hpp"

#include "sewhar/encoding.hpp"
#include "sewhar/event_log.hpp"
#include "sewhar/metrics.hpp"
#include "sewhar/rng.hpp"
#include "sewhar/train_eval.hpp"
#include "sewhar/windowing.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace sewhar::testing {

namespace {

std::string random_word(Rng& rng) {
  std::string w;
  const auto n = rng.between(1, 4);
  for (std::int64_t i = 0; i < n; ++i) w.push_back(static_cast<char>('A' + rng.below(4)));
  return w;
}

}  // namespace

PropertyResult metrics_match_brute_force(std::size_t cases, std::uint64_t seed) {
  PropertyResult r;
  Rng rng(seed);
  for (std::size_t i = 0; i < cases; ++i, ++r.cases) {
    const std::size_t k = 2 + rng.below(7);
    std::vector<std::uint64_t> counts(k * k);
    // sparse matrices too, so zero-support and never-predicted classes occur
    const double density = rng.uniform(0.2, 1.0);
    for (auto& c : counts) c = rng.bernoulli(density) ? rng.below(50) : 0;
    if (std::all_of(counts.begin(), counts.end(), [](auto c) { return c == 0; })) counts[0] = 1;
    const auto m = ConfusionMatrix::from_counts(counts);

    double recall_sum = 0, f1_sum = 0, total = 0;
    std::size_t supported = 0;
    for (std::size_t c = 0; c < k; ++c) {
      double tp = static_cast<double>(counts[c * k + c]), row = 0, col = 0;
      for (std::size_t j = 0; j < k; ++j) {
        row += static_cast<double>(counts[c * k + j]);
        col += static_cast<double>(counts[j * k + c]);
      }
      total += row;
      if (row > 0) {
        recall_sum += tp / row;
        ++supported;
      }
      const double p = col > 0 ? tp / col : 0.0;
      const double rc = row > 0 ? tp / row : 0.0;
      f1_sum += row * (p + rc > 0 ? 2 * p * rc / (p + rc) : 0.0);
    }
    const double ba = recall_sum / static_cast<double>(supported);
    const double wf1 = f1_sum / total;
    if (std::abs(balanced_accuracy(m) - ba) > 1e-12 || std::abs(weighted_f1(m) - wf1) > 1e-12) {
      r.fail("case " + std::to_string(i) + ": k=" + std::to_string(k));
    }
  }
  return r;
}

PropertyResult vocabulary_frequency_order(std::size_t cases, std::uint64_t seed) {
  PropertyResult r;
  Rng rng(seed);
  for (std::size_t i = 0; i < cases; ++i, ++r.cases) {
    std::vector<Episode> episodes(1 + rng.below(4));
    std::map<std::string, std::size_t> counts;
    for (auto& ep : episodes) {
      ep.label = "A";
      const auto n = rng.between(1, 30);
      for (std::int64_t e = 0; e < n; ++e) {
        SensorEvent ev;
        ev.sensor_id = random_word(rng);
        ev.value = rng.bernoulli(0.5) ? "ON" : "OFF";
        ++counts[make_word(ev.sensor_id, ev.value, Normalization::NearestHalf)];
        ep.events.push_back(ev);
      }
    }
    const auto vocab = build_vocabulary(episodes, Normalization::NearestHalf);

    std::vector<std::pair<std::string, std::size_t>> expected(counts.begin(), counts.end());
    std::sort(expected.begin(), expected.end(), [](const auto& a, const auto& b) {
      return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    bool good = vocab.size() == expected.size();
    for (std::size_t j = 0; good && j < expected.size(); ++j) {
      const auto token = static_cast<Token>(j + 1);
      good = vocab.word(token) == expected[j].first && vocab.count(token) == expected[j].second &&
             vocab.find(expected[j].first) == token;
    }
    if (!good) r.fail("case " + std::to_string(i));
  }
  return r;
}

PropertyResult window_count_and_padding(std::size_t cases, std::uint64_t seed) {
  PropertyResult r;
  Rng rng(seed);
  for (std::size_t i = 0; i < cases; ++i, ++r.cases) {
    std::vector<TokenSequence> seqs(1 + rng.below(5));
    std::size_t total = 0;
    for (auto& s : seqs) {
      const auto n = rng.between(1, 60);
      for (std::int64_t t = 0; t < n; ++t) s.tokens.push_back(static_cast<Token>(1 + rng.below(50)));
      s.label = rng.bernoulli(0.5) ? "A" : "B";
      total += s.tokens.size();
    }
    const std::size_t w = 1 + rng.below(100);
    const auto ds = build_window_dataset(seqs, w);
    bool good = ds.windows.size() == total;
    for (std::size_t k = 0; good && k < ds.windows.size(); ++k) {
      const auto& win = ds.windows[k];
      const auto& seq = seqs.at(win.origin.episode);
      const std::size_t t = win.origin.event;
      const std::size_t pad = t + 1 >= w ? 0 : w - (t + 1);
      good = win.tokens.size() == w && win.label == seq.label;
      for (std::size_t j = 0; good && j < w; ++j) {
        const Token expected = j < pad ? kPaddingToken : seq.tokens[t + 1 + j - w];
        good = win.tokens[j] == expected;
      }
    }
    if (!good) r.fail("case " + std::to_string(i) + ": W=" + std::to_string(w));
  }
  return r;
}

PropertyResult split_and_fold_partitions(std::size_t cases, std::uint64_t seed) {
  PropertyResult r;
  Rng rng(seed);
  for (std::size_t i = 0; i < cases; ++i, ++r.cases) {
    const std::size_t classes = 1 + rng.below(6);
    std::vector<int> labels;
    for (std::size_t c = 0; c < classes; ++c) labels.insert(labels.end(), 12 + rng.below(60), static_cast<int>(c));
    Rng(rng.next()).shuffle(std::span<int>(labels));
    const double fraction = rng.uniform(0.5, 0.9);
    const auto split = stratified_split(labels, fraction, rng.next());

    bool good = split.first.size() + split.second.size() == labels.size();
    std::vector<int> seen(labels.size(), 0);
    for (auto j : split.first) ++seen[j];
    for (auto j : split.second) ++seen[j];
    good = good && std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; });
    for (std::size_t c = 0; good && c < classes; ++c) {
      const auto n = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), static_cast<int>(c)));
      const auto first = static_cast<std::size_t>(std::count_if(
          split.first.begin(), split.first.end(), [&](auto j) { return labels[j] == static_cast<int>(c); }));
      const auto want = std::clamp<std::size_t>(static_cast<std::size_t>(std::floor(fraction * n + 0.5 + 1e-9)), 1, n - 1);
      good = first == want;
    }

    std::vector<int> train_labels;
    for (auto j : split.first) train_labels.push_back(labels[j]);
    const std::size_t k = 2 + rng.below(3);
    const auto folds = stratified_kfold(train_labels, k, rng.next());
    std::vector<int> in_validation(train_labels.size(), 0);
    for (const auto& f : folds) {
      std::set<std::size_t> fit(f.first.begin(), f.first.end());
      good = good && fit.size() + f.second.size() == train_labels.size();
      for (auto j : f.second) {
        ++in_validation[j];
        good = good && fit.count(j) == 0;
      }
    }
    good = good && std::all_of(in_validation.begin(), in_validation.end(), [](int s) { return s == 1; });
    for (std::size_t c = 0; good && c < classes; ++c) {
      std::vector<std::size_t> sizes;
      for (const auto& f : folds) {
        sizes.push_back(static_cast<std::size_t>(std::count_if(
            f.second.begin(), f.second.end(), [&](auto j) { return train_labels[j] == static_cast<int>(c); })));
      }
      good = std::is_sorted(sizes.rbegin(), sizes.rend()) && sizes.front() - sizes.back() <= 1;
    }
    if (!good) r.fail("case " + std::to_string(i));
  }
  return r;
}

PropertyResult segmentation_partitions_events(std::size_t cases, std::uint64_t seed) {
  PropertyResult r;
  Rng rng(seed);
  for (std::size_t i = 0; i < cases; ++i, ++r.cases) {
    std::vector<SensorEvent> events;
    const auto n = rng.between(1, 40);
    for (std::int64_t e = 0; e < n; ++e) {
      SensorEvent ev;
      ev.timestamp.micros = e;
      // the sensor id doubles as a unique event tag
      ev.sensor_id = "E" + std::to_string(e);
      ev.value = "ON";
      if (rng.bernoulli(0.3)) {
        ev.annotation = Annotation{std::string(1, static_cast<char>('A' + rng.below(3))),
                                   rng.bernoulli(0.5) ? Marker::Begin : Marker::End};
      }
      events.push_back(ev);
    }
    const auto seg = segment_episodes(events);
    std::multiset<std::string> tags;
    bool good = true;
    Timestamp previous_first{-1};
    for (const auto& ep : seg.episodes) {
      good = good && !ep.events.empty() && previous_first < ep.events.front().timestamp;
      if (!ep.events.empty()) previous_first = ep.events.front().timestamp;
      for (const auto& ev : ep.events) tags.insert(ev.sensor_id);
    }
    good = good && tags.size() == events.size();
    for (const auto& ev : events) good = good && tags.count(ev.sensor_id) == 1;
    if (!good) r.fail("case " + std::to_string(i));
  }
  return r;
}

}  // namespace sewhar::testing

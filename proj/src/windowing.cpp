#include "sewhar/windowing.hpp"

#include "sewhar/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <ostream>
#include <unordered_map>
#include <unordered_set>

namespace sewhar {

std::vector<int> WindowDataset::label_indexes() const {
  std::unordered_map<std::string, int> lookup;
  for (std::size_t i = 0; i < class_names.size(); ++i) lookup.emplace(class_names[i], static_cast<int>(i));
  std::vector<int> out;
  out.reserve(windows.size());
  for (const auto& w : windows) {
    auto it = lookup.find(w.label);
    if (it == lookup.end()) throw InvalidConfig("window label '" + w.label + "' missing from class_names");
    out.push_back(it->second);
  }
  return out;
}

std::vector<Window> windows_for_sequence(const TokenSequence& seq, std::size_t window_size,
                                         std::size_t episode_index) {
  if (window_size == 0) throw InvalidConfig("window size must be at least 1");
  std::vector<Window> out;
  out.reserve(seq.tokens.size());
  for (std::size_t t = 0; t < seq.tokens.size(); ++t) {
    Window w;
    w.tokens.assign(window_size, kPaddingToken);
    const std::size_t filled = std::min(t + 1, window_size);
    std::copy(seq.tokens.begin() + static_cast<std::ptrdiff_t>(t + 1 - filled),
              seq.tokens.begin() + static_cast<std::ptrdiff_t>(t + 1),
              w.tokens.end() - static_cast<std::ptrdiff_t>(filled));
    w.label = seq.label;
    w.origin = {episode_index, t};
    out.push_back(std::move(w));
  }
  return out;
}

WindowDataset build_window_dataset(std::span<const TokenSequence> sequences, std::size_t window_size,
                                   std::vector<std::string> class_names) {
  if (window_size == 0) throw InvalidConfig("window size must be at least 1");
  WindowDataset ds;
  ds.window_size = window_size;
  if (class_names.empty()) {
    std::unordered_set<std::string> seen;
    for (const auto& s : sequences) {
      if (seen.insert(s.label).second) class_names.push_back(s.label);
    }
  }
  ds.class_names = std::move(class_names);

  std::size_t total = 0;
  for (const auto& s : sequences) total += s.tokens.size();
  ds.windows.reserve(total);
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    auto ws = windows_for_sequence(sequences[i], window_size, i);
    std::move(ws.begin(), ws.end(), std::back_inserter(ds.windows));
  }
  return ds;
}

void write_windows(std::ostream& out, const WindowDataset& dataset, std::size_t vocab_size) {
  const nlohmann::json header = {{"window_size", dataset.window_size},
                                 {"class_names", dataset.class_names},
                                 {"vocab_size", vocab_size}};
  out << header.dump() << '\n';
  for (const auto& w : dataset.windows) {
    const nlohmann::json record = {{"label", w.label}, {"tokens", w.tokens}};
    out << record.dump() << '\n';
  }
}

}  // namespace sewhar

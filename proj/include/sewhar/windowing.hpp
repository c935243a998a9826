#pragma once

#include "sewhar/encoding.hpp"

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace sewhar {

// One sensor event window: the W most recent tokens ending at one event,
// zero-padded on the left when the episode has fewer than W events so far.
struct Window {
  std::vector<Token> tokens;
  std::string label;
  struct Origin {
    std::size_t episode = 0;
    std::size_t event = 0;  // index of the last (most recent) event

    bool operator==(const Origin&) const = default;
  } origin;

  bool operator==(const Window&) const = default;
};

struct WindowDataset {
  std::vector<Window> windows;
  std::size_t window_size = 0;
  std::vector<std::string> class_names;

  // Position of each window's label in class_names.
  std::vector<int> label_indexes() const;
};

// Exactly seq.tokens.size() windows, one per event. Throws InvalidConfig if
// window_size is 0.
std::vector<Window> windows_for_sequence(const TokenSequence& seq, std::size_t window_size,
                                         std::size_t episode_index = 0);

// class_names defaults to the sequence labels in first-appearance order.
WindowDataset build_window_dataset(std::span<const TokenSequence> sequences, std::size_t window_size,
                                   std::vector<std::string> class_names = {});

// Header record {window_size, class_names, vocab_size}, then one {label, tokens} per line.
void write_windows(std::ostream& out, const WindowDataset& dataset, std::size_t vocab_size);

}  // namespace sewhar

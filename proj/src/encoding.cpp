#include "sewhar/encoding.hpp"

#include "sewhar/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace sewhar {

namespace {

std::optional<double> parse_number(std::string_view s) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc{} || ptr != end || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::string format_number(double v) {
  if (v == 0.0) v = 0.0;  // drop the sign of -0
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

std::string_view to_string(Normalization policy) {
  switch (policy) {
    case Normalization::Identity: return "identity";
    case Normalization::NearestInteger: return "nearest-integer";
    case Normalization::NearestHalf: return "nearest-half";
  }
  return "identity";
}

std::optional<Normalization> parse_normalization(std::string_view text) {
  for (auto p : {Normalization::Identity, Normalization::NearestInteger, Normalization::NearestHalf}) {
    if (text == to_string(p)) return p;
  }
  return std::nullopt;
}

std::string make_word(std::string_view sensor_id, std::string_view value, Normalization policy) {
  std::string word(sensor_id);
  if (policy != Normalization::Identity) {
    if (auto number = parse_number(value)) {
      const double rounded = policy == Normalization::NearestHalf ? std::round(*number * 2.0) / 2.0
                                                                  : std::round(*number);
      return word + format_number(rounded);
    }
  }
  word.append(value);
  return word;
}

Vocabulary Vocabulary::from_counts(const std::map<std::string, std::size_t>& counts,
                                   Normalization policy) {
  if (counts.empty()) throw EmptyCorpus("cannot build a vocabulary from an empty corpus");
  std::vector<std::pair<std::string, std::size_t>> entries(counts.begin(), counts.end());
  // std::map iteration is already lexicographic; a stable sort on count keeps
  // that order among ties.
  std::stable_sort(entries.begin(), entries.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  Vocabulary v;
  v.policy_ = policy;
  v.index_to_word_.reserve(entries.size());
  v.counts_.reserve(entries.size());
  for (auto& [word, count] : entries) {
    v.word_to_index_.emplace(word, static_cast<Token>(v.index_to_word_.size() + 1));
    v.index_to_word_.push_back(std::move(word));
    v.counts_.push_back(count);
  }
  return v;
}

std::optional<Token> Vocabulary::find(std::string_view word) const {
  auto it = word_to_index_.find(std::string(word));
  if (it == word_to_index_.end()) return std::nullopt;
  return it->second;
}

const std::string& Vocabulary::word(Token index) const {
  if (index < 1 || static_cast<std::size_t>(index) > size()) {
    throw TokenOutOfRange("token " + std::to_string(index) + " outside vocabulary of size " +
                          std::to_string(size()));
  }
  return index_to_word_[static_cast<std::size_t>(index) - 1];
}

std::size_t Vocabulary::count(Token index) const {
  word(index);
  return counts_[static_cast<std::size_t>(index) - 1];
}

Vocabulary build_vocabulary(std::span<const Episode> episodes, Normalization policy) {
  std::map<std::string, std::size_t> counts;
  for (const auto& ep : episodes) {
    for (const auto& ev : ep.events) ++counts[make_word(ev.sensor_id, ev.value, policy)];
  }
  return Vocabulary::from_counts(counts, policy);
}

TokenSequence encode_episode(const Episode& episode, const Vocabulary& vocab, UnknownWordPolicy unknown) {
  TokenSequence seq;
  seq.label = episode.label;
  seq.tokens.reserve(episode.events.size());
  for (const auto& ev : episode.events) {
    const std::string word = make_word(ev.sensor_id, ev.value, vocab.normalization());
    if (auto index = vocab.find(word)) {
      seq.tokens.push_back(*index);
    } else if (unknown == UnknownWordPolicy::MapToExtra) {
      seq.tokens.push_back(static_cast<Token>(vocab.size() + 1));
    } else {
      throw UnknownWord("word '" + word + "' is not in the vocabulary");
    }
  }
  return seq;
}

std::vector<TokenSequence> encode_dataset(const Dataset& dataset, const Vocabulary& vocab,
                                          UnknownWordPolicy unknown) {
  std::vector<TokenSequence> out;
  out.reserve(dataset.episodes.size());
  for (const auto& ep : dataset.episodes) out.push_back(encode_episode(ep, vocab, unknown));
  return out;
}

std::size_t max_token(const Vocabulary& vocab, UnknownWordPolicy unknown) {
  return vocab.size() + (unknown == UnknownWordPolicy::MapToExtra ? 1 : 0);
}

void write_vocabulary(std::ostream& out, const Vocabulary& vocab) {
  out << "#normalization=" << to_string(vocab.normalization()) << '\n';
  for (std::size_t i = 1; i <= vocab.size(); ++i) {
    const auto index = static_cast<Token>(i);
    out << i << '\t' << vocab.word(index) << '\t' << vocab.count(index) << '\n';
  }
}

Vocabulary read_vocabulary(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("#normalization=", 0) != 0) {
    throw ArtifactError("vocabulary file: missing '#normalization=' header");
  }
  auto policy = parse_normalization(std::string_view(line).substr(15));
  if (!policy) throw ArtifactError("vocabulary file: unknown normalization '" + line.substr(15) + "'");

  std::map<std::string, std::size_t> counts;
  std::vector<std::string> order;
  std::size_t expected = 1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::size_t index = 0, count = 0;
    std::string word;
    if (!(fields >> index >> word >> count) || index != expected) {
      throw ArtifactError("vocabulary file: bad entry '" + line + "'");
    }
    ++expected;
    counts[word] = count;
    order.push_back(word);
  }
  Vocabulary vocab = Vocabulary::from_counts(counts, *policy);
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (vocab.word(static_cast<Token>(i + 1)) != order[i]) {
      throw ArtifactError("vocabulary file: entries are not in frequency order");
    }
  }
  return vocab;
}

void save_vocabulary(const std::string& path, const Vocabulary& vocab) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArtifactError("cannot open '" + path + "' for writing");
  write_vocabulary(out, vocab);
}

Vocabulary load_vocabulary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArtifactError("cannot open '" + path + "'");
  return read_vocabulary(in);
}

}  // namespace sewhar

#pragma once

#include "sewhar/event_log.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace sewhar {

using Token = std::int32_t;

// Token 0 is never assigned to a word; it marks window padding.
inline constexpr Token kPaddingToken = 0;

// How numeric sensor values are rounded before they become part of a word.
enum class Normalization { Identity, NearestInteger, NearestHalf };

std::string_view to_string(Normalization policy);
std::optional<Normalization> parse_normalization(std::string_view text);

// "M001" + "ON" -> "M001ON". Numeric values are rounded per policy first, so
// "T001" + "21.46" under NearestHalf -> "T00121.5".
std::string make_word(std::string_view sensor_id, std::string_view value, Normalization policy);

enum class UnknownWordPolicy {
  Error,        // encode throws UnknownWord
  MapToExtra,   // unseen words become index size()+1
};

// Bijection between sensor words and indexes 1..size(), ordered by descending
// corpus frequency with ties broken lexicographically.
class Vocabulary {
 public:
  Vocabulary() = default;

  // Throws EmptyCorpus when counts is empty.
  static Vocabulary from_counts(const std::map<std::string, std::size_t>& counts, Normalization policy);

  std::size_t size() const { return index_to_word_.size(); }
  Normalization normalization() const { return policy_; }

  std::optional<Token> find(std::string_view word) const;
  // index in [1, size()]
  const std::string& word(Token index) const;
  std::size_t count(Token index) const;

  bool operator==(const Vocabulary& other) const {
    return policy_ == other.policy_ && index_to_word_ == other.index_to_word_ && counts_ == other.counts_;
  }

 private:
  Normalization policy_ = Normalization::NearestHalf;
  std::vector<std::string> index_to_word_;  // slot i holds the word of index i+1
  std::vector<std::size_t> counts_;
  std::unordered_map<std::string, Token> word_to_index_;
};

// Counts every event of every episode. Throws EmptyCorpus.
Vocabulary build_vocabulary(std::span<const Episode> episodes, Normalization policy);

struct TokenSequence {
  std::vector<Token> tokens;
  std::string label;

  bool operator==(const TokenSequence&) const = default;
};

TokenSequence encode_episode(const Episode& episode, const Vocabulary& vocab,
                             UnknownWordPolicy unknown = UnknownWordPolicy::Error);

std::vector<TokenSequence> encode_dataset(const Dataset& dataset, const Vocabulary& vocab,
                                          UnknownWordPolicy unknown = UnknownWordPolicy::Error);

// Largest token value the encoder can emit under the given policy.
std::size_t max_token(const Vocabulary& vocab, UnknownWordPolicy unknown);

// Vocabulary file: "#normalization=<policy>" then "index\tword\tcount" lines.
void write_vocabulary(std::ostream& out, const Vocabulary& vocab);
Vocabulary read_vocabulary(std::istream& in);

void save_vocabulary(const std::string& path, const Vocabulary& vocab);
Vocabulary load_vocabulary(const std::string& path);

}  // namespace sewhar

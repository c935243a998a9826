#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sewhar {

// Entry point of the `sewhar` tool. Returns the process exit code: 0 on
// success, nonzero after printing a one-line diagnostic to err.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Artifact directory layout written by `prepare`.
inline constexpr const char* kEpisodesFile = "episodes.jsonl";
inline constexpr const char* kVocabularyFile = "vocabulary.tsv";

}  // namespace sewhar

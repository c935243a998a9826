#pragma once

#include "sewhar/train_eval.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace sewhar {

struct ReportMeta {
  std::string dataset;  // artifact source
  std::size_t vocab_size = 0;
  std::string precision = "float";
  ExperimentSpec spec;
};

// Machine-readable experiment report (JSON). Contains no wall-clock values,
// so two runs with the same seed produce identical bytes; timings go to a
// separate file written by write_timing.
void write_report(std::ostream& out, const std::vector<ExperimentReport>& reports, const ReportMeta& meta);
void write_timing(std::ostream& out, const std::vector<ExperimentReport>& reports);

// Reads what write_report wrote (per-fold scores, epochs, confusion
// matrices). Throws InvalidConfig on malformed input.
std::vector<ExperimentReport> read_report(std::istream& in);
// Fills FoldResult::seconds and mean_seconds from a timing file.
void merge_timing(std::istream& in, std::vector<ExperimentReport>& reports);

// Human-readable tables, rows = model variants, columns = window sizes:
// weighted F1, balanced accuracy, epochs and (when known) training time.
std::string format_tables(const std::vector<ExperimentReport>& reports, bool with_time);

void write_eval_report(std::ostream& out, const EvalReport& report, const std::vector<std::string>& class_names,
                       const std::map<std::string, std::string>& context);

// Flat "key = value" experiment file; '#' starts a comment.
//   model = fcn-emb, lstm-emb
//   window_sizes = 100, 75, 50, 25
//   seed / batch_size / patience / max_epochs / folds / fold_limit / train_fraction /
//   embedding_dim / jobs / artifact / output
struct ExperimentFile {
  ExperimentSpec spec;
  std::string artifact;
  std::string output;
};

// Throws InvalidConfig naming the offending key.
void apply_setting(ExperimentFile& file, const std::string& key, const std::string& value);
ExperimentFile parse_experiment_config(std::istream& in);
ExperimentFile load_experiment_config(const std::string& path);

std::vector<ModelVariant> parse_variant_list(const std::string& text);
std::vector<std::size_t> parse_size_list(const std::string& text);

}  // namespace sewhar

#include "sewhar/cli.hpp"

#include "sewhar/diagnostics.hpp"
#include "sewhar/encoding.hpp"
#include "sewhar/error.hpp"
#include "sewhar/event_log.hpp"
#include "sewhar/models.hpp"
#include "sewhar/report.hpp"
#include "sewhar/synth.hpp"
#include "sewhar/train_eval.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <numeric>
#include <sstream>

namespace sewhar {

namespace fs = std::filesystem;

namespace {

struct Artifact {
  Dataset dataset;
  Vocabulary vocab;
  std::vector<TokenSequence> sequences;
};

Artifact load_artifact(const std::string& dir) {
  const fs::path root(dir);
  if (!fs::is_directory(root)) throw ArtifactError("artifact directory '" + dir + "' does not exist");
  Artifact a;
  a.dataset = load_dataset((root / kEpisodesFile).string());
  a.vocab = load_vocabulary((root / kVocabularyFile).string());
  a.sequences = encode_dataset(a.dataset, a.vocab);
  return a;
}

enum class Precision { Float, Double };

Precision precision_from_env() {
  const char* v = std::getenv("SEWHAR_PRECISION");
  if (v == nullptr || std::string_view(v).empty() || std::string_view(v) == "float") return Precision::Float;
  if (std::string_view(v) == "double") return Precision::Double;
  throw InvalidConfig(std::string("SEWHAR_PRECISION must be 'float' or 'double', got '") + v + "'");
}

std::string checkpoint_name(ModelVariant v, std::size_t window, std::size_t fold) {
  return variant_name(v) + "-w" + std::to_string(window) + "-fold" + std::to_string(fold + 1) + ".ckpt";
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArtifactError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw ArtifactError("write failed for '" + path.string() + "'");
}

std::string exact(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::size_t meta_size(const CheckpointMeta& meta, const std::string& key) {
  const auto it = meta.extra.find(key);
  if (it == meta.extra.end()) throw CheckpointError("checkpoint metadata lacks '" + key + "'");
  return std::stoull(it->second);
}

// ---------------------------------------------------------------- commands

struct SynthArgs {
  SynthConfig config;
  std::string output;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  const auto ds = generate(a.config);
  std::ostringstream text;
  write_raw_log(text, ds);
  write_text(a.output, text.str());
  out << "wrote " << a.output << ": " << ds.event_count() << " events, " << ds.episodes.size() << " episodes, "
      << ds.class_names.size() << " classes\n";
  return 0;
}

struct PrepareArgs {
  std::string input;
  std::string output;
  bool strict = false;
  std::string normalization = "nearest-half";
};

int cmd_prepare(const PrepareArgs& a, std::ostream& out, std::ostream& err) {
  const auto policy = parse_normalization(a.normalization);
  if (!policy) throw InvalidConfig("unknown normalization '" + a.normalization + "'");
  std::ifstream in(a.input);
  if (!in) throw ArtifactError("cannot open '" + a.input + "'");

  const auto raw = parse_log(in, ParseOptions{.lenient = !a.strict});
  for (const auto& w : raw.warnings) err << "warning: " << w << '\n';
  auto seg = segment_episodes(raw.events, SegmentOptions{.lenient = !a.strict});
  for (const auto& w : seg.warnings) err << "warning: " << w << '\n';
  const auto dataset = make_dataset(std::move(seg.episodes), fs::path(a.input).filename().string());
  const auto vocab = build_vocabulary(dataset.episodes, *policy);

  fs::create_directories(a.output);
  save_dataset((fs::path(a.output) / kEpisodesFile).string(), dataset);
  save_vocabulary((fs::path(a.output) / kVocabularyFile).string(), vocab);
  out << "events " << raw.events.size() << ", episodes " << dataset.episodes.size() << ", classes "
      << dataset.class_names.size() << ", vocabulary " << vocab.size() << ", skipped lines " << raw.skipped_lines
      << '\n';
  return 0;
}

struct TrainArgs {
  std::string config;
  std::string artifact;
  std::string output;
  std::string models;
  std::string windows;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> batch_size, patience, max_epochs, folds, fold_limit, jobs, embedding_dim;
  std::optional<double> train_fraction;
};

template <typename T>
int train_as(ExperimentFile& file, const std::string& precision, std::ostream& out, std::ostream& err) {
  const auto artifact = load_artifact(file.artifact);
  const fs::path dir(file.output);
  fs::create_directories(dir);
  auto& spec = file.spec;

  std::mutex save_mutex;
  FoldCallback<T> save = [&](const FoldContext& ctx, Model<T>& model, const nn::Adam<T>& adam, const FoldResult&) {
    CheckpointMeta meta;
    meta.class_names = artifact.dataset.class_names;
    meta.extra = {{"variant", variant_name(ctx.variant)},
                  {"window_size", std::to_string(ctx.window_size)},
                  {"fold", std::to_string(ctx.fold)},
                  {"seed", std::to_string(spec.train.seed)},
                  {"train_fraction", exact(spec.train_fraction)},
                  {"dataset", artifact.dataset.source},
                  {"normalization", std::string(to_string(artifact.vocab.normalization()))}};
    std::lock_guard lock(save_mutex);
    save_checkpoint((dir / checkpoint_name(ctx.variant, ctx.window_size, ctx.fold)).string(), model, meta, &adam);
  };
  std::mutex log_mutex;
  auto log = [&](const std::string& line) {
    std::lock_guard lock(log_mutex);
    err << line << std::endl;
  };

  const auto reports = run_experiment<T>(artifact.sequences, artifact.dataset.class_names, artifact.vocab.size(),
                                         spec, save, log);
  ReportMeta meta{artifact.dataset.source, artifact.vocab.size(), precision, spec};
  {
    std::ostringstream json;
    write_report(json, reports, meta);
    write_text(dir / "report.json", json.str());
  }
  {
    std::ostringstream json;
    write_timing(json, reports);
    write_text(dir / "timing.json", json.str());
  }
  write_text(dir / "report.txt", format_tables(reports, false));
  out << format_tables(reports, true);
  return 0;
}

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  ExperimentFile file;
  if (!a.config.empty()) file = load_experiment_config(a.config);
  if (!a.artifact.empty()) file.artifact = a.artifact;
  if (!a.output.empty()) file.output = a.output;
  if (!a.models.empty()) apply_setting(file, "model", a.models);
  if (!a.windows.empty()) apply_setting(file, "window_sizes", a.windows);
  auto& spec = file.spec;
  if (a.seed) spec.train.seed = *a.seed;
  if (a.batch_size) spec.train.batch_size = *a.batch_size;
  if (a.patience) spec.train.patience = *a.patience;
  if (a.max_epochs) spec.train.max_epochs = *a.max_epochs;
  if (a.folds) spec.folds = *a.folds;
  if (a.fold_limit) spec.fold_limit = *a.fold_limit;
  if (a.jobs) spec.jobs = *a.jobs;
  if (a.embedding_dim) spec.embedding_dim = *a.embedding_dim;
  if (a.train_fraction) spec.train_fraction = *a.train_fraction;
  if (spec.variants.empty()) spec.variants = {ModelVariant{}};
  if (file.artifact.empty()) throw InvalidConfig("train needs --artifact (or 'artifact' in the config file)");
  if (file.output.empty()) throw InvalidConfig("train needs --output (or 'output' in the config file)");

  return precision_from_env() == Precision::Double ? train_as<double>(file, "double", out, err)
                                                   : train_as<float>(file, "float", out, err);
}

struct EvaluateArgs {
  std::string checkpoint;
  std::string artifact;
  std::string output;
  std::optional<std::size_t> window;
  bool all = false;
};

template <typename T>
int evaluate_as(const EvaluateArgs& a, std::ostream& out) {
  auto ckpt = load_checkpoint<T>(a.checkpoint);
  const auto artifact = load_artifact(a.artifact);
  const auto& config = ckpt.model.config();
  if (config.vocab_size != artifact.vocab.size()) {
    throw ArchitectureMismatch("checkpoint expects a vocabulary of " + std::to_string(config.vocab_size) +
                               " words, the artifact has " + std::to_string(artifact.vocab.size()));
  }
  if (ckpt.meta.class_names != artifact.dataset.class_names) {
    throw ArchitectureMismatch("checkpoint classes differ from the artifact's classes");
  }
  const std::size_t w = a.window.value_or(config.window_size);
  if (w != config.window_size) {
    throw ArchitectureMismatch("checkpoint was built for window size " + std::to_string(config.window_size) +
                               ", not " + std::to_string(w));
  }

  const auto data = WindowMatrix::from(build_window_dataset(artifact.sequences, w, artifact.dataset.class_names));
  std::vector<std::size_t> rows;
  std::string subset = "all";
  if (a.all) {
    rows.resize(data.size());
    std::iota(rows.begin(), rows.end(), 0);
  } else {
    const auto seed = meta_size(ckpt.meta, "seed");
    const auto it = ckpt.meta.extra.find("train_fraction");
    const double fraction = it == ckpt.meta.extra.end() ? 0.7 : std::stod(it->second);
    rows = stratified_split(data.labels, fraction, split_seed(seed, w)).second;
    subset = "test";
  }
  const auto report = evaluate(ckpt.model, data, rows);
  std::map<std::string, std::string> context = ckpt.meta.extra;
  context["checkpoint"] = fs::path(a.checkpoint).filename().string();
  context["descriptor"] = describe(config);
  context["subset"] = subset;

  std::ostringstream json;
  write_eval_report(json, report, artifact.dataset.class_names, context);
  if (a.output.empty()) {
    out << json.str();
  } else {
    write_text(a.output, json.str());
    char line[128];
    std::snprintf(line, sizeof line, "balanced accuracy %.4f, weighted F1 %.4f on %zu windows\n",
                  report.balanced_accuracy, report.weighted_f1, rows.size());
    out << line;
  }
  return 0;
}

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
  return precision_from_env() == Precision::Double ? evaluate_as<double>(a, out) : evaluate_as<float>(a, out);
}

int cmd_report(const std::string& input, const std::string& output, std::ostream& out) {
  fs::path report_path(input);
  if (fs::is_directory(report_path)) report_path /= "report.json";
  std::ifstream in(report_path);
  if (!in) throw ArtifactError("cannot open '" + report_path.string() + "'");
  auto reports = read_report(in);
  const auto timing_path = report_path.parent_path() / "timing.json";
  bool with_time = false;
  if (std::ifstream t(timing_path); t) {
    merge_timing(t, reports);
    with_time = true;
  }
  const auto text = format_tables(reports, with_time);
  if (!output.empty()) write_text(output, text);
  out << text;
  return 0;
}

int cmd_gradcheck(const GradientSuiteOptions& options, std::ostream& out) {
  const auto started = std::chrono::steady_clock::now();
  const auto cases = run_gradient_suite(options);
  bool ok = true;
  char line[256];
  for (const auto& c : cases) {
    std::snprintf(line, sizeof line, "%-20s max rel error %.3e over %4zu entries  %s  (worst: %s)\n", c.name.c_str(),
                  c.max_rel_error, c.checked, c.passed ? "ok" : "FAIL", c.worst.c_str());
    out << line;
    ok = ok && c.passed;
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  std::snprintf(line, sizeof line, "gradcheck %s (tolerance %.0e, %.1f s)\n", ok ? "passed" : "FAILED",
                options.tolerance, seconds);
  out << line;
  return ok ? 0 : 1;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Smart-home activity recognition from sensor event windows", "sewhar"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Write a synthetic annotated event log");
  s->add_option("--output", synth.output, "Raw log file to write")->required();
  s->add_option("--seed", synth.config.seed);
  s->add_option("--num-sensors", synth.config.num_sensors);
  s->add_option("--num-classes", synth.config.num_classes);
  s->add_option("--episodes-per-class", synth.config.episodes_per_class, "Episodes of the largest class");
  s->add_option("--min-length", synth.config.min_length);
  s->add_option("--max-length", synth.config.max_length);
  s->add_option("--sensors-per-class", synth.config.sensors_per_class);
  s->add_option("--affinity-exponent", synth.config.affinity_exponent);
  s->add_option("--noise-rate", synth.config.noise_rate);
  s->add_option("--imbalance", synth.config.imbalance, "Largest / smallest class size");
  s->add_option("--other-episodes", synth.config.other_episodes, "-1: as many as the largest class; 0: none");
  s->add_flag("--disjoint", synth.config.disjoint, "Give every class its own sensors");

  PrepareArgs prepare;
  auto* p = app.add_subcommand("prepare", "Parse a raw log into episode and vocabulary artifacts");
  p->add_option("--input", prepare.input, "Raw CASAS-style log")->required();
  p->add_option("--output", prepare.output, "Artifact directory")->required();
  p->add_flag("--strict", prepare.strict, "Fail on malformed lines and dangling end markers");
  p->add_option("--normalization", prepare.normalization, "identity | nearest-integer | nearest-half");

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Run the cross-validated experiment and write checkpoints and reports");
  t->add_option("--config", train.config, "key = value experiment file; flags override it");
  t->add_option("--artifact", train.artifact);
  t->add_option("--output", train.output);
  t->add_option("--model", train.models, "Comma-separated variants, e.g. fcn-emb,lstm-emb");
  t->add_option("--window-size", train.windows, "Comma-separated window sizes");
  t->add_option("--seed", train.seed);
  t->add_option("--batch-size", train.batch_size);
  t->add_option("--patience", train.patience);
  t->add_option("--max-epochs", train.max_epochs);
  t->add_option("--folds", train.folds);
  t->add_option("--fold-limit", train.fold_limit, "Train only the first n folds (0: all)");
  t->add_option("--train-fraction", train.train_fraction);
  t->add_option("--embedding-dim", train.embedding_dim);
  t->add_option("--jobs", train.jobs, "Folds trained concurrently");

  EvaluateArgs evaluate;
  auto* e = app.add_subcommand("evaluate", "Score a checkpoint on an artifact");
  e->add_option("--checkpoint", evaluate.checkpoint)->required();
  e->add_option("--artifact", evaluate.artifact)->required();
  e->add_option("--window-size", evaluate.window);
  e->add_option("--output", evaluate.output, "JSON report file (default: stdout)");
  e->add_flag("--all", evaluate.all, "Score every window instead of the held-out test split");

  std::string report_input, report_output;
  auto* r = app.add_subcommand("report", "Render the result tables of a training run");
  r->add_option("--input", report_input, "Training output directory or report.json")->required();
  r->add_option("--output", report_output, "Also write the tables to this file");

  GradientSuiteOptions grad;
  std::string fault;
  auto* g = app.add_subcommand("gradcheck", "Finite-difference check of every layer and model");
  g->add_option("--seed", grad.seed);
  g->add_option("--inject-fault", fault, "Corrupt the backward pass of this layer kind (negative control)");

  std::vector<const char*> argv{"sewhar"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& ex) {
    err << "sewhar: " << ex.what() << '\n';
    return 2;
  }

  try {
    if (*s) return cmd_synth(synth, out);
    if (*p) return cmd_prepare(prepare, out, err);
    if (*t) return cmd_train(train, out, err);
    if (*e) return cmd_evaluate(evaluate, out);
    if (*r) return cmd_report(report_input, report_output, out);
    if (*g) {
      if (!fault.empty()) grad.fault = fault;
      return cmd_gradcheck(grad, out);
    }
  } catch (const Error& ex) {
    err << "sewhar: " << ex.kind() << ": " << ex.what() << '\n';
    return 1;
  } catch (const std::exception& ex) {
    err << "sewhar: " << ex.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace sewhar

#include "sewhar/report.hpp"

#include "sewhar/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

namespace sewhar {

using nlohmann::json;

namespace {

json scores_json(const EvalReport& r, const std::vector<std::string>& class_names) {
  json per_class = json::array();
  for (std::size_t c = 0; c < r.per_class.size(); ++c) {
    const auto& s = r.per_class[c];
    per_class.push_back({{"class", c < class_names.size() ? class_names[c] : std::to_string(c)},
                         {"precision", s.precision},
                         {"recall", s.recall},
                         {"f1", s.f1},
                         {"support", s.support}});
  }
  json confusion = json::array();
  for (std::size_t t = 0; t < r.confusion.classes(); ++t) {
    json row = json::array();
    for (std::size_t p = 0; p < r.confusion.classes(); ++p) row.push_back(r.confusion.at(t, p));
    confusion.push_back(std::move(row));
  }
  return {{"balanced_accuracy", r.balanced_accuracy},
          {"weighted_f1", r.weighted_f1},
          {"per_class", std::move(per_class)},
          {"confusion", std::move(confusion)}};
}

std::string key_of(const ExperimentReport& r) { return variant_name(r.variant) + "@" + std::to_string(r.window_size); }

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename F>
auto parse_number(const std::string& key, const std::string& value, F convert) {
  try {
    std::size_t used = 0;
    auto v = convert(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::logic_error&) {
    throw InvalidConfig("config: " + key + " expects a number, got '" + value + "'");
  }
}

std::size_t parse_count(const std::string& key, const std::string& value) {
  if (!value.empty() && value[0] == '-') throw InvalidConfig("config: " + key + " must be non-negative");
  return parse_number(key, value, [](const std::string& s, std::size_t* n) { return std::stoull(s, n); });
}

}  // namespace

void write_report(std::ostream& out, const std::vector<ExperimentReport>& reports, const ReportMeta& meta) {
  const auto& t = meta.spec.train;
  json root;
  root["dataset"] = meta.dataset;
  root["vocab_size"] = meta.vocab_size;
  root["precision"] = meta.precision;
  root["protocol"] = {{"seed", t.seed},
                      {"batch_size", t.batch_size},
                      {"patience", t.patience},
                      {"max_epochs", t.max_epochs},
                      {"folds", meta.spec.folds},
                      {"fold_limit", meta.spec.fold_limit},
                      {"train_fraction", meta.spec.train_fraction},
                      {"embedding_dim", meta.spec.embedding_dim},
                      {"optimizer",
                       {{"name", "adam"},
                        {"learning_rate", t.adam.learning_rate},
                        {"beta1", t.adam.beta1},
                        {"beta2", t.adam.beta2},
                        {"epsilon", t.adam.epsilon}}}};
  json experiments = json::array();
  for (const auto& r : reports) {
    json folds = json::array();
    for (std::size_t f = 0; f < r.folds.size(); ++f) {
      const auto& fr = r.folds[f];
      json history = json::array();
      for (const auto& e : fr.history) {
        history.push_back({{"epoch", e.epoch},
                           {"train_loss", e.train_loss},
                           {"validation_loss", e.validation_loss},
                           {"validation_accuracy", e.validation_accuracy}});
      }
      folds.push_back({{"fold", f},
                       {"epochs", fr.epochs},
                       {"best_epoch", fr.best_epoch},
                       {"fit_windows", fr.fit_windows},
                       {"validation_windows", fr.validation_windows},
                       {"test", scores_json(fr.test, r.class_names)},
                       {"history", std::move(history)}});
    }
    experiments.push_back({{"model", variant_name(r.variant)},
                           {"title", variant_title(r.variant)},
                           {"window_size", r.window_size},
                           {"class_names", r.class_names},
                           {"train_windows", r.train_windows},
                           {"test_windows", r.test_windows},
                           {"mean_balanced_accuracy", r.mean_balanced_accuracy},
                           {"mean_weighted_f1", r.mean_weighted_f1},
                           {"mean_epochs", r.mean_epochs},
                           {"folds", std::move(folds)}});
  }
  root["experiments"] = std::move(experiments);
  out << root.dump(2) << '\n';
}

void write_timing(std::ostream& out, const std::vector<ExperimentReport>& reports) {
  json root = json::array();
  for (const auto& r : reports) {
    json seconds = json::array();
    for (const auto& f : r.folds) seconds.push_back(f.seconds);
    root.push_back({{"model", variant_name(r.variant)},
                    {"window_size", r.window_size},
                    {"fold_seconds", std::move(seconds)},
                    {"mean_seconds", r.mean_seconds}});
  }
  out << root.dump(2) << '\n';
}

std::vector<ExperimentReport> read_report(std::istream& in) {
  std::vector<ExperimentReport> out;
  try {
    const json root = json::parse(in);
    for (const auto& e : root.at("experiments")) {
      ExperimentReport r;
      r.variant = parse_variant(e.at("model").get<std::string>());
      r.window_size = e.at("window_size").get<std::size_t>();
      r.class_names = e.at("class_names").get<std::vector<std::string>>();
      r.train_windows = e.at("train_windows").get<std::size_t>();
      r.test_windows = e.at("test_windows").get<std::size_t>();
      for (const auto& f : e.at("folds")) {
        FoldResult fr;
        fr.epochs = f.at("epochs").get<std::size_t>();
        fr.best_epoch = f.at("best_epoch").get<std::size_t>();
        fr.fit_windows = f.at("fit_windows").get<std::size_t>();
        fr.validation_windows = f.at("validation_windows").get<std::size_t>();
        const auto& test = f.at("test");
        std::vector<std::uint64_t> counts;
        for (const auto& row : test.at("confusion")) {
          for (const auto& v : row) counts.push_back(v.get<std::uint64_t>());
        }
        fr.test = make_eval_report(ConfusionMatrix::from_counts(counts));
        for (const auto& h : f.at("history")) {
          fr.history.push_back({h.at("epoch").get<std::size_t>(), h.at("train_loss").get<double>(),
                                h.at("validation_loss").get<double>(), h.at("validation_accuracy").get<double>()});
        }
        r.folds.push_back(std::move(fr));
      }
      finalize_means(r);
      out.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw InvalidConfig(std::string("report: ") + e.what());
  }
  return out;
}

void merge_timing(std::istream& in, std::vector<ExperimentReport>& reports) {
  try {
    const json root = json::parse(in);
    for (const auto& t : root) {
      const std::string key = t.at("model").get<std::string>() + "@" + std::to_string(t.at("window_size").get<std::size_t>());
      for (auto& r : reports) {
        if (key_of(r) != key) continue;
        const auto seconds = t.at("fold_seconds").get<std::vector<double>>();
        for (std::size_t f = 0; f < std::min(seconds.size(), r.folds.size()); ++f) r.folds[f].seconds = seconds[f];
        finalize_means(r);
      }
    }
  } catch (const json::exception& e) {
    throw InvalidConfig(std::string("timing: ") + e.what());
  }
}

std::string format_tables(const std::vector<ExperimentReport>& reports, bool with_time) {
  std::vector<ModelVariant> variants;
  std::vector<std::size_t> windows;
  for (const auto& r : reports) {
    if (std::find(variants.begin(), variants.end(), r.variant) == variants.end()) variants.push_back(r.variant);
    if (std::find(windows.begin(), windows.end(), r.window_size) == windows.end()) windows.push_back(r.window_size);
  }
  auto find = [&](ModelVariant v, std::size_t w) -> const ExperimentReport* {
    for (const auto& r : reports) {
      if (r.variant == v && r.window_size == w) return &r;
    }
    return nullptr;
  };

  std::size_t name_width = 5;
  for (auto v : variants) name_width = std::max(name_width, variant_title(v).size());

  std::ostringstream out;
  char buf[64];
  auto table = [&](const std::string& title, auto cell) {
    out << title << '\n';
    out << std::string(name_width, ' ');
    for (auto w : windows) {
      std::snprintf(buf, sizeof buf, "  %9s", ("W=" + std::to_string(w)).c_str());
      out << buf;
    }
    out << '\n';
    for (auto v : variants) {
      const auto name = variant_title(v);
      out << name << std::string(name_width - name.size(), ' ');
      for (auto w : windows) {
        const auto* r = find(v, w);
        std::snprintf(buf, sizeof buf, "  %9s", r ? cell(*r).c_str() : "-");
        out << buf;
      }
      out << '\n';
    }
    out << '\n';
  };
  auto fmt = [](const char* pattern, double v) {
    char b[32];
    std::snprintf(b, sizeof b, pattern, v);
    return std::string(b);
  };
  table("Weighted F1 (%)", [&](const ExperimentReport& r) { return fmt("%.2f", 100.0 * r.mean_weighted_f1); });
  table("Balanced accuracy (%)", [&](const ExperimentReport& r) { return fmt("%.2f", 100.0 * r.mean_balanced_accuracy); });
  table("Epochs (mean over folds)", [&](const ExperimentReport& r) { return fmt("%.1f", r.mean_epochs); });
  if (with_time) {
    table("Training time per fold (s)", [&](const ExperimentReport& r) { return fmt("%.1f", r.mean_seconds); });
  }
  return out.str();
}

void write_eval_report(std::ostream& out, const EvalReport& report, const std::vector<std::string>& class_names,
                       const std::map<std::string, std::string>& context) {
  json root = scores_json(report, class_names);
  root["context"] = context;
  root["windows"] = report.confusion.total();
  out << root.dump(2) << '\n';
}

std::vector<ModelVariant> parse_variant_list(const std::string& text) {
  std::vector<ModelVariant> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    out.push_back(parse_variant(item));
  }
  if (out.empty()) throw InvalidConfig("no model variant given");
  return out;
}

std::vector<std::size_t> parse_size_list(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    const auto v = parse_count("window_sizes", item);
    if (v == 0) throw InvalidConfig("window sizes must be positive");
    out.push_back(v);
  }
  if (out.empty()) throw InvalidConfig("no window size given");
  return out;
}

void apply_setting(ExperimentFile& file, const std::string& key, const std::string& value) {
  auto& spec = file.spec;
  if (key == "model" || key == "models") {
    spec.variants = parse_variant_list(value);
  } else if (key == "window_sizes" || key == "window_size") {
    spec.window_sizes = parse_size_list(value);
  } else if (key == "seed") {
    spec.train.seed = parse_count(key, value);
  } else if (key == "batch_size") {
    spec.train.batch_size = parse_count(key, value);
  } else if (key == "patience") {
    spec.train.patience = parse_count(key, value);
  } else if (key == "max_epochs") {
    spec.train.max_epochs = parse_count(key, value);
  } else if (key == "folds") {
    spec.folds = parse_count(key, value);
  } else if (key == "fold_limit") {
    spec.fold_limit = parse_count(key, value);
  } else if (key == "train_fraction") {
    spec.train_fraction = parse_number(key, value, [](const std::string& s, std::size_t* n) { return std::stod(s, n); });
  } else if (key == "embedding_dim") {
    spec.embedding_dim = parse_count(key, value);
  } else if (key == "jobs") {
    spec.jobs = parse_count(key, value);
  } else if (key == "learning_rate") {
    spec.train.adam.learning_rate =
        parse_number(key, value, [](const std::string& s, std::size_t* n) { return std::stod(s, n); });
  } else if (key == "artifact") {
    file.artifact = value;
  } else if (key == "output") {
    file.output = value;
  } else {
    throw InvalidConfig("config: unknown key '" + key + "'");
  }
}

ExperimentFile parse_experiment_config(std::istream& in) {
  ExperimentFile file;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw InvalidConfig("config line " + std::to_string(number) + ": expected key = value");
    apply_setting(file, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return file;
}

ExperimentFile load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidConfig("cannot open config file " + path);
  return parse_experiment_config(in);
}

}  // namespace sewhar

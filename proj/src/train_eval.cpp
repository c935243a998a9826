#include "sewhar/train_eval.hpp"

#include "sewhar/error.hpp"
#include "sewhar/nn/loss.hpp"
#include "sewhar/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <map>
#include <thread>

namespace sewhar {

void TrainConfig::validate() const {
  if (batch_size < 1) throw InvalidConfig("batch_size must be at least 1");
  if (patience < 1) throw InvalidConfig("patience must be at least 1");
  if (max_epochs < 1) throw InvalidConfig("max_epochs must be at least 1");
  if (!(adam.learning_rate > 0.0)) throw InvalidConfig("learning rate must be positive");
}

WindowMatrix WindowMatrix::from(const WindowDataset& ds) {
  WindowMatrix m;
  m.window = ds.window_size;
  m.class_names = ds.class_names;
  m.labels = ds.label_indexes();
  m.tokens.reserve(ds.windows.size() * ds.window_size);
  for (const auto& w : ds.windows) {
    if (w.tokens.size() != ds.window_size) throw ShapeMismatch("window length differs from window_size");
    m.tokens.insert(m.tokens.end(), w.tokens.begin(), w.tokens.end());
  }
  return m;
}

TokenBatch WindowMatrix::batch(std::span<const std::size_t> rows) const {
  TokenBatch b;
  b.batch = rows.size();
  b.length = window;
  b.tokens.resize(rows.size() * window);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(tokens.begin() + static_cast<std::ptrdiff_t>(rows[i] * window), window,
                b.tokens.begin() + static_cast<std::ptrdiff_t>(i * window));
  }
  return b;
}

namespace {

std::map<int, std::vector<std::size_t>> by_class(std::span<const int> labels) {
  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i]].push_back(i);
  return groups;
}

template <typename Items>
std::vector<std::size_t> gather(const Items& items, std::span<const std::size_t> rows) {
  std::vector<std::size_t> out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(items[r]);
  return out;
}

WindowDataset subset(const WindowDataset& ds, std::span<const std::size_t> rows) {
  WindowDataset out;
  out.window_size = ds.window_size;
  out.class_names = ds.class_names;
  out.windows.reserve(rows.size());
  for (auto r : rows) out.windows.push_back(ds.windows[r]);
  return out;
}

}  // namespace

Partition stratified_split(std::span<const int> labels, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw InvalidConfig("train fraction must lie in (0, 1)");
  Rng rng(seed);
  Partition p;
  for (auto& [label, rows] : by_class(labels)) {
    const std::size_t n = rows.size();
    if (n < 2) {
      throw ClassTooSmall("class " + std::to_string(label) + " has " + std::to_string(n) +
                          " window(s); a stratified split needs at least 2");
    }
    // Round half up; the small epsilon absorbs representation error such as 0.7 * 5 = 3.4999...
    auto take = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(n) + 0.5 + 1e-9));
    take = std::clamp<std::size_t>(take, 1, n - 1);
    rng.shuffle(std::span(rows));
    p.first.insert(p.first.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(take));
    p.second.insert(p.second.end(), rows.begin() + static_cast<std::ptrdiff_t>(take), rows.end());
  }
  std::sort(p.first.begin(), p.first.end());
  std::sort(p.second.begin(), p.second.end());
  return p;
}

std::vector<Partition> stratified_kfold(std::span<const int> labels, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw InvalidConfig("k-fold needs k >= 2");
  Rng rng(seed);
  std::vector<std::vector<std::size_t>> folds(k);
  for (auto& [label, rows] : by_class(labels)) {
    const std::size_t n = rows.size();
    if (n < k) {
      throw ClassTooSmall("class " + std::to_string(label) + " has " + std::to_string(n) + " window(s); " +
                          std::to_string(k) + "-fold needs at least " + std::to_string(k));
    }
    rng.shuffle(std::span(rows));
    std::size_t start = 0;
    for (std::size_t f = 0; f < k; ++f) {
      const std::size_t size = n / k + (f < n % k ? 1 : 0);
      folds[f].insert(folds[f].end(), rows.begin() + static_cast<std::ptrdiff_t>(start),
                      rows.begin() + static_cast<std::ptrdiff_t>(start + size));
      start += size;
    }
  }
  std::vector<Partition> out(k);
  for (std::size_t f = 0; f < k; ++f) {
    out[f].second = folds[f];
    for (std::size_t g = 0; g < k; ++g) {
      if (g != f) out[f].first.insert(out[f].first.end(), folds[g].begin(), folds[g].end());
    }
    std::sort(out[f].first.begin(), out[f].first.end());
    std::sort(out[f].second.begin(), out[f].second.end());
  }
  return out;
}

std::pair<WindowDataset, WindowDataset> stratified_split(const WindowDataset& ds, double train_fraction,
                                                         std::uint64_t seed) {
  const auto labels = ds.label_indexes();
  const auto p = stratified_split(labels, train_fraction, seed);
  return {subset(ds, p.first), subset(ds, p.second)};
}

std::vector<std::pair<WindowDataset, WindowDataset>> stratified_kfold(const WindowDataset& ds, std::size_t k,
                                                                      std::uint64_t seed) {
  const auto labels = ds.label_indexes();
  std::vector<std::pair<WindowDataset, WindowDataset>> out;
  for (const auto& p : stratified_kfold(labels, k, seed)) out.emplace_back(subset(ds, p.first), subset(ds, p.second));
  return out;
}

bool EarlyStopping::update(double validation_loss) {
  improved_ = validation_loss < best_loss_;
  if (improved_) {
    best_loss_ = validation_loss;
    best_epoch_ = epochs_;
    since_best_ = 0;
  } else {
    ++since_best_;
  }
  ++epochs_;
  return since_best_ >= patience_;
}

template <typename T>
std::pair<double, double> validation_loss(Model<T>& model, const WindowMatrix& data, std::span<const std::size_t> rows,
                                          std::size_t batch_size) {
  double loss = 0.0;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < rows.size(); start += batch_size) {
    const auto chunk = rows.subspan(start, std::min(batch_size, rows.size() - start));
    const auto targets = gather(data.labels, chunk);
    const std::vector<int> t(targets.begin(), targets.end());
    const auto logits = model.forward(data.batch(chunk), nn::Mode::Infer);
    const auto ce = nn::softmax_cross_entropy(logits, t);
    loss += ce.loss * static_cast<double>(chunk.size());
    const std::size_t classes = logits.dim(1);
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      const T* row = ce.probs.data() + i * classes;
      const auto best = static_cast<int>(std::max_element(row, row + classes) - row);
      correct += best == t[i] ? 1 : 0;
    }
  }
  const double n = static_cast<double>(std::max<std::size_t>(rows.size(), 1));
  return {loss / n, static_cast<double>(correct) / n};
}

template <typename T>
TrainResult train_model(Model<T>& model, const WindowMatrix& data, std::span<const std::size_t> fit,
                        std::span<const std::size_t> validation, const TrainConfig& config,
                        const std::function<void(const EpochRecord&)>& on_epoch, nn::Adam<T>* optimizer) {
  config.validate();
  if (fit.empty() || validation.empty()) throw InvalidConfig("train_model needs non-empty fit and validation sets");
  const auto started = std::chrono::steady_clock::now();

  nn::Adam<T> own_optimizer(config.adam);
  nn::Adam<T>& adam = optimizer ? *optimizer : own_optimizer;
  EarlyStopping stopper(config.patience);
  std::vector<nn::Tensor<T>> best_state = model.state();
  TrainResult result;
  std::vector<std::size_t> order(fit.begin(), fit.end());
  std::vector<int> targets;

  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    Rng rng(derive_seed(config.seed, epoch));
    rng.shuffle(std::span(order));

    double train_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const auto chunk = std::span<const std::size_t>(order).subspan(start, std::min(config.batch_size, order.size() - start));
      targets.assign(chunk.size(), 0);
      for (std::size_t i = 0; i < chunk.size(); ++i) targets[i] = data.labels[chunk[i]];

      const auto logits = model.forward(data.batch(chunk), nn::Mode::Train);
      const auto ce = nn::softmax_cross_entropy(logits, targets);
      if (!std::isfinite(ce.loss)) {
        throw NonFiniteLoss("non-finite training loss at epoch " + std::to_string(epoch + 1) + ", batch starting " +
                            std::to_string(start));
      }
      model.zero_grad();
      model.backward(ce.grad_logits);
      const auto params = model.params();
      adam.step(params);
      train_loss += ce.loss * static_cast<double>(chunk.size());
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = train_loss / static_cast<double>(order.size());
    std::tie(record.validation_loss, record.validation_accuracy) =
        validation_loss(model, data, validation, config.batch_size);
    if (!std::isfinite(record.validation_loss)) {
      throw NonFiniteLoss("non-finite validation loss at epoch " + std::to_string(epoch + 1));
    }
    result.history.push_back(record);
    if (on_epoch) on_epoch(record);

    const bool stop = stopper.update(record.validation_loss);
    if (stopper.improved()) best_state = model.state();
    if (stop) break;
  }

  model.load_state(best_state);
  result.best_epoch = stopper.best_epoch();
  result.epochs = stopper.epochs();
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

template <typename T>
std::vector<int> predict_labels(Model<T>& model, const WindowMatrix& data, std::span<const std::size_t> rows,
                                std::size_t batch_size) {
  std::vector<int> out;
  out.reserve(rows.size());
  for (std::size_t start = 0; start < rows.size(); start += batch_size) {
    const auto chunk = rows.subspan(start, std::min(batch_size, rows.size() - start));
    const auto probs = predict(model, data.batch(chunk));
    const std::size_t classes = probs.dim(1);
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      const T* row = probs.data() + i * classes;
      out.push_back(static_cast<int>(std::max_element(row, row + classes) - row));
    }
  }
  return out;
}

template <typename T>
EvalReport evaluate(Model<T>& model, const WindowMatrix& data, std::span<const std::size_t> rows,
                    std::size_t batch_size) {
  const auto predicted = predict_labels(model, data, rows, batch_size);
  ConfusionMatrix m(data.class_names.size());
  for (std::size_t i = 0; i < rows.size(); ++i) m.add(data.labels[rows[i]], predicted[i]);
  return make_eval_report(std::move(m));
}

std::uint64_t split_seed(std::uint64_t seed, std::size_t window_size) { return derive_seed(seed, 1000 + window_size); }
std::uint64_t fold_seed(std::uint64_t seed, std::size_t window_size) { return derive_seed(seed, 2000 + window_size); }
std::uint64_t init_seed(std::uint64_t seed, std::size_t fold) { return derive_seed(seed, 3000 + fold); }
std::uint64_t shuffle_seed(std::uint64_t seed, std::size_t fold) { return derive_seed(seed, 4000 + fold); }

void finalize_means(ExperimentReport& report) {
  const double n = static_cast<double>(report.folds.size());
  report.mean_balanced_accuracy = report.mean_weighted_f1 = report.mean_epochs = report.mean_seconds = 0.0;
  if (report.folds.empty()) return;
  for (const auto& f : report.folds) {
    report.mean_balanced_accuracy += f.test.balanced_accuracy;
    report.mean_weighted_f1 += f.test.weighted_f1;
    report.mean_epochs += static_cast<double>(f.epochs);
    report.mean_seconds += f.seconds;
  }
  report.mean_balanced_accuracy /= n;
  report.mean_weighted_f1 /= n;
  report.mean_epochs /= n;
  report.mean_seconds /= n;
}

template <typename T>
std::vector<ExperimentReport> run_experiment(std::span<const TokenSequence> sequences,
                                             const std::vector<std::string>& class_names, std::size_t vocab_size,
                                             const ExperimentSpec& spec, const FoldCallback<T>& on_fold,
                                             const std::function<void(const std::string&)>& log) {
  spec.train.validate();
  if (spec.variants.empty() || spec.window_sizes.empty()) throw InvalidConfig("experiment needs models and window sizes");
  std::vector<ExperimentReport> reports;

  for (const std::size_t w : spec.window_sizes) {
    const auto windows = build_window_dataset(sequences, w, class_names);
    const auto data = WindowMatrix::from(windows);
    const auto split = stratified_split(data.labels, spec.train_fraction, split_seed(spec.train.seed, w));
    const auto train_labels = gather(data.labels, split.first);
    const std::vector<int> tl(train_labels.begin(), train_labels.end());
    const auto folds = stratified_kfold(tl, spec.folds, fold_seed(spec.train.seed, w));

    for (const auto& variant : spec.variants) {
      ExperimentReport report;
      report.variant = variant;
      report.window_size = w;
      report.class_names = class_names;
      report.train_windows = split.first.size();
      report.test_windows = split.second.size();
      const std::size_t fold_count =
          spec.fold_limit == 0 ? folds.size() : std::min(spec.fold_limit, folds.size());
      report.folds.resize(fold_count);

      ModelConfig config;
      config.classifier = variant.classifier;
      config.front_end = variant.front_end;
      config.embedding_dim = spec.embedding_dim;
      config.vocab_size = vocab_size;
      config.window_size = w;
      config.num_classes = class_names.size();

      auto run_fold = [&](std::size_t f) {
        const auto fit = gather(split.first, folds[f].first);
        const auto val = gather(split.first, folds[f].second);
        Model<T> model = build_model<T>(config, init_seed(spec.train.seed, f));
        TrainConfig tc = spec.train;
        tc.seed = shuffle_seed(spec.train.seed, f);
        nn::Adam<T> adam(tc.adam);
        auto trained = train_model(model, data, fit, val, tc, {}, &adam);
        FoldResult& out = report.folds[f];
        out.test = evaluate(model, data, split.second, spec.train.batch_size);
        out.epochs = trained.epochs;
        out.best_epoch = trained.best_epoch;
        out.seconds = trained.seconds;
        out.fit_windows = fit.size();
        out.validation_windows = val.size();
        out.history = std::move(trained.history);
        if (log) {
          log(variant_name(variant) + " W=" + std::to_string(w) + " fold " + std::to_string(f + 1) + ": epochs " +
              std::to_string(out.epochs) + ", balanced accuracy " + std::to_string(out.test.balanced_accuracy) +
              ", weighted F1 " + std::to_string(out.test.weighted_f1));
        }
        if (on_fold) on_fold(FoldContext{variant, w, f}, model, adam, out);
      };

      const std::size_t jobs = std::max<std::size_t>(1, spec.jobs);
      if (jobs == 1) {
        for (std::size_t f = 0; f < fold_count; ++f) run_fold(f);
      } else {
        std::vector<std::exception_ptr> errors(fold_count);
        for (std::size_t begin = 0; begin < fold_count; begin += jobs) {
          std::vector<std::thread> threads;
          for (std::size_t f = begin; f < std::min(fold_count, begin + jobs); ++f) {
            threads.emplace_back([&, f] {
              try {
                run_fold(f);
              } catch (...) {
                errors[f] = std::current_exception();
              }
            });
          }
          for (auto& t : threads) t.join();
        }
        for (auto& e : errors) {
          if (e) std::rethrow_exception(e);
        }
      }
      finalize_means(report);
      reports.push_back(std::move(report));
    }
  }
  return reports;
}

#define SEWHAR_INSTANTIATE(T)                                                                                        \
  template TrainResult train_model<T>(Model<T>&, const WindowMatrix&, std::span<const std::size_t>,                 \
                                      std::span<const std::size_t>, const TrainConfig&,                              \
                                      const std::function<void(const EpochRecord&)>&, nn::Adam<T>*);                               \
  template std::pair<double, double> validation_loss<T>(Model<T>&, const WindowMatrix&, std::span<const std::size_t>, \
                                                        std::size_t);                                                \
  template std::vector<int> predict_labels<T>(Model<T>&, const WindowMatrix&, std::span<const std::size_t>,         \
                                              std::size_t);                                                          \
  template EvalReport evaluate<T>(Model<T>&, const WindowMatrix&, std::span<const std::size_t>, std::size_t);       \
  template std::vector<ExperimentReport> run_experiment<T>(std::span<const TokenSequence>,                          \
                                                           const std::vector<std::string>&, std::size_t,            \
                                                           const ExperimentSpec&, const FoldCallback<T>&,           \
                                                           const std::function<void(const std::string&)>&);

SEWHAR_INSTANTIATE(float)
SEWHAR_INSTANTIATE(double)

#undef SEWHAR_INSTANTIATE

}  // namespace sewhar

#pragma once

#include "sewhar/metrics.hpp"
#include "sewhar/models.hpp"
#include "sewhar/windowing.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace sewhar {

struct TrainConfig {
  std::size_t batch_size = 1024;
  std::size_t patience = 20;
  std::size_t max_epochs = 500;
  std::uint64_t seed = 0;
  nn::AdamConfig adam;

  void validate() const;  // throws InvalidConfig
};

// Windows flattened for training: row i is tokens[i*window .. (i+1)*window).
struct WindowMatrix {
  std::size_t window = 0;
  std::vector<Token> tokens;
  std::vector<int> labels;
  std::vector<std::string> class_names;

  std::size_t size() const { return labels.size(); }
  static WindowMatrix from(const WindowDataset& ds);
  TokenBatch batch(std::span<const std::size_t> rows) const;
};

// Index partition of a labeled set.
struct Partition {
  std::vector<std::size_t> first;   // train / fit
  std::vector<std::size_t> second;  // test / validation
};

// Per class with n windows: round-half-up(fraction * n), clamped to
// [1, n-1], go to the first side. Throws ClassTooSmall when a class has
// fewer than 2 windows.
Partition stratified_split(std::span<const int> labels, double train_fraction, std::uint64_t seed);

// k (fit, validation) pairs. Each class is shuffled and cut into k
// contiguous folds whose sizes differ by at most one, larger folds first.
// Throws ClassTooSmall when a class has fewer than k windows.
std::vector<Partition> stratified_kfold(std::span<const int> labels, std::size_t k, std::uint64_t seed);

// Dataset-level wrappers; labels are compared by name.
std::pair<WindowDataset, WindowDataset> stratified_split(const WindowDataset& ds, double train_fraction,
                                                         std::uint64_t seed);
std::vector<std::pair<WindowDataset, WindowDataset>> stratified_kfold(const WindowDataset& ds, std::size_t k,
                                                                      std::uint64_t seed);

// Patience-based stopping on a strictly decreasing validation loss.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

  // Records one epoch; returns true when training should stop.
  bool update(double validation_loss);
  bool improved() const { return improved_; }  // last update set a new best
  std::size_t best_epoch() const { return best_epoch_; }  // 0-based
  double best_loss() const { return best_loss_; }
  std::size_t epochs() const { return epochs_; }

 private:
  std::size_t patience_;
  std::size_t epochs_ = 0;
  std::size_t best_epoch_ = 0;
  std::size_t since_best_ = 0;
  double best_loss_ = std::numeric_limits<double>::infinity();
  bool improved_ = false;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 0-based
  double train_loss = 0.0;
  double validation_loss = 0.0;
  double validation_accuracy = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  std::size_t epochs = 0;
  double seconds = 0.0;
};

// Mini-batch training with a reshuffle every epoch, validation in Infer mode
// after each epoch and early stopping. On return the model holds the
// parameters of the best validation epoch. When optimizer is given it is used
// (and left holding its final state). Throws NonFiniteLoss.
template <typename T>
TrainResult train_model(Model<T>& model, const WindowMatrix& data, std::span<const std::size_t> fit,
                        std::span<const std::size_t> validation, const TrainConfig& config,
                        const std::function<void(const EpochRecord&)>& on_epoch = {},
                        nn::Adam<T>* optimizer = nullptr);

// Mean cross-entropy and accuracy in Infer mode.
template <typename T>
std::pair<double, double> validation_loss(Model<T>& model, const WindowMatrix& data,
                                          std::span<const std::size_t> rows, std::size_t batch_size);

template <typename T>
std::vector<int> predict_labels(Model<T>& model, const WindowMatrix& data, std::span<const std::size_t> rows,
                                std::size_t batch_size = 1024);

template <typename T>
EvalReport evaluate(Model<T>& model, const WindowMatrix& data, std::span<const std::size_t> rows,
                    std::size_t batch_size = 1024);

// ---------------------------------------------------------------- experiments

struct FoldResult {
  EvalReport test;
  std::size_t epochs = 0;
  std::size_t best_epoch = 0;
  double seconds = 0.0;
  std::size_t fit_windows = 0;
  std::size_t validation_windows = 0;
  std::vector<EpochRecord> history;
};

struct ExperimentReport {
  ModelVariant variant;
  std::size_t window_size = 0;
  std::vector<std::string> class_names;
  std::size_t train_windows = 0;
  std::size_t test_windows = 0;
  std::vector<FoldResult> folds;
  double mean_balanced_accuracy = 0.0;
  double mean_weighted_f1 = 0.0;
  double mean_epochs = 0.0;
  double mean_seconds = 0.0;
};

struct ExperimentSpec {
  std::vector<ModelVariant> variants;
  std::vector<std::size_t> window_sizes = {100, 75, 50, 25};
  std::size_t folds = 3;
  std::size_t fold_limit = 0;  // train only the first n folds; 0 trains all
  double train_fraction = 0.7;
  std::size_t embedding_dim = 64;
  TrainConfig train;
  std::size_t jobs = 1;  // folds trained concurrently
};

struct FoldContext {
  ModelVariant variant;
  std::size_t window_size = 0;
  std::size_t fold = 0;
};

template <typename T>
using FoldCallback = std::function<void(const FoldContext&, Model<T>&, const nn::Adam<T>&, const FoldResult&)>;

// Seeds of the experiment's random streams; evaluate() uses split_seed to
// rebuild the held-out test side of a trained model.
std::uint64_t split_seed(std::uint64_t seed, std::size_t window_size);
std::uint64_t fold_seed(std::uint64_t seed, std::size_t window_size);
std::uint64_t init_seed(std::uint64_t seed, std::size_t fold);
std::uint64_t shuffle_seed(std::uint64_t seed, std::size_t fold);

// For every window size and variant: windows, 70/30 stratified split,
// stratified k-fold on the train side, one model per fold trained with early
// stopping and evaluated on the held-out test side. Splits depend only on
// (seed, window size), so every variant sees the same partitions.
template <typename T>
std::vector<ExperimentReport> run_experiment(std::span<const TokenSequence> sequences,
                                             const std::vector<std::string>& class_names, std::size_t vocab_size,
                                             const ExperimentSpec& spec, const FoldCallback<T>& on_fold = {},
                                             const std::function<void(const std::string&)>& log = {});

void finalize_means(ExperimentReport& report);

}  // namespace sewhar

#include <doctest.h>

#include "sewhar/error.hpp"
#include "sewhar/train_eval.hpp"

#include <algorithm>
#include <numeric>
#include <set>

using namespace sewhar;

namespace {

std::vector<int> labels_of(std::initializer_list<std::pair<int, std::size_t>> sizes) {
  std::vector<int> out;
  for (auto [label, n] : sizes) out.insert(out.end(), n, label);
  return out;
}

std::size_t count_label(const std::vector<int>& labels, const std::vector<std::size_t>& rows, int label) {
  return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [&](auto i) { return labels[i] == label; }));
}

}  // namespace

TEST_CASE("stratified split sizes") {
  const auto labels = labels_of({{0, 100}, {1, 3}, {2, 2}});
  const auto p = stratified_split(labels, 0.7, 1);
  CHECK(count_label(labels, p.first, 0) == 70);
  CHECK(count_label(labels, p.second, 0) == 30);
  CHECK(count_label(labels, p.first, 1) == 2);
  CHECK(count_label(labels, p.second, 1) == 1);
  CHECK(count_label(labels, p.first, 2) == 1);
  CHECK(count_label(labels, p.second, 2) == 1);

  const auto again = stratified_split(labels, 0.7, 1);
  CHECK(again.first == p.first);
  CHECK(again.second == p.second);
  const auto other = stratified_split(labels, 0.7, 2);
  CHECK(other.first != p.first);

  CHECK_THROWS_AS(stratified_split(labels_of({{0, 5}, {1, 1}}), 0.7, 1), ClassTooSmall);
}

TEST_CASE("stratified k-fold sizes") {
  const auto labels = labels_of({{0, 9}, {1, 10}});
  const auto folds = stratified_kfold(labels, 3, 4);
  REQUIRE(folds.size() == 3);
  CHECK(count_label(labels, folds[0].second, 0) == 3);
  CHECK(count_label(labels, folds[1].second, 0) == 3);
  CHECK(count_label(labels, folds[2].second, 0) == 3);
  CHECK(count_label(labels, folds[0].second, 1) == 4);
  CHECK(count_label(labels, folds[1].second, 1) == 3);
  CHECK(count_label(labels, folds[2].second, 1) == 3);

  std::multiset<std::size_t> validation;
  for (const auto& f : folds) {
    validation.insert(f.second.begin(), f.second.end());
    CHECK(f.first.size() + f.second.size() == labels.size());
  }
  CHECK(validation.size() == labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) CHECK(validation.count(i) == 1);

  CHECK_THROWS_AS(stratified_kfold(labels_of({{0, 2}}), 3, 4), ClassTooSmall);
}

TEST_CASE("early stopping") {
  EarlyStopping worse(3);
  std::size_t epochs = 0;
  for (double loss = 1.0;; loss += 1.0) {
    ++epochs;
    if (worse.update(loss)) break;
  }
  CHECK(epochs == 4);
  CHECK(worse.best_epoch() == 0);

  EarlyStopping better(3);
  for (int i = 0; i < 50; ++i) {
    CHECK_FALSE(better.update(10.0 - i * 0.1));
    CHECK(better.improved());
  }
  CHECK(better.best_epoch() == 49);

  // equal is not an improvement
  EarlyStopping flat(1);
  CHECK_FALSE(flat.update(1.0));
  CHECK(flat.update(1.0));
}

TEST_CASE("training stops early and restores the best epoch") {
  // labels are noise, so validation loss soon rises
  WindowMatrix data;
  data.window = 4;
  data.class_names = {"a", "b"};
  Rng rng(3);
  for (int i = 0; i < 80; ++i) {
    for (int t = 0; t < 4; ++t) data.tokens.push_back(static_cast<Token>(rng.below(6)));
    data.labels.push_back(static_cast<int>(rng.below(2)));
  }
  std::vector<std::size_t> fit, val;
  for (std::size_t i = 0; i < 80; ++i) (i < 60 ? fit : val).push_back(i);

  ModelConfig c;
  c.classifier = Classifier::LSTM;
  c.vocab_size = 5;
  c.window_size = 4;
  c.num_classes = 2;
  c.embedding_dim = 8;
  c.lstm_units = 8;
  auto model = build_model<double>(c, 1);
  TrainConfig tc;
  tc.batch_size = 16;
  tc.patience = 5;
  tc.max_epochs = 300;
  tc.adam.learning_rate = 0.05;
  const auto r = train_model(model, data, fit, val, tc);
  CHECK(r.epochs < 300);
  CHECK(r.epochs == r.best_epoch + 1 + tc.patience);
  CHECK(r.history.size() == r.epochs);
  const auto [loss, acc] = validation_loss(model, data, val, 16);
  CHECK(loss == doctest::Approx(r.history[r.best_epoch].validation_loss).epsilon(1e-12));
  (void)acc;
}

TEST_CASE("separable toy data is learned perfectly") {
  // class 0 uses tokens 1-3, class 1 tokens 4-6
  WindowMatrix data;
  data.window = 5;
  data.class_names = {"a", "b"};
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const int label = i % 2;
    for (int t = 0; t < 5; ++t) data.tokens.push_back(static_cast<Token>(1 + 3 * label + rng.below(3)));
    data.labels.push_back(label);
  }
  const auto split = stratified_split(data.labels, 0.7, 1);
  std::vector<int> train_labels;
  for (auto i : split.first) train_labels.push_back(data.labels[i]);
  const auto folds = stratified_kfold(train_labels, 3, 2);
  std::vector<std::size_t> fit, val;
  for (auto i : folds[0].first) fit.push_back(split.first[i]);
  for (auto i : folds[0].second) val.push_back(split.first[i]);

  for (auto classifier : {Classifier::FCN, Classifier::LSTM}) {
    ModelConfig c;
    c.classifier = classifier;
    c.vocab_size = 6;
    c.window_size = 5;
    c.num_classes = 2;
    c.embedding_dim = 8;
    c.conv_blocks = {{16, 3}, {16, 3}, {16, 3}};
    c.lstm_units = 8;
    auto model = build_model<float>(c, 3);
    TrainConfig tc;
    tc.batch_size = 32;
    tc.patience = 5;
    tc.max_epochs = 60;
    tc.adam.learning_rate = 0.01;
    const auto r = train_model(model, data, fit, val, tc);
    CHECK(r.history[r.best_epoch].validation_accuracy == 1.0);
    const auto report = evaluate(model, data, split.second);
    CHECK(report.balanced_accuracy == 1.0);
    CHECK(report.weighted_f1 == 1.0);
  }
}

TEST_CASE("training is reproducible") {
  WindowMatrix data;
  data.window = 3;
  data.class_names = {"a", "b", "c"};
  Rng rng(8);
  for (int i = 0; i < 90; ++i) {
    for (int t = 0; t < 3; ++t) data.tokens.push_back(static_cast<Token>(rng.below(10)));
    data.labels.push_back(i % 3);
  }
  std::vector<std::size_t> fit(60), val(30);
  std::iota(fit.begin(), fit.end(), 0);
  std::iota(val.begin(), val.end(), 60);
  ModelConfig c;
  c.vocab_size = 9;
  c.window_size = 3;
  c.num_classes = 3;
  c.embedding_dim = 4;
  c.conv_blocks = {{8, 3}, {8, 3}, {8, 3}};
  TrainConfig tc;
  tc.batch_size = 16;
  tc.max_epochs = 4;
  tc.seed = 12;
  auto a = build_model<float>(c, 1);
  auto b = build_model<float>(c, 1);
  const auto ra = train_model(a, data, fit, val, tc);
  const auto rb = train_model(b, data, fit, val, tc);
  CHECK(a.state() == b.state());
  CHECK(ra.history.back().train_loss == rb.history.back().train_loss);
}

TEST_CASE("config validation") {
  TrainConfig tc;
  tc.batch_size = 0;
  CHECK_THROWS_AS(tc.validate(), InvalidConfig);
  tc = {};
  tc.max_epochs = 0;
  CHECK_THROWS_AS(tc.validate(), InvalidConfig);
}

TEST_CASE("seed streams are distinct") {
  std::set<std::uint64_t> seeds = {split_seed(1, 25), split_seed(1, 50), fold_seed(1, 25), init_seed(1, 0),
                                   init_seed(1, 1), shuffle_seed(1, 0)};
  CHECK(seeds.size() == 6);
}

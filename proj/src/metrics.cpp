#include "sewhar/metrics.hpp"

#include "sewhar/error.hpp"

#include <cmath>
#include <numeric>
#include <string>

namespace sewhar {

ConfusionMatrix ConfusionMatrix::from_counts(std::span<const std::uint64_t> counts) {
  const auto n = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(counts.size()))));
  if (n * n != counts.size()) throw ShapeMismatch("confusion counts are not square: " + std::to_string(counts.size()));
  ConfusionMatrix m(n);
  m.counts_.assign(counts.begin(), counts.end());
  return m;
}

ConfusionMatrix ConfusionMatrix::from_pairs(std::size_t classes, std::span<const int> truth,
                                            std::span<const int> predicted) {
  if (truth.size() != predicted.size()) throw ShapeMismatch("confusion: truth and prediction lengths differ");
  ConfusionMatrix m(classes);
  for (std::size_t i = 0; i < truth.size(); ++i) m.add(truth[i], predicted[i]);
  return m;
}

void ConfusionMatrix::add(int truth, int predicted, std::uint64_t n) {
  if (truth < 0 || predicted < 0 || static_cast<std::size_t>(truth) >= classes_ ||
      static_cast<std::size_t>(predicted) >= classes_) {
    throw TargetOutOfRange("confusion: class pair (" + std::to_string(truth) + ", " + std::to_string(predicted) +
                           ") outside " + std::to_string(classes_) + " classes");
  }
  counts_[static_cast<std::size_t>(truth) * classes_ + static_cast<std::size_t>(predicted)] += n;
}

std::uint64_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

std::uint64_t ConfusionMatrix::support(std::size_t c) const {
  std::uint64_t s = 0;
  for (std::size_t p = 0; p < classes_; ++p) s += at(c, p);
  return s;
}

std::uint64_t ConfusionMatrix::predicted(std::size_t c) const {
  std::uint64_t s = 0;
  for (std::size_t t = 0; t < classes_; ++t) s += at(t, c);
  return s;
}

std::vector<ClassScores> per_class_scores(const ConfusionMatrix& m) {
  std::vector<ClassScores> out(m.classes());
  for (std::size_t c = 0; c < m.classes(); ++c) {
    const auto tp = static_cast<double>(m.at(c, c));
    const auto support = m.support(c);
    const auto predicted = m.predicted(c);
    ClassScores& s = out[c];
    s.support = support;
    s.precision = predicted == 0 ? 0.0 : tp / static_cast<double>(predicted);
    s.recall = support == 0 ? 0.0 : tp / static_cast<double>(support);
    s.f1 = s.precision + s.recall == 0.0 ? 0.0 : 2.0 * s.precision * s.recall / (s.precision + s.recall);
  }
  return out;
}

double balanced_accuracy(const ConfusionMatrix& m) {
  if (m.total() == 0) throw EmptyMatrix("balanced accuracy of an empty confusion matrix");
  double sum = 0.0;
  std::size_t present = 0;
  for (const auto& s : per_class_scores(m)) {
    if (s.support == 0) continue;
    sum += s.recall;
    ++present;
  }
  return sum / static_cast<double>(present);
}

double weighted_f1(const ConfusionMatrix& m) {
  const auto total = m.total();
  if (total == 0) throw EmptyMatrix("weighted F1 of an empty confusion matrix");
  double sum = 0.0;
  for (const auto& s : per_class_scores(m)) sum += static_cast<double>(s.support) / static_cast<double>(total) * s.f1;
  return sum;
}

EvalReport make_eval_report(ConfusionMatrix m) {
  EvalReport r;
  r.balanced_accuracy = balanced_accuracy(m);
  r.weighted_f1 = weighted_f1(m);
  r.per_class = per_class_scores(m);
  r.confusion = std::move(m);
  return r;
}

}  // namespace sewhar

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace sewhar {

// Rows are true classes, columns predicted classes.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::size_t classes) : classes_(classes), counts_(classes * classes, 0) {}
  // counts given row-major; size must be a perfect square.
  static ConfusionMatrix from_counts(std::span<const std::uint64_t> counts);
  static ConfusionMatrix from_pairs(std::size_t classes, std::span<const int> truth, std::span<const int> predicted);

  void add(int truth, int predicted, std::uint64_t n = 1);

  std::size_t classes() const { return classes_; }
  std::uint64_t at(std::size_t truth, std::size_t predicted) const { return counts_[truth * classes_ + predicted]; }
  std::uint64_t total() const;
  std::uint64_t support(std::size_t c) const;     // row sum
  std::uint64_t predicted(std::size_t c) const;   // column sum
  const std::vector<std::uint64_t>& counts() const { return counts_; }

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::size_t classes_ = 0;
  std::vector<std::uint64_t> counts_;
};

// Mean recall over classes with non-zero support. Throws EmptyMatrix.
double balanced_accuracy(const ConfusionMatrix& m);

// Support-weighted mean of per-class F1. A class with no predictions has
// precision 0; F1 is 0 when precision + recall is 0. Throws EmptyMatrix.
double weighted_f1(const ConfusionMatrix& m);

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::uint64_t support = 0;
};

std::vector<ClassScores> per_class_scores(const ConfusionMatrix& m);

struct EvalReport {
  ConfusionMatrix confusion;
  double balanced_accuracy = 0.0;
  double weighted_f1 = 0.0;
  std::vector<ClassScores> per_class;
};

EvalReport make_eval_report(ConfusionMatrix m);

}  // namespace sewhar

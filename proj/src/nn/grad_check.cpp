#include "sewhar/nn/grad_check.hpp"

#include "sewhar/nn/loss.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace sewhar::nn {

Objective cross_entropy_objective(std::vector<int> targets) {
  return [targets = std::move(targets)](const Tensor<double>& logits) {
    auto ce = softmax_cross_entropy(logits, targets);
    return std::pair{ce.loss, std::move(ce.grad_logits)};
  };
}

Objective projection_objective(std::uint64_t seed) {
  return [seed](const Tensor<double>& out) {
    Rng rng(seed);
    Tensor<double> r(out.shape());
    double loss = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
      r[i] = rng.uniform(-1.0, 1.0);
      loss += out[i] * r[i];
    }
    return std::pair{loss, std::move(r)};
  };
}

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / denom;
}

namespace {

std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (n <= k) return idx;
  rng.shuffle(std::span(idx));
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

double checked_loss(Sequential<double>& net, const Tensor<double>& input, const Objective& objective) {
  const double loss = objective(net.forward(input, Mode::TrainFrozen)).first;
  if (!std::isfinite(loss)) throw NonFiniteValue("gradient check: non-finite loss");
  return loss;
}

// Central difference of the loss with respect to *slot.
double numeric_derivative(double* slot, double step, Sequential<double>& net, const Tensor<double>& input,
                          const Objective& objective) {
  const double saved = *slot;
  *slot = saved + step;
  const double plus = checked_loss(net, input, objective);
  *slot = saved - step;
  const double minus = checked_loss(net, input, objective);
  *slot = saved;
  return (plus - minus) / (2.0 * step);
}

}  // namespace

GradCheckReport grad_check(Sequential<double>& net, const Tensor<double>& input, const Objective& objective,
                           const GradCheckOptions& options) {
  Rng rng(options.seed);
  net.zero_grad();
  const Tensor<double> output = net.forward(input, Mode::TrainFrozen);
  auto [loss, grad_out] = objective(output);
  if (!std::isfinite(loss)) throw NonFiniteValue("gradient check: non-finite loss");
  const Tensor<double> input_grad = net.backward(grad_out);

  GradCheckReport report;
  auto record = [&](GradCheckEntry entry) {
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.entries.push_back(std::move(entry));
  };

  for (std::size_t li = 0; li < net.size(); ++li) {
    for (auto* p : net.layer(li).params()) {
      GradCheckEntry entry{std::to_string(li) + "." + std::string(to_string(net.layer(li).kind())) + "." + p->name};
      const Tensor<double>& analytic = p->grad;
      for (std::size_t i : sample_indices(p->value.size(), options.samples_per_tensor, rng)) {
        const double numeric = numeric_derivative(p->value.data() + i, options.step, net, input, objective);
        if (!std::isfinite(analytic[i])) throw NonFiniteValue("gradient check: non-finite gradient in " + entry.name);
        entry.max_rel_error = std::max(entry.max_rel_error, relative_error(analytic[i], numeric));
        ++entry.checked;
      }
      record(std::move(entry));
    }
  }

  if (options.check_input && !input_grad.empty()) {
    GradCheckEntry entry{"input"};
    Tensor<double> perturbed = input;
    for (std::size_t i : sample_indices(input.size(), options.samples_per_tensor, rng)) {
      const double numeric = numeric_derivative(perturbed.data() + i, options.step, net, perturbed, objective);
      entry.max_rel_error = std::max(entry.max_rel_error, relative_error(input_grad[i], numeric));
      ++entry.checked;
    }
    record(std::move(entry));
  }
  return report;
}

}  // namespace sewhar::nn

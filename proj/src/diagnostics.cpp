#include "sewhar/diagnostics.hpp"

#include "sewhar/models.hpp"
#include "sewhar/nn/grad_check.hpp"
#include "sewhar/rng.hpp"

#include <cmath>
#include <functional>

namespace sewhar {

namespace {

using nn::Sequential;
using nn::Tensor;

constexpr std::size_t kBatch = 2, kWindow = 25, kVocab = 20, kClasses = 4, kChannels = 6;

Tensor<double> random_tensor(nn::Shape shape, Rng& rng, double min_magnitude = 0.0) {
  Tensor<double> t(std::move(shape));
  for (auto& v : t.values()) {
    // keep ReLU inputs away from the kink
    const double m = rng.uniform(min_magnitude, 1.0);
    v = rng.bernoulli(0.5) ? m : -m;
  }
  return t;
}

Tensor<double> random_tokens(Rng& rng) {
  Tensor<double> t({kBatch, kWindow});
  for (auto& v : t.values()) v = static_cast<double>(rng.below(kVocab + 1));
  return t;
}

std::vector<int> random_targets(Rng& rng, std::size_t classes) {
  std::vector<int> out(kBatch);
  for (auto& v : out) v = static_cast<int>(rng.below(classes));
  return out;
}

void inject(Sequential<double>& net, const GradientSuiteOptions& options) {
  if (!options.fault) return;
  for (std::size_t i = 0; i < net.size(); ++i) {
    if (nn::to_string(net.layer(i).kind()) == *options.fault) {
      net.replace(i, std::make_unique<nn::CorruptedBackward<double>>(net.layer(i).clone(), options.fault_factor));
      return;
    }
  }
}

}  // namespace

std::vector<GradientCase> run_gradient_suite(const GradientSuiteOptions& options) {
  nn::GradCheckOptions gc;
  gc.samples_per_tensor = options.samples_per_tensor;
  gc.seed = options.seed;
  gc.step = options.step;

  std::vector<GradientCase> out;
  auto check = [&](const std::string& name, Sequential<double> net, const Tensor<double>& input,
                   const nn::Objective& objective) {
    inject(net, options);
    const auto report = nn::grad_check(net, input, objective, gc);
    GradientCase c;
    c.name = name;
    c.max_rel_error = report.max_rel_error;
    for (const auto& e : report.entries) {
      c.checked += e.checked;
      if (c.worst.empty() || e.max_rel_error >= report.max_rel_error) c.worst = e.name;
    }
    c.passed = c.max_rel_error < options.tolerance;
    out.push_back(std::move(c));
  };

  Rng rng(derive_seed(options.seed, 1));
  auto single = [&](std::unique_ptr<nn::Layer<double>> layer) {
    Sequential<double> net;
    net.add(std::move(layer));
    net.initialize(rng);
    return net;
  };

  check("embedding", single(std::make_unique<nn::Embedding<double>>(kVocab, 8)), random_tokens(rng),
        nn::projection_objective(rng.next()));
  check("conv1d k=8", single(std::make_unique<nn::Conv1D<double>>(kChannels, 5, 8)),
        random_tensor({kBatch, kWindow, kChannels}, rng), nn::projection_objective(rng.next()));
  check("conv1d k=3", single(std::make_unique<nn::Conv1D<double>>(kChannels, 5, 3)),
        random_tensor({kBatch, kWindow, kChannels}, rng), nn::projection_objective(rng.next()));
  {
    // random affine parameters so the check does not rely on gamma=1, beta=0
    auto net = single(std::make_unique<nn::BatchNorm<double>>(kChannels));
    for (auto* p : net.params()) {
      for (auto& v : p->value.values()) v = rng.uniform(0.5, 1.5);
    }
    check("batchnorm", std::move(net), random_tensor({kBatch, kWindow, kChannels}, rng),
          nn::projection_objective(rng.next()));
  }
  check("relu", single(std::make_unique<nn::ReLU<double>>()), random_tensor({kBatch, kWindow, kChannels}, rng, 0.05),
        nn::projection_objective(rng.next()));
  check("gap", single(std::make_unique<nn::GlobalAvgPool<double>>()), random_tensor({kBatch, kWindow, kChannels}, rng),
        nn::projection_objective(rng.next()));
  check("dense+softmax+ce", single(std::make_unique<nn::Dense<double>>(kChannels, kClasses)),
        random_tensor({kBatch, kChannels}, rng), nn::cross_entropy_objective(random_targets(rng, kClasses)));
  check("token_conv1d emb", single(std::make_unique<nn::TokenConv1D<double>>(kVocab, 8, 5, 8)), random_tokens(rng),
        nn::projection_objective(rng.next()));
  check("token_conv1d onehot", single(std::make_unique<nn::TokenConv1D<double>>(kVocab, 0, 5, 3)),
        random_tokens(rng), nn::projection_objective(rng.next()));
  check("lstm", single(std::make_unique<nn::LSTM<double>>(kChannels, 5)),
        random_tensor({kBatch, kWindow, kChannels}, rng), nn::projection_objective(rng.next()));

  for (const auto* name : {"fcn-emb", "fcn-onehot", "fcn-index", "lstm-emb", "lstm-onehot", "lstm-index"}) {
    const auto variant = parse_variant(name);
    ModelConfig config;
    config.classifier = variant.classifier;
    config.front_end = variant.front_end;
    config.vocab_size = kVocab;
    config.window_size = kWindow;
    config.num_classes = kClasses;
    auto model = build_model<double>(config, rng.next());
    // the embedding init is deliberately small (+-0.05); checking at it would
    // compare downstream gradients that are mostly rounding noise
    for (auto* p : model.params()) {
      if (p->name != "table") continue;
      for (auto& v : p->value.values()) v = rng.uniform(-1.0, 1.0);
    }
    check(std::string("model ") + name, model.net(), random_tokens(rng),
          nn::cross_entropy_objective(random_targets(rng, kClasses)));
  }
  return out;
}

}  // namespace sewhar

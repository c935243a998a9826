#pragma once

#include "sewhar/encoding.hpp"
#include "sewhar/nn/adam.hpp"
#include "sewhar/nn/sequential.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sewhar {

enum class Classifier { FCN, LSTM };

// How window tokens are presented to the classifier.
enum class FrontEnd {
  Embedding,  // trainable lookup table
  OneHot,     // indicator vector of width vocab+1
  Index,      // the frequency index as a single scalar channel
};

struct ConvBlockSpec {
  std::size_t filters = 0;
  std::size_t kernel = 0;

  bool operator==(const ConvBlockSpec&) const = default;
};

struct ModelConfig {
  Classifier classifier = Classifier::FCN;
  FrontEnd front_end = FrontEnd::Embedding;
  std::size_t embedding_dim = 64;
  std::size_t vocab_size = 0;   // largest token id; the model accepts ids in [0, vocab_size]
  std::size_t window_size = 0;
  std::size_t num_classes = 0;
  std::vector<ConvBlockSpec> conv_blocks = {{128, 8}, {256, 5}, {128, 3}};
  std::size_t lstm_units = 64;

  bool operator==(const ModelConfig&) const = default;

  // Throws InvalidConfig.
  void validate() const;
};

// Architecture descriptor, e.g.
//   fcn(emb=64,conv=128x8,256x5,128x3,classes=12,window=25,vocab=309)
//   lstm(onehot,units=64,classes=16,window=25,vocab=140)
std::string describe(const ModelConfig& config);
ModelConfig parse_descriptor(std::string_view descriptor);  // throws InvalidConfig

// Short variant names: fcn-emb, fcn-onehot, fcn-index, lstm-emb, lstm-onehot, lstm-index.
struct ModelVariant {
  Classifier classifier = Classifier::FCN;
  FrontEnd front_end = FrontEnd::Embedding;

  bool operator==(const ModelVariant&) const = default;
};
std::string variant_name(ModelVariant v);
std::string variant_title(ModelVariant v);  // "FCN + Embedding", "LSTM (one-hot)", ...
ModelVariant parse_variant(std::string_view name);  // throws InvalidConfig

// Row-major [batch, length] token ids.
struct TokenBatch {
  std::size_t batch = 0;
  std::size_t length = 0;
  std::vector<Token> tokens;
};

template <typename T>
class Model {
 public:
  Model(ModelConfig config, nn::Sequential<T> net) : config_(std::move(config)), net_(std::move(net)) {}

  const ModelConfig& config() const { return config_; }
  nn::Sequential<T>& net() { return net_; }
  const nn::Sequential<T>& net() const { return net_; }

  // Returns logits [B, C]. Throws TokenOutOfRange / ShapeMismatch.
  nn::Tensor<T> forward(const TokenBatch& batch, nn::Mode mode);
  void backward(const nn::Tensor<T>& grad_logits) { net_.backward(grad_logits); }

  std::vector<nn::Param<T>*> params() { return net_.params(); }
  void zero_grad() { net_.zero_grad(); }
  std::size_t parameter_count() { return net_.parameter_count(); }

  // Parameters followed by buffers, in a fixed order; used for best-epoch
  // snapshots and checkpoints.
  std::vector<nn::Tensor<T>> state();
  void load_state(const std::vector<nn::Tensor<T>>& state);
  std::vector<std::string> state_names();

 private:
  ModelConfig config_;
  nn::Sequential<T> net_;
};

// front end -> 3 x (Conv1D -> BatchNorm -> ReLU) -> GAP -> Dense(C); logits out.
template <typename T>
Model<T> build_fcn(const ModelConfig& config, std::uint64_t seed = 0);

// front end -> LSTM(units, many-to-one) -> Dense(C); logits out.
template <typename T>
Model<T> build_lstm(const ModelConfig& config, std::uint64_t seed = 0);

template <typename T>
Model<T> build_model(const ModelConfig& config, std::uint64_t seed = 0);

// Softmax probabilities [B, C] in Infer mode.
template <typename T>
nn::Tensor<T> predict(Model<T>& model, const TokenBatch& batch);

// ---------------------------------------------------------------- checkpoints

struct CheckpointMeta {
  std::vector<std::string> class_names;
  std::map<std::string, std::string> extra;

  bool operator==(const CheckpointMeta&) const = default;
};

template <typename T>
struct Checkpoint {
  Model<T> model;
  CheckpointMeta meta;
  std::optional<nn::Adam<T>> optimizer;
};

// Binary container: magic, version, scalar width, descriptor, metadata, every
// parameter and buffer tensor with its shape, then the optimizer state.
template <typename T>
void save_checkpoint(const std::string& path, Model<T>& model, const CheckpointMeta& meta,
                     const nn::Adam<T>* optimizer = nullptr);

// Values stored at another precision are converted. Throws CheckpointError.
template <typename T>
Checkpoint<T> load_checkpoint(const std::string& path);

}  // namespace sewhar

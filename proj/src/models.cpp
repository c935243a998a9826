#include "sewhar/models.hpp"

#include "sewhar/nn/loss.hpp"

#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

namespace sewhar {

using nn::Mode;
using nn::Tensor;

void ModelConfig::validate() const {
  if (vocab_size < 1 || window_size < 1 || num_classes < 1) {
    throw InvalidConfig("model config: vocab_size, window_size and num_classes must be at least 1");
  }
  if (front_end == FrontEnd::Embedding && embedding_dim < 1) throw InvalidConfig("model config: embedding_dim must be >= 1");
  if (classifier == Classifier::FCN) {
    if (conv_blocks.empty()) throw InvalidConfig("model config: FCN needs at least one conv block");
    for (const auto& b : conv_blocks) {
      if (b.filters < 1 || b.kernel < 1) throw InvalidConfig("model config: conv filters and kernel must be >= 1");
    }
  }
  if (classifier == Classifier::LSTM && lstm_units < 1) throw InvalidConfig("model config: lstm_units must be >= 1");
}

std::string describe(const ModelConfig& c) {
  std::ostringstream os;
  os << (c.classifier == Classifier::FCN ? "fcn(" : "lstm(");
  switch (c.front_end) {
    case FrontEnd::Embedding: os << "emb=" << c.embedding_dim; break;
    case FrontEnd::OneHot: os << "onehot"; break;
    case FrontEnd::Index: os << "index"; break;
  }
  if (c.classifier == Classifier::FCN) {
    os << ",conv=";
    for (std::size_t i = 0; i < c.conv_blocks.size(); ++i) {
      os << (i ? "," : "") << c.conv_blocks[i].filters << 'x' << c.conv_blocks[i].kernel;
    }
  } else {
    os << ",units=" << c.lstm_units;
  }
  os << ",classes=" << c.num_classes << ",window=" << c.window_size << ",vocab=" << c.vocab_size << ')';
  return os.str();
}

namespace {

std::size_t parse_size(std::string_view s, std::string_view what) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw InvalidConfig("model descriptor: bad " + std::string(what) + " '" + std::string(s) + "'");
  }
  return v;
}

ConvBlockSpec parse_block(std::string_view s) {
  const auto x = s.find('x');
  if (x == std::string_view::npos) throw InvalidConfig("model descriptor: bad conv block '" + std::string(s) + "'");
  return {parse_size(s.substr(0, x), "filters"), parse_size(s.substr(x + 1), "kernel")};
}

}  // namespace

ModelConfig parse_descriptor(std::string_view d) {
  ModelConfig c;
  const auto open = d.find('(');
  if (open == std::string_view::npos || d.empty() || d.back() != ')') {
    throw InvalidConfig("model descriptor: expected name(...), got '" + std::string(d) + "'");
  }
  const auto name = d.substr(0, open);
  if (name == "fcn") {
    c.classifier = Classifier::FCN;
  } else if (name == "lstm") {
    c.classifier = Classifier::LSTM;
  } else {
    throw InvalidConfig("model descriptor: unknown classifier '" + std::string(name) + "'");
  }
  c.conv_blocks.clear();

  std::string_view body = d.substr(open + 1, d.size() - open - 2);
  bool in_conv = false;
  bool saw_front = false;
  while (!body.empty()) {
    const auto comma = body.find(',');
    const auto item = body.substr(0, comma);
    body = comma == std::string_view::npos ? std::string_view{} : body.substr(comma + 1);
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) {
      if (item == "onehot" || item == "index") {
        c.front_end = item == "onehot" ? FrontEnd::OneHot : FrontEnd::Index;
        saw_front = true;
        in_conv = false;
      } else if (in_conv) {
        c.conv_blocks.push_back(parse_block(item));
      } else {
        throw InvalidConfig("model descriptor: unexpected item '" + std::string(item) + "'");
      }
      continue;
    }
    const auto key = item.substr(0, eq);
    const auto value = item.substr(eq + 1);
    in_conv = false;
    if (key == "emb") {
      c.front_end = FrontEnd::Embedding;
      c.embedding_dim = parse_size(value, "embedding size");
      saw_front = true;
    } else if (key == "conv") {
      c.conv_blocks.push_back(parse_block(value));
      in_conv = true;
    } else if (key == "units") {
      c.lstm_units = parse_size(value, "units");
    } else if (key == "classes") {
      c.num_classes = parse_size(value, "classes");
    } else if (key == "window") {
      c.window_size = parse_size(value, "window");
    } else if (key == "vocab") {
      c.vocab_size = parse_size(value, "vocab");
    } else {
      throw InvalidConfig("model descriptor: unknown key '" + std::string(key) + "'");
    }
  }
  if (!saw_front) throw InvalidConfig("model descriptor: missing front end");
  if (c.classifier == Classifier::LSTM) c.conv_blocks = ModelConfig{}.conv_blocks;
  c.validate();
  return c;
}

std::string variant_name(ModelVariant v) {
  std::string s = v.classifier == Classifier::FCN ? "fcn-" : "lstm-";
  switch (v.front_end) {
    case FrontEnd::Embedding: return s + "emb";
    case FrontEnd::OneHot: return s + "onehot";
    case FrontEnd::Index: return s + "index";
  }
  return s;
}

std::string variant_title(ModelVariant v) {
  std::string s = v.classifier == Classifier::FCN ? "FCN" : "LSTM";
  switch (v.front_end) {
    case FrontEnd::Embedding: return s + " + Embedding";
    case FrontEnd::OneHot: return s + " (one-hot)";
    case FrontEnd::Index: return s + " (index)";
  }
  return s;
}

ModelVariant parse_variant(std::string_view name) {
  for (auto cls : {Classifier::FCN, Classifier::LSTM}) {
    for (auto fe : {FrontEnd::Embedding, FrontEnd::OneHot, FrontEnd::Index}) {
      if (variant_name({cls, fe}) == name) return {cls, fe};
    }
  }
  throw InvalidConfig("unknown model '" + std::string(name) +
                      "' (expected fcn-emb, fcn-onehot, fcn-index, lstm-emb, lstm-onehot or lstm-index)");
}

// ---------------------------------------------------------------- Model

template <typename T>
Tensor<T> Model<T>::forward(const TokenBatch& batch, Mode mode) {
  if (batch.batch == 0 || batch.length == 0 || batch.tokens.size() != batch.batch * batch.length) {
    throw ShapeMismatch("token batch holds " + std::to_string(batch.tokens.size()) + " tokens for shape [" +
                        std::to_string(batch.batch) + "," + std::to_string(batch.length) + "]");
  }
  Tensor<T> input({batch.batch, batch.length});
  for (std::size_t i = 0; i < batch.tokens.size(); ++i) input[i] = static_cast<T>(batch.tokens[i]);
  return net_.forward(input, mode);
}

template <typename T>
std::vector<Tensor<T>> Model<T>::state() {
  std::vector<Tensor<T>> out;
  for (auto* p : net_.params()) out.push_back(p->value);
  for (auto& [name, t] : net_.buffers()) out.push_back(*t);
  return out;
}

template <typename T>
std::vector<std::string> Model<T>::state_names() {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < net_.size(); ++i) {
    const std::string prefix = std::to_string(i) + "." + std::string(nn::to_string(net_.layer(i).kind())) + ".";
    for (auto* p : net_.layer(i).params()) out.push_back(prefix + p->name);
  }
  for (std::size_t i = 0; i < net_.size(); ++i) {
    const std::string prefix = std::to_string(i) + "." + std::string(nn::to_string(net_.layer(i).kind())) + ".";
    for (auto& [name, t] : net_.layer(i).buffers()) out.push_back(prefix + name);
  }
  return out;
}

template <typename T>
void Model<T>::load_state(const std::vector<Tensor<T>>& state) {
  std::vector<Tensor<T>*> slots;
  for (auto* p : net_.params()) slots.push_back(&p->value);
  for (auto& [name, t] : net_.buffers()) slots.push_back(t);
  if (slots.size() != state.size()) {
    throw ShapeMismatch("model state has " + std::to_string(state.size()) + " tensors, expected " +
                        std::to_string(slots.size()));
  }
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i]->shape() != state[i].shape()) {
      throw ShapeMismatch("model state tensor " + std::to_string(i) + " has shape " + nn::to_string(state[i].shape()) +
                          ", expected " + nn::to_string(slots[i]->shape()));
    }
    *slots[i] = state[i];
  }
}

namespace {

template <typename T>
std::unique_ptr<nn::Layer<T>> make_front_end(const ModelConfig& c, std::size_t& channels) {
  switch (c.front_end) {
    case FrontEnd::Embedding:
      channels = c.embedding_dim;
      return std::make_unique<nn::Embedding<T>>(c.vocab_size, c.embedding_dim);
    case FrontEnd::OneHot:
      channels = c.vocab_size + 1;
      return std::make_unique<nn::OneHot<T>>(c.vocab_size);
    case FrontEnd::Index:
      channels = 1;
      return std::make_unique<nn::IndexInput<T>>(c.vocab_size);
  }
  throw InvalidConfig("unknown front end");
}

template <typename T>
Model<T> finish(const ModelConfig& config, nn::Sequential<T> net, std::uint64_t seed) {
  Rng rng(seed);
  net.initialize(rng);
  // Token front ends without parameters need no gradient from the layer above.
  const auto first = net.layer(0).kind();
  if (first == nn::LayerKind::OneHot || first == nn::LayerKind::IndexInput) net.layer(1).set_input_grad(false);
  return Model<T>(config, std::move(net));
}

}  // namespace

template <typename T>
Model<T> build_fcn(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  if (config.classifier != Classifier::FCN) throw InvalidConfig("build_fcn: config describes an LSTM");
  nn::Sequential<T> net;
  std::size_t channels = 0;
  std::size_t first_block = 0;
  if (config.front_end == FrontEnd::Index) {
    net.add(make_front_end<T>(config, channels));
  } else {
    // token lookup and first convolution in one layer
    const auto& block = config.conv_blocks.front();
    const std::size_t dim = config.front_end == FrontEnd::Embedding ? config.embedding_dim : 0;
    net.add(std::make_unique<nn::TokenConv1D<T>>(config.vocab_size, dim, block.filters, block.kernel));
    net.add(std::make_unique<nn::BatchNorm<T>>(block.filters));
    net.add(std::make_unique<nn::ReLU<T>>());
    channels = block.filters;
    first_block = 1;
  }
  for (std::size_t i = first_block; i < config.conv_blocks.size(); ++i) {
    const auto& block = config.conv_blocks[i];
    net.add(std::make_unique<nn::Conv1D<T>>(channels, block.filters, block.kernel));
    net.add(std::make_unique<nn::BatchNorm<T>>(block.filters));
    net.add(std::make_unique<nn::ReLU<T>>());
    channels = block.filters;
  }
  net.add(std::make_unique<nn::GlobalAvgPool<T>>());
  net.add(std::make_unique<nn::Dense<T>>(channels, config.num_classes));
  return finish(config, std::move(net), seed);
}

template <typename T>
Model<T> build_lstm(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  if (config.classifier != Classifier::LSTM) throw InvalidConfig("build_lstm: config describes an FCN");
  nn::Sequential<T> net;
  std::size_t channels = 0;
  net.add(make_front_end<T>(config, channels));
  net.add(std::make_unique<nn::LSTM<T>>(channels, config.lstm_units));
  net.add(std::make_unique<nn::Dense<T>>(config.lstm_units, config.num_classes));
  return finish(config, std::move(net), seed);
}

template <typename T>
Model<T> build_model(const ModelConfig& config, std::uint64_t seed) {
  return config.classifier == Classifier::FCN ? build_fcn<T>(config, seed) : build_lstm<T>(config, seed);
}

template <typename T>
Tensor<T> predict(Model<T>& model, const TokenBatch& batch) {
  return nn::softmax(model.forward(batch, Mode::Infer));
}

// ---------------------------------------------------------------- checkpoints

namespace {

constexpr char kMagic[8] = {'S', 'E', 'W', 'H', 'A', 'R', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}
  template <typename V>
  void pod(V v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  void str(const std::string& s) {
    pod<std::uint64_t>(s.size());
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  template <typename T>
  void tensor(const std::string& name, const Tensor<T>& t) {
    str(name);
    pod<std::uint64_t>(t.rank());
    for (auto d : t.shape()) pod<std::uint64_t>(d);
    out_.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(T)));
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  Reader(std::istream& in, std::uint32_t scalar_bytes) : in_(in), scalar_bytes_(scalar_bytes) {}
  template <typename V>
  V pod() {
    V v{};
    in_.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in_) throw CheckpointError("checkpoint truncated");
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint64_t>();
    if (n > (1u << 30)) throw CheckpointError("checkpoint: implausible string length");
    std::string s(n, '\0');
    in_.read(s.data(), static_cast<std::streamsize>(n));
    if (!in_) throw CheckpointError("checkpoint truncated");
    return s;
  }
  template <typename T>
  Tensor<T> tensor(std::string& name) {
    name = str();
    const auto rank = pod<std::uint64_t>();
    if (rank > 8) throw CheckpointError("checkpoint: implausible tensor rank");
    nn::Shape shape(rank);
    for (auto& d : shape) d = pod<std::uint64_t>();
    std::vector<T> values(nn::element_count(shape));
    if (scalar_bytes_ == sizeof(T)) {
      in_.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(T)));
    } else if (scalar_bytes_ == 4) {
      for (auto& v : values) v = static_cast<T>(pod<float>());
    } else {
      for (auto& v : values) v = static_cast<T>(pod<double>());
    }
    if (!in_) throw CheckpointError("checkpoint truncated");
    return Tensor<T>(std::move(shape), std::move(values));
  }

 private:
  std::istream& in_;
  std::uint32_t scalar_bytes_;
};

}  // namespace

template <typename T>
void save_checkpoint(const std::string& path, Model<T>& model, const CheckpointMeta& meta,
                     const nn::Adam<T>* optimizer) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot open '" + path + "' for writing");
  Writer w(out);
  out.write(kMagic, sizeof kMagic);
  w.pod<std::uint32_t>(kVersion);
  w.pod<std::uint32_t>(sizeof(T));
  w.str(describe(model.config()));

  w.pod<std::uint64_t>(meta.class_names.size());
  for (const auto& c : meta.class_names) w.str(c);
  w.pod<std::uint64_t>(meta.extra.size());
  for (const auto& [k, v] : meta.extra) {
    w.str(k);
    w.str(v);
  }

  const auto names = model.state_names();
  const auto state = model.state();
  w.pod<std::uint64_t>(state.size());
  for (std::size_t i = 0; i < state.size(); ++i) w.tensor(names[i], state[i]);

  w.pod<std::uint8_t>(optimizer ? 1 : 0);
  if (optimizer) {
    const auto& cfg = optimizer->config();
    w.pod<double>(cfg.learning_rate);
    w.pod<double>(cfg.beta1);
    w.pod<double>(cfg.beta2);
    w.pod<double>(cfg.epsilon);
    w.pod<std::uint64_t>(optimizer->steps());
    w.pod<std::uint64_t>(optimizer->first_moments().size());
    for (const auto& m : optimizer->first_moments()) w.tensor("m", m);
    for (const auto& v : optimizer->second_moments()) w.tensor("v", v);
  }
  if (!out) throw CheckpointError("write failed for '" + path + "'");
}

template <typename T>
Checkpoint<T> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open '" + path + "'");
  char magic[sizeof kMagic] = {};
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw CheckpointError("'" + path + "' is not a checkpoint");

  Reader header(in, 0);
  const auto version = header.pod<std::uint32_t>();
  if (version != kVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  const auto scalar_bytes = header.pod<std::uint32_t>();
  if (scalar_bytes != 4 && scalar_bytes != 8) throw CheckpointError("bad scalar width in checkpoint");
  Reader r(in, scalar_bytes);

  ModelConfig config;
  try {
    config = parse_descriptor(r.str());
  } catch (const InvalidConfig& e) {
    throw CheckpointError(std::string("checkpoint: ") + e.what());
  }

  CheckpointMeta meta;
  meta.class_names.resize(r.pod<std::uint64_t>());
  for (auto& c : meta.class_names) c = r.str();
  const auto extra = r.pod<std::uint64_t>();
  for (std::uint64_t i = 0; i < extra; ++i) {
    auto k = r.str();
    meta.extra[k] = r.str();
  }

  Model<T> model = build_model<T>(config, 0);
  const auto names = model.state_names();
  const auto count = r.pod<std::uint64_t>();
  if (count != names.size()) throw CheckpointError("checkpoint tensor count does not match its architecture");
  std::vector<Tensor<T>> state;
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name;
    state.push_back(r.tensor<T>(name));
    if (name != names[i]) throw CheckpointError("checkpoint tensor '" + name + "' where '" + names[i] + "' expected");
  }
  try {
    model.load_state(state);
  } catch (const ShapeMismatch& e) {
    throw CheckpointError(std::string("checkpoint: ") + e.what());
  }

  Checkpoint<T> ckpt{std::move(model), std::move(meta), std::nullopt};
  if (r.pod<std::uint8_t>() != 0) {
    nn::AdamConfig cfg;
    cfg.learning_rate = r.pod<double>();
    cfg.beta1 = r.pod<double>();
    cfg.beta2 = r.pod<double>();
    cfg.epsilon = r.pod<double>();
    const auto steps = r.pod<std::uint64_t>();
    const auto n = r.pod<std::uint64_t>();
    std::vector<Tensor<T>> m, v;
    std::string name;
    for (std::uint64_t i = 0; i < n; ++i) m.push_back(r.tensor<T>(name));
    for (std::uint64_t i = 0; i < n; ++i) v.push_back(r.tensor<T>(name));
    nn::Adam<T> adam(cfg);
    adam.restore(steps, std::move(m), std::move(v));
    ckpt.optimizer = std::move(adam);
  }
  return ckpt;
}

#define SEWHAR_INSTANTIATE(T)                                                                        \
  template class Model<T>;                                                                           \
  template Model<T> build_fcn<T>(const ModelConfig&, std::uint64_t);                                 \
  template Model<T> build_lstm<T>(const ModelConfig&, std::uint64_t);                                \
  template Model<T> build_model<T>(const ModelConfig&, std::uint64_t);                               \
  template Tensor<T> predict<T>(Model<T>&, const TokenBatch&);                                       \
  template void save_checkpoint<T>(const std::string&, Model<T>&, const CheckpointMeta&, const nn::Adam<T>*); \
  template Checkpoint<T> load_checkpoint<T>(const std::string&);

SEWHAR_INSTANTIATE(float)
SEWHAR_INSTANTIATE(double)

#undef SEWHAR_INSTANTIATE

}  // namespace sewhar

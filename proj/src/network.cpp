#include "mlfas/network.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>
#include <sstream>

#include "mlfas/error.hpp"
#include "mlfas/kernels.hpp"

namespace mlfas {

std::string to_string(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::relu: return "relu";
    case ActivationKind::leaky_relu: return "leaky_relu";
    case ActivationKind::identity: return "identity";
  }
  return "relu";
}

ActivationKind activation_from_string(const std::string& name) {
  if (name == "relu") return ActivationKind::relu;
  if (name == "leaky_relu") return ActivationKind::leaky_relu;
  if (name == "identity") return ActivationKind::identity;
  throw ConfigError("unknown activation '" + name + "'");
}

std::size_t layer_units(const Layer& layer) {
  if (const auto* d = std::get_if<DenseLayer>(&layer)) return static_cast<std::size_t>(d->weights.rows());
  return static_cast<std::size_t>(std::get<ConvLayer>(layer).out_channels);
}

std::size_t layer_input_size(const Layer& layer) {
  if (const auto* d = std::get_if<DenseLayer>(&layer)) return static_cast<std::size_t>(d->weights.cols());
  return std::get<ConvLayer>(layer).input_size();
}

std::size_t layer_output_size(const Layer& layer) {
  if (const auto* d = std::get_if<DenseLayer>(&layer)) return static_cast<std::size_t>(d->weights.rows());
  return std::get<ConvLayer>(layer).output_size();
}

std::size_t weight_count(const Layer& layer) {
  if (const auto* d = std::get_if<DenseLayer>(&layer)) return static_cast<std::size_t>(d->weights.size());
  return std::get<ConvLayer>(layer).kernels.size();
}

bool is_conv(const Layer& layer) { return std::holds_alternative<ConvLayer>(layer); }

std::size_t Network::input_size() const { return layers.empty() ? 0 : layer_input_size(layers.front()); }
std::size_t Network::output_size() const { return layers.empty() ? 0 : layer_output_size(layers.back()); }

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += weight_count(l) + layer_units(l);
  return n;
}

void validate(const Network& net) {
  if (net.layers.empty()) throw ShapeError("network has no layers");
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    const std::string where = "layer " + std::to_string(k);
    const Layer& layer = net.layers[k];
    if (const auto* d = std::get_if<DenseLayer>(&layer)) {
      if (d->weights.rows() < 1 || d->weights.cols() < 1) throw ShapeError(where + ": empty weight matrix");
      if (d->bias.size() != d->weights.rows()) throw ShapeError(where + ": bias length differs from weight rows");
      if (!d->weights.allFinite() || !d->bias.allFinite()) throw ShapeError(where + ": non-finite parameter");
    } else {
      const auto& c = std::get<ConvLayer>(layer);
      try {
        validate(c);
      } catch (const ShapeError& e) {
        throw ShapeError(where + ": " + e.what());
      }
      if (k > 0 && !is_conv(net.layers[k - 1])) {
        throw ShapeError(where + ": convolutional layer after a dense layer is not supported");
      }
      if (k > 0) {
        const auto& prev = std::get<ConvLayer>(net.layers[k - 1]);
        if (prev.out_channels != c.in_channels || prev.out_h() != c.in_h || prev.out_w() != c.in_w) {
          throw ShapeError(where + ": input shape does not match the previous layer's output");
        }
      }
    }
    if (k > 0 && layer_input_size(layer) != layer_output_size(net.layers[k - 1])) {
      throw ShapeError(where + ": expects input of size " + std::to_string(layer_input_size(layer)) +
                       " but layer " + std::to_string(k - 1) + " produces " +
                       std::to_string(layer_output_size(net.layers[k - 1])));
    }
  }
}

std::shared_ptr<const ParamLayout> param_layout(const Network& net) {
  std::vector<std::size_t> w, b;
  for (const auto& l : net.layers) {
    w.push_back(weight_count(l));
    b.push_back(layer_units(l));
  }
  return std::make_shared<const ParamLayout>(w, b);
}

ParamVector flatten(const Network& net) {
  ParamVector x(param_layout(net));
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    if (const auto* d = std::get_if<DenseLayer>(&net.layers[k])) {
      x.weights(k) = Eigen::Map<const Vector>(d->weights.data(), d->weights.size());
      x.bias(k) = d->bias;
    } else {
      const auto& c = std::get<ConvLayer>(net.layers[k]);
      x.weights(k) = Eigen::Map<const Vector>(c.kernels.data(), static_cast<Eigen::Index>(c.kernels.size()));
      x.bias(k) = c.bias;
    }
  }
  return x;
}

void unflatten(Network& net, const ParamVector& x) {
  if (x.size() != net.parameter_count()) {
    throw ShapeError("unflatten: vector has " + std::to_string(x.size()) + " entries, network has " +
                     std::to_string(net.parameter_count()) + " parameters");
  }
  if (!(x.layout() == *param_layout(net))) throw ShapeError("unflatten: segment layout does not match the network");
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    if (auto* d = std::get_if<DenseLayer>(&net.layers[k])) {
      Eigen::Map<Vector>(d->weights.data(), d->weights.size()) = x.weights(k);
      d->bias = x.bias(k);
    } else {
      auto& c = std::get<ConvLayer>(net.layers[k]);
      Eigen::Map<Vector>(c.kernels.data(), static_cast<Eigen::Index>(c.kernels.size())) = x.weights(k);
      c.bias = x.bias(k);
    }
  }
}

Network make_network(const NetworkSpec& spec, std::uint64_t seed) {
  Network net;
  net.activation = spec.activation;
  net.activate_output = spec.activate_output;

  InputShape shape = spec.input;
  bool spatial = true;  // still in the convolutional prefix
  std::size_t width = spec.input.size();
  for (std::size_t k = 0; k < spec.hidden.size(); ++k) {
    const LayerSpec& ls = spec.hidden[k];
    if (ls.units < 1) throw ConfigError("hidden layer " + std::to_string(k) + ": width must be positive");
    if (ls.kind == LayerSpec::Kind::conv) {
      if (!spatial) throw ConfigError("hidden layer " + std::to_string(k) + ": conv layer after a dense layer");
      ConvLayer c = make_conv_layer(ls.units, shape.channels, ls.kernel, ls.kernel, shape.height, shape.width,
                                    ls.stride, ls.stride, ls.padding, ls.padding);
      shape = {c.out_channels, c.out_h(), c.out_w()};
      width = c.output_size();
      net.layers.emplace_back(std::move(c));
    } else {
      spatial = false;
      DenseLayer d{RowMatrix::Zero(ls.units, static_cast<Eigen::Index>(width)), Vector::Zero(ls.units)};
      width = static_cast<std::size_t>(ls.units);
      net.layers.emplace_back(std::move(d));
    }
  }
  if (spec.output_size < 1) throw ConfigError("output size must be positive");
  net.layers.emplace_back(DenseLayer{RowMatrix::Zero(static_cast<Eigen::Index>(spec.output_size),
                                                     static_cast<Eigen::Index>(width)),
                                     Vector::Zero(static_cast<Eigen::Index>(spec.output_size))});

  std::mt19937_64 rng(seed);
  for (auto& layer : net.layers) {
    std::size_t fan_in = 0;
    if (const auto* d = std::get_if<DenseLayer>(&layer)) {
      fan_in = static_cast<std::size_t>(d->weights.cols());
    } else {
      const auto& c = std::get<ConvLayer>(layer);
      fan_in = static_cast<std::size_t>(c.in_channels) * c.taps();
    }
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    auto fill = [&](double* p, std::size_t n) {
      for (std::size_t i = 0; i < n; ++i) p[i] = dist(rng);
    };
    if (auto* d = std::get_if<DenseLayer>(&layer)) {
      fill(d->weights.data(), static_cast<std::size_t>(d->weights.size()));
      fill(d->bias.data(), static_cast<std::size_t>(d->bias.size()));
    } else {
      auto& c = std::get<ConvLayer>(layer);
      fill(c.kernels.data(), c.kernels.size());
      fill(c.bias.data(), static_cast<std::size_t>(c.bias.size()));
    }
  }
  validate(net);
  return net;
}

std::vector<LayerSpec> parse_hidden_spec(const std::string& text) {
  std::vector<LayerSpec> out;
  std::stringstream ss(text);
  std::string token;
  while (std::getline(ss, token, ',')) {
    token.erase(std::remove_if(token.begin(), token.end(), [](unsigned char ch) { return std::isspace(ch); }),
                token.end());
    if (token.empty()) continue;
    const auto colon = token.find(':');
    if (colon == std::string::npos) throw ConfigError("layer spec '" + token + "' lacks a kind prefix");
    const std::string kind = token.substr(0, colon);
    const std::string body = token.substr(colon + 1);
    try {
      if (kind == "dense") {
        out.push_back(LayerSpec::dense(std::stoi(body)));
      } else if (kind == "conv") {
        std::vector<int> fields;
        std::stringstream fs(body);
        std::string f;
        while (std::getline(fs, f, '/')) fields.push_back(std::stoi(f));
        if (fields.size() < 2 || fields.size() > 4) {
          throw ConfigError("conv spec '" + token + "' needs channels/kernel[/stride[/padding]]");
        }
        out.push_back(LayerSpec::conv(fields[0], fields[1], fields.size() > 2 ? fields[2] : 1,
                                      fields.size() > 3 ? fields[3] : 0));
      } else {
        throw ConfigError("unknown layer kind '" + kind + "'");
      }
    } catch (const std::logic_error&) {
      throw ConfigError("malformed layer spec '" + token + "'");
    }
  }
  return out;
}

std::string format_hidden_spec(const std::vector<LayerSpec>& hidden) {
  std::string out;
  for (const auto& l : hidden) {
    if (!out.empty()) out += ",";
    if (l.kind == LayerSpec::Kind::dense) {
      out += "dense:" + std::to_string(l.units);
    } else {
      out += "conv:" + std::to_string(l.units) + "/" + std::to_string(l.kernel) + "/" + std::to_string(l.stride) +
             "/" + std::to_string(l.padding);
    }
  }
  return out;
}

namespace {

void require_batch(const Network& net, const Minibatch& batch, const char* op) {
  if (batch.size() == 0) throw ShapeError(std::string(op) + ": empty minibatch");
  if (static_cast<std::size_t>(batch.inputs.rows()) != net.input_size()) {
    throw ShapeError(std::string(op) + ": layer 0 expects input of size " + std::to_string(net.input_size()) +
                     ", got " + std::to_string(batch.inputs.rows()));
  }
  if (static_cast<std::size_t>(batch.targets.rows()) != net.output_size()) {
    throw ShapeError(std::string(op) + ": layer " + std::to_string(net.layers.size() - 1) + " produces " +
                     std::to_string(net.output_size()) + " outputs, targets have " +
                     std::to_string(batch.targets.rows()));
  }
  if (batch.targets.cols() != batch.inputs.cols()) throw ShapeError(std::string(op) + ": input/target count differ");
}

}  // namespace

Vector forward(const Network& net, const Vector& input) {
  validate(net);
  if (static_cast<std::size_t>(input.size()) != net.input_size()) {
    throw ShapeError("forward: layer 0 expects input of size " + std::to_string(net.input_size()) + ", got " +
                     std::to_string(input.size()));
  }
  BatchMatrix y = input;
  return kernels::forward_batch(net, y).col(0);
}

BatchMatrix forward_batch(const Network& net, const BatchMatrix& inputs) {
  validate(net);
  if (static_cast<std::size_t>(inputs.rows()) != net.input_size()) {
    throw ShapeError("forward: layer 0 expects input of size " + std::to_string(net.input_size()) + ", got " +
                     std::to_string(inputs.rows()));
  }
  return kernels::forward_batch(net, inputs);
}

LossValue loss(const Network& net, const Minibatch& batch) {
  validate(net);
  require_batch(net, batch, "loss");
  const BatchMatrix err = kernels::forward_batch(net, batch.inputs) - batch.targets;
  LossValue v;
  v.l2 = err.squaredNorm() / static_cast<double>(batch.size());
  v.linf = err.cwiseAbs().maxCoeff();
  return v;
}

GradientResult gradient_and_loss(const Network& net, const Minibatch& batch) {
  validate(net);
  require_batch(net, batch, "backward");
  const auto layout = param_layout(net);
  const Eigen::Index n = batch.inputs.cols();
  const auto chunks = static_cast<std::ptrdiff_t>((static_cast<std::size_t>(n) + kernels::chunk_size - 1) /
                                                  kernels::chunk_size);
  const double scale = 1.0 / static_cast<double>(n);
  std::vector<kernels::ChunkGradient> partial(static_cast<std::size_t>(chunks));
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < chunks; ++c) {
    const Eigen::Index begin = c * static_cast<Eigen::Index>(kernels::chunk_size);
    const Eigen::Index width = std::min<Eigen::Index>(static_cast<Eigen::Index>(kernels::chunk_size), n - begin);
    partial[static_cast<std::size_t>(c)] = kernels::chunk_gradient(
        net, *layout, batch.inputs.middleCols(begin, width), batch.targets.middleCols(begin, width), scale);
  }

  GradientResult r{ParamVector(layout), {}};
  double sq = 0.0;
  for (const auto& p : partial) {
    r.gradient.values() += p.gradient;
    sq += p.squared_error;
    r.loss.linf = std::max(r.loss.linf, p.max_error);
  }
  r.loss.l2 = sq * scale;
  return r;
}

ParamVector backward(const Network& net, const Minibatch& batch) { return gradient_and_loss(net, batch).gradient; }

}  // namespace mlfas

#include "hagcn/model.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

namespace hagcn {

DenseLayer DenseLayer::create(int in, int out, std::mt19937_64& rng, const std::string& prefix) {
  if (in < 1 || out < 1) throw BuildError(prefix + ": fc widths must be positive");
  DenseLayer layer;
  layer.weight = Parameter(prefix + ".W", glorot_uniform(in, out, rng), true);
  layer.bias = Parameter(prefix + ".b", Matrix::Zero(1, out), false);
  return layer;
}

Var DenseLayer::forward(Var x) {
  if (x.cols() != input_width()) {
    throw ShapeError(weight.name + ": expects width " + std::to_string(input_width()) + ", got " +
                     shape_string(x.value()));
  }
  Tape& tape = x.tape();
  return add_row_bias(matmul(x, tape.parameter(weight)), tape.parameter(bias));
}

Model Model::build(const ArchitectureSpec& spec, int n, int m, const BuildOptions& options) {
  if (spec.layers.empty()) throw BuildError("build_model: architecture has no layers");
  if (n < 1 || m < 1) throw BuildError("build_model: node capacity and feature width must be positive");

  Model model;
  model.spec_ = spec;
  model.options_ = options;
  model.n_ = n;
  model.m_ = m;

  std::optional<std::size_t> last_fc;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    if (std::holds_alternative<FcDesc>(spec.layers[i])) last_fc = i;
  }
  if (options.head_width && !last_fc) throw BuildError("build_model: head width given but architecture has no fc layer");

  std::mt19937_64 rng(options.seed);
  int width = m;
  model.widths_.push_back(width);
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const std::string prefix = "L" + std::to_string(i);
    const LayerDesc& desc = spec.layers[i];
    if (const auto* g = std::get_if<GconvDesc>(&desc)) {
      std::optional<GateVariant> gate;
      if (g->adaptive) gate = options.gate_variant;
      try {
        model.layers_.emplace_back(HaConvLayer::create(g->orders, gate, n, width, rng, prefix + ".gconv"));
      } catch (const std::invalid_argument& e) {
        throw BuildError("build_model: layer " + std::to_string(i) + ": " + e.what());
      }
      width *= static_cast<int>(g->orders.size());
    } else if (const auto* f = std::get_if<FcDesc>(&desc)) {
      const int out = (options.head_width && i == *last_fc) ? *options.head_width : f->width;
      if (out < 1) throw BuildError("build_model: layer " + std::to_string(i) + ": fc width must be positive");
      model.layers_.emplace_back(DenseLayer::create(width, out, rng, prefix + ".fc"));
      width = out;
    } else if (std::holds_alternative<ReluDesc>(desc)) {
      model.layers_.emplace_back(ReluLayer{});
    } else if (std::holds_alternative<SoftmaxDesc>(desc)) {
      model.layers_.emplace_back(SoftmaxLayer{});
    } else {
      model.layers_.emplace_back(DconvLayer{});
      width = n;
    }
    model.widths_.push_back(width);
  }
  return model;
}

Var Model::forward(Tape& tape, const ClippedPowers& powers, Var x, const ForwardOptions& options) {
  return forward_range(tape, &powers, x, 0, layers_.size(), options);
}

Var Model::forward_range(Tape& tape, const ClippedPowers* powers, Var x, std::size_t first, std::size_t last,
                         const ForwardOptions& options) {
  if (first > last || last > layers_.size()) throw std::out_of_range("forward_range: invalid layer range");
  if (&x.tape() != &tape) throw std::invalid_argument("forward: input lives on a different tape");
  Var h = x;
  for (std::size_t i = first; i < last; ++i) {
    Layer& layer = layers_[i];
    const bool drops = std::holds_alternative<HaConvLayer>(layer) || std::holds_alternative<DenseLayer>(layer);
    if (drops) h = dropout(h, options.dropout_rate, mix_seed(options.seed, i), options.training);

    if (auto* conv = std::get_if<HaConvLayer>(&layer)) {
      if (powers == nullptr) throw std::invalid_argument("forward: gconv layer " + std::to_string(i) + " needs a graph");
      GateObserver observer;
      if (options.gate_observer) {
        observer = [&, i](int k, const Matrix& gate) { options.gate_observer(i, k, gate); };
      }
      h = ha_forward(*conv, *powers, h, observer);
    } else if (auto* dense = std::get_if<DenseLayer>(&layer)) {
      h = dense->forward(h);
    } else if (std::holds_alternative<ReluLayer>(layer)) {
      h = relu(h);
    } else if (std::holds_alternative<DconvLayer>(layer)) {
      h = dconv_decode(h);
    }
  }
  return h;
}

std::vector<Parameter*> Model::parameters() {
  std::vector<Parameter*> out;
  for (Layer& layer : layers_) {
    if (auto* conv = std::get_if<HaConvLayer>(&layer)) {
      for (Parameter* p : conv->parameters()) out.push_back(p);
    } else if (auto* dense = std::get_if<DenseLayer>(&layer)) {
      out.push_back(&dense->weight);
      out.push_back(&dense->bias);
    }
  }
  return out;
}

std::vector<const Parameter*> Model::parameters() const {
  const auto mutable_params = const_cast<Model*>(this)->parameters();
  return {mutable_params.begin(), mutable_params.end()};
}

std::vector<int> Model::orders() const {
  std::set<int> all;
  for (const Layer& layer : layers_) {
    if (const auto* conv = std::get_if<HaConvLayer>(&layer)) all.insert(conv->orders.begin(), conv->orders.end());
  }
  return {all.begin(), all.end()};
}

bool Model::has_adaptive_layers() const {
  for (const Layer& layer : layers_) {
    if (const auto* conv = std::get_if<HaConvLayer>(&layer); conv && conv->adaptive) return true;
  }
  return false;
}

std::optional<std::size_t> Model::last_dense_index() const {
  std::optional<std::size_t> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (std::holds_alternative<DenseLayer>(layers_[i])) out = i;
  }
  return out;
}

nlohmann::json parameter_to_json(const Parameter& p) {
  std::vector<double> values(p.value.data(), p.value.data() + p.value.size());
  return {{"name", p.name}, {"rows", p.value.rows()}, {"cols", p.value.cols()}, {"values", values}};
}

void parameter_from_json(const nlohmann::json& j, Parameter& p) {
  const auto name = j.at("name").get<std::string>();
  if (name != p.name) throw std::runtime_error("checkpoint: expected parameter '" + p.name + "', found '" + name + "'");
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto values = j.at("values").get<std::vector<double>>();
  if (rows != p.value.rows() || cols != p.value.cols() || static_cast<Eigen::Index>(values.size()) != rows * cols) {
    throw std::runtime_error("checkpoint: parameter '" + name + "' has shape " + shape_string(rows, cols) +
                             ", model expects " + shape_string(p.value));
  }
  p.value = Eigen::Map<const Matrix>(values.data(), rows, cols);
  p.zero_grad();
}

nlohmann::json Model::to_json() const {
  nlohmann::json params = nlohmann::json::array();
  for (const Parameter* p : parameters()) params.push_back(parameter_to_json(*p));
  nlohmann::json j = {{"arch", to_string(spec_)},
                      {"n", n_},
                      {"m", m_},
                      {"gate_variant", to_string(options_.gate_variant)},
                      {"parameters", std::move(params)}};
  j["head_width"] = options_.head_width ? nlohmann::json(*options_.head_width) : nlohmann::json(nullptr);
  return j;
}

Model Model::from_json(const nlohmann::json& j) {
  BuildOptions options;
  options.gate_variant = parse_gate_variant(j.at("gate_variant").get<std::string>());
  if (j.contains("head_width") && !j.at("head_width").is_null()) options.head_width = j.at("head_width").get<int>();
  Model model = build(parse_architecture(j.at("arch").get<std::string>()), j.at("n").get<int>(), j.at("m").get<int>(),
                      options);
  const auto& stored = j.at("parameters");
  auto params = model.parameters();
  if (stored.size() != params.size()) {
    throw std::runtime_error("checkpoint: " + std::to_string(stored.size()) + " parameters stored, model has " +
                             std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) parameter_from_json(stored[i], *params[i]);
  return model;
}

void TrainingConfig::validate() const {
  if (!(learning_rate >= 0.0)) throw std::invalid_argument("learning rate must be non-negative");
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw std::invalid_argument("dropout rate must lie in [0, 1)");
  if (!(l2_coefficient >= 0.0)) throw std::invalid_argument("l2 coefficient must be non-negative");
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  if (optimizer == OptimizerKind::adam &&
      !(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0 && adam_epsilon > 0.0)) {
    throw std::invalid_argument("adam settings out of range");
  }
}

void Optimizer::step(std::span<Parameter* const> params) {
  const double lr = config_.learning_rate;
  if (config_.optimizer == OptimizerKind::sgd) {
    for (Parameter* p : params) p->value -= lr * p->grad;
    return;
  }
  if (first_moment_.empty()) {
    for (Parameter* p : params) {
      first_moment_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
      second_moment_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    }
  }
  if (first_moment_.size() != params.size()) throw std::logic_error("optimizer: parameter set changed between steps");
  ++steps_;
  const double b1 = config_.adam_beta1;
  const double b2 = config_.adam_beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    first_moment_[i] = b1 * first_moment_[i] + (1.0 - b1) * p.grad;
    second_moment_[i] = b2 * second_moment_[i] + (1.0 - b2) * p.grad.cwiseAbs2();
    const auto m_hat = first_moment_[i].array() / correction1;
    const auto v_hat = second_moment_[i].array() / correction2;
    p.value.array() -= lr * m_hat / (v_hat.sqrt() + config_.adam_epsilon);
  }
}

double train_step(std::span<Parameter* const> params, const LossBuilder& task_loss, const TrainingConfig& config,
                  Optimizer& optimizer) {
  for (Parameter* p : params) p->zero_grad();
  Tape tape;
  Var loss = task_loss(tape);
  if (config.l2_coefficient > 0.0) {
    for (Parameter* p : params) {
      if (p->regularized) loss = add(loss, scale(sum_squares(tape.parameter(*p)), config.l2_coefficient));
    }
  }
  const double value = loss.scalar();
  if (!std::isfinite(value)) throw std::runtime_error("train_step: loss became non-finite (" + std::to_string(value) + ")");
  tape.backward(loss);
  optimizer.step(params);
  return value;
}

double accuracy(const Matrix& logits, std::span<const int> labels, const Mask& mask) {
  if (static_cast<Eigen::Index>(labels.size()) != logits.rows() || static_cast<Eigen::Index>(mask.size()) != logits.rows()) {
    throw ShapeError("accuracy: labels/mask do not match " + shape_string(logits));
  }
  std::size_t total = 0;
  std::size_t correct = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    if (mask[i] == 0) continue;
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < logits.cols(); ++c) {
      if (logits(i, c) > logits(i, best)) best = c;
    }
    ++total;
    if (best == labels[i]) ++correct;
  }
  if (total == 0) throw std::invalid_argument("accuracy: mask selects no rows");
  return static_cast<double>(correct) / static_cast<double>(total);
}

double rmse(std::span<const double> predictions, std::span<const double> targets) {
  if (predictions.size() != targets.size()) throw ShapeError("rmse: prediction and target counts differ");
  if (predictions.empty()) throw std::invalid_argument("rmse: no predictions");
  double total = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double d = predictions[i] - targets[i];
    total += d * d;
  }
  return std::sqrt(total / static_cast<double>(predictions.size()));
}

}  // namespace hagcn

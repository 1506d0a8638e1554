#pragma once

#include "hagcn/architecture.hpp"
#include "hagcn/autodiff.hpp"
#include "hagcn/ha_operators.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <variant>
#include <vector>

namespace hagcn {

/// Node-wise fully connected layer: X W + 1·b.
struct DenseLayer {
  Parameter weight;
  Parameter bias;

  static DenseLayer create(int in, int out, std::mt19937_64& rng, const std::string& prefix);
  Var forward(Var x);
  int input_width() const { return static_cast<int>(weight.value.rows()); }
  int output_width() const { return static_cast<int>(weight.value.cols()); }
};

struct ReluLayer {};
/// Logits pass through unchanged; softmax is fused into the loss and metrics.
struct SoftmaxLayer {};
struct DconvLayer {};

using Layer = std::variant<HaConvLayer, DenseLayer, ReluLayer, SoftmaxLayer, DconvLayer>;

struct BuildOptions {
  GateVariant gate_variant = GateVariant::lin;
  /// Replaces the width of the last fc layer (the class count for classifiers).
  std::optional<int> head_width;
  std::uint64_t seed = 0;
};

struct ForwardOptions {
  bool training = false;
  double dropout_rate = 0.0;
  std::uint64_t seed = 0;
  std::function<void(std::size_t layer, int order, const Matrix& gate)> gate_observer;
};

class BuildError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A sequential stack of layers instantiated from an architecture string for
/// graphs of node capacity n with m input features.
class Model {
 public:
  static Model build(const ArchitectureSpec& spec, int n, int m, const BuildOptions& options = {});

  /// Applies every layer. Dropout precedes each gconv and fc layer in training mode.
  Var forward(Tape& tape, const ClippedPowers& powers, Var x, const ForwardOptions& options = {});
  /// Applies layers [first, last).
  Var forward_range(Tape& tape, const ClippedPowers* powers, Var x, std::size_t first, std::size_t last,
                    const ForwardOptions& options = {});

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  /// Orders of every gconv layer, for precomputing clipped powers.
  std::vector<int> orders() const;
  bool has_adaptive_layers() const;

  const ArchitectureSpec& spec() const { return spec_; }
  const BuildOptions& options() const { return options_; }
  int num_nodes() const { return n_; }
  int input_width() const { return m_; }
  int output_width() const { return widths_.back(); }
  /// Feature width entering layer i (i == size() gives the output width).
  int width_before(std::size_t i) const { return widths_.at(i); }
  std::size_t size() const { return layers_.size(); }
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }
  /// Index of the last fc layer, if any.
  std::optional<std::size_t> last_dense_index() const;

  nlohmann::json to_json() const;
  static Model from_json(const nlohmann::json& j);

 private:
  ArchitectureSpec spec_;
  BuildOptions options_;
  int n_ = 0;
  int m_ = 0;
  std::vector<Layer> layers_;
  std::vector<int> widths_;
};

nlohmann::json parameter_to_json(const Parameter& p);
/// Overwrites p.value from j after checking name and shape.
void parameter_from_json(const nlohmann::json& j, Parameter& p);

// Optimization

enum class OptimizerKind { sgd, adam };

struct TrainingConfig {
  double learning_rate = 0.01;
  int epochs = 200;
  double dropout_rate = 0.0;
  double l2_coefficient = 5e-9;
  std::uint64_t seed = 0;
  OptimizerKind optimizer = OptimizerKind::adam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  GateVariant gate_variant = GateVariant::lin;
  /// Graphs per optimizer step for graph-centric tasks.
  int batch_size = 32;

  void validate() const;
};

class Optimizer {
 public:
  explicit Optimizer(const TrainingConfig& config) : config_(config) {}
  void step(std::span<Parameter* const> params);

 private:
  TrainingConfig config_;
  std::vector<Matrix> first_moment_;
  std::vector<Matrix> second_moment_;
  long steps_ = 0;
};

using LossBuilder = std::function<Var(Tape&)>;

/// Zeroes gradients, evaluates task loss + l2·Σ‖W‖² over regularized
/// parameters, back-propagates and applies one optimizer update.
/// Returns the pre-update loss.
double train_step(std::span<Parameter* const> params, const LossBuilder& task_loss, const TrainingConfig& config,
                  Optimizer& optimizer);

// Metrics

/// Fraction of masked rows whose argmax (lowest index on ties) equals the label.
double accuracy(const Matrix& logits, std::span<const int> labels, const Mask& mask);
double rmse(std::span<const double> predictions, std::span<const double> targets);

}  // namespace hagcn

#pragma once

#include "hagcn/dense.hpp"

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace hagcn {

/// A learnable matrix with its accumulated gradient.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  /// Included in the L2 penalty (weight matrices, not biases).
  bool regularized = false;

  Parameter() = default;
  Parameter(std::string id, Matrix init, bool regularize = false)
      : name(std::move(id)), value(std::move(init)), grad(Matrix::Zero(value.rows(), value.cols())),
        regularized(regularize) {}

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

class Tape;

/// Handle to a value recorded on a tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const;

  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Ordered record of executed operations. backward() replays adjoints in
/// reverse execution order, pushes leaf gradients into their Parameters and
/// clears the record.
class Tape {
 public:
  using Adjoint = std::function<void(Tape&, const Matrix& upstream)>;

  explicit Tape(bool check_finite = kCheckFiniteDefault) : check_finite_(check_finite) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var parameter(Parameter& p);

  /// Records a derived value. `inputs` lists the ids the adjoint may write to;
  /// the adjoint is skipped when none of them carries a gradient.
  Var record(Matrix value, std::vector<std::size_t> inputs, Adjoint adjoint, const char* op = "op");

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  /// Adds `delta` to the adjoint of node `id` (no-op for constants).
  void accumulate(std::size_t id, const Matrix& delta);

  void backward(Var loss);
  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

#ifdef NDEBUG
  static constexpr bool kCheckFiniteDefault = false;
#else
  static constexpr bool kCheckFiniteDefault = true;
#endif

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::vector<std::size_t> inputs;
    Adjoint adjoint;
    Parameter* param = nullptr;
    bool requires_grad = false;
  };

  bool check_finite_;
  std::deque<Node> nodes_;
};

// Differentiable operations. All operands must live on the same tape.

Var matmul(Var a, Var b);
Var hadamard(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var a, double factor);
/// a + 1·bias where bias is a single row broadcast over the rows of a.
Var add_row_bias(Var a, Var bias);
Var concat_cols(Var a, Var b);
Var concat_cols(std::span<const Var> parts);
Var slice_cols(Var a, Eigen::Index first, Eigen::Index count);
Var transpose(Var a);
Var reshape(Var a, Eigen::Index rows, Eigen::Index cols);
Var sigmoid(Var a);
Var relu(Var a);
Var exp(Var a);
Var softmax_rows(Var a);
Var sum(Var a);
Var sum_squares(Var a);
/// Mean of the rows selected by mask, as a 1×cols row.
Var masked_mean_rows(Var a, const Mask& mask);

/// Inverted dropout; evaluation mode (or rate 0) returns `a` itself.
Var dropout(Var a, double rate, std::uint64_t seed, bool training);

/// Mean over masked rows of -log softmax(logits)[label].
Var cross_entropy_loss(Var logits, std::span<const int> labels, const Mask& mask);
/// Mean over masked rows of the squared error summed across columns.
Var mse_loss(Var prediction, const Matrix& target, const Mask& mask);
/// Summed binary cross-entropy over entries where pair_mask is non-zero.
/// Probabilities are clamped to [kProbabilityFloor, 1 - kProbabilityFloor].
Var binary_cross_entropy(Var probabilities, const Matrix& target, const Matrix& pair_mask);
/// KL(N(mu, diag exp(log_var)) || N(0, I)) summed over all entries.
Var gaussian_kl(Var mu, Var log_var);

inline constexpr double kProbabilityFloor = 1e-7;

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

/// Central-difference gradient verification.
struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_entry;
  std::size_t entries_checked = 0;
  bool passed = false;
};

using ScalarProgram = std::function<Var(Tape&)>;

/// Compares tape gradients of `program` against (f(+eps) - f(-eps)) / 2eps for
/// every entry of every parameter. The relative error of an entry is
/// |fd - ad| / max(|fd|, |ad|, abs_floor).
GradCheckReport finite_difference_check(const ScalarProgram& program, std::span<Parameter* const> params,
                                        double epsilon = 1e-6, double tolerance = 1e-4, double abs_floor = 1e-6);

}  // namespace hagcn

#include "hagcn/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

namespace hagcn {

const Matrix& Var::value() const { return tape_->value(id_); }

double Var::scalar() const {
  const Matrix& v = value();
  if (v.rows() != 1 || v.cols() != 1) throw ShapeError("scalar(): value has shape " + shape_string(v));
  return v(0, 0);
}

Var Tape::constant(Matrix value) { return record(std::move(value), {}, nullptr, "constant"); }

Var Tape::parameter(Parameter& p) {
  Node node;
  node.value = p.value;
  node.param = &p;
  node.requires_grad = true;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Matrix value, std::vector<std::size_t> inputs, Adjoint adjoint, const char* op) {
  if (check_finite_ && !value.allFinite()) {
    throw std::domain_error(std::string(op) + ": produced a non-finite value");
  }
  Node node;
  node.value = std::move(value);
  node.requires_grad = std::any_of(inputs.begin(), inputs.end(), [&](std::size_t id) { return nodes_[id].requires_grad; });
  node.inputs = std::move(inputs);
  if (node.requires_grad) node.adjoint = std::move(adjoint);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

void Tape::accumulate(std::size_t id, const Matrix& delta) {
  Node& node = nodes_[id];
  if (!node.requires_grad) return;
  if (node.grad.size() == 0) {
    node.grad = delta;
  } else {
    node.grad += delta;
  }
}

void Tape::backward(Var loss) {
  if (&loss.tape() != this) throw std::invalid_argument("backward: loss belongs to a different tape");
  const Matrix& v = value(loss.id());
  if (v.rows() != 1 || v.cols() != 1) throw ShapeError("backward: loss must be 1x1, got " + shape_string(v));

  nodes_[loss.id()].grad = Matrix::Ones(1, 1);
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (!node.requires_grad || node.grad.size() == 0) continue;
    if (node.param != nullptr) {
      node.param->grad += node.grad;
    } else if (node.adjoint) {
      node.adjoint(*this, node.grad);
    }
  }
  nodes_.clear();
}

namespace {

void require_same_tape(Var a, Var b, const char* op) {
  if (&a.tape() != &b.tape()) throw std::invalid_argument(std::string(op) + ": operands live on different tapes");
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a) + " vs " + shape_string(b));
  }
}

std::size_t mask_count(const Mask& mask, Eigen::Index rows, const char* op) {
  if (static_cast<Eigen::Index>(mask.size()) != rows) {
    throw ShapeError(std::string(op) + ": mask has " + std::to_string(mask.size()) + " entries for " +
                     std::to_string(rows) + " rows");
  }
  const auto count = static_cast<std::size_t>(std::count_if(mask.begin(), mask.end(), [](auto m) { return m != 0; }));
  if (count == 0) throw std::invalid_argument(std::string(op) + ": mask selects no rows");
  return count;
}

}  // namespace

Var matmul(Var a, Var b) {
  require_same_tape(a, b, "matmul");
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols() != bv.rows()) {
    throw ShapeError("matmul: inner dimensions differ, " + shape_string(av) + " times " + shape_string(bv));
  }
  const auto ia = a.id();
  const auto ib = b.id();
  return a.tape().record(
      av * bv, {ia, ib},
      [ia, ib](Tape& t, const Matrix& g) {
        if (t.requires_grad(ia)) t.accumulate(ia, g * t.value(ib).transpose());
        if (t.requires_grad(ib)) t.accumulate(ib, t.value(ia).transpose() * g);
      },
      "matmul");
}

Var hadamard(Var a, Var b) {
  require_same_tape(a, b, "hadamard");
  require_same_shape(a.value(), b.value(), "hadamard");
  const auto ia = a.id();
  const auto ib = b.id();
  return a.tape().record(
      a.value().cwiseProduct(b.value()), {ia, ib},
      [ia, ib](Tape& t, const Matrix& g) {
        if (t.requires_grad(ia)) t.accumulate(ia, g.cwiseProduct(t.value(ib)));
        if (t.requires_grad(ib)) t.accumulate(ib, g.cwiseProduct(t.value(ia)));
      },
      "hadamard");
}

Var add(Var a, Var b) {
  require_same_tape(a, b, "add");
  require_same_shape(a.value(), b.value(), "add");
  const auto ia = a.id();
  const auto ib = b.id();
  return a.tape().record(
      a.value() + b.value(), {ia, ib},
      [ia, ib](Tape& t, const Matrix& g) {
        t.accumulate(ia, g);
        t.accumulate(ib, g);
      },
      "add");
}

Var sub(Var a, Var b) {
  require_same_tape(a, b, "sub");
  require_same_shape(a.value(), b.value(), "sub");
  const auto ia = a.id();
  const auto ib = b.id();
  return a.tape().record(
      a.value() - b.value(), {ia, ib},
      [ia, ib](Tape& t, const Matrix& g) {
        t.accumulate(ia, g);
        if (t.requires_grad(ib)) t.accumulate(ib, -g);
      },
      "sub");
}

Var scale(Var a, double factor) {
  const auto ia = a.id();
  return a.tape().record(
      a.value() * factor, {ia}, [ia, factor](Tape& t, const Matrix& g) { t.accumulate(ia, g * factor); }, "scale");
}

Var add_row_bias(Var a, Var bias) {
  require_same_tape(a, bias, "add_row_bias");
  const Matrix& av = a.value();
  const Matrix& bv = bias.value();
  if (bv.rows() != 1 || bv.cols() != av.cols()) {
    throw ShapeError("add_row_bias: bias " + shape_string(bv) + " does not broadcast over " + shape_string(av));
  }
  const auto ia = a.id();
  const auto ib = bias.id();
  Matrix out = av.rowwise() + bv.row(0);
  return a.tape().record(
      std::move(out), {ia, ib},
      [ia, ib](Tape& t, const Matrix& g) {
        t.accumulate(ia, g);
        if (t.requires_grad(ib)) t.accumulate(ib, g.colwise().sum());
      },
      "add_row_bias");
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: nothing to concatenate");
  Tape& tape = parts.front().tape();
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  std::vector<std::size_t> ids;
  std::vector<Eigen::Index> widths;
  for (const Var& p : parts) {
    if (&p.tape() != &tape) throw std::invalid_argument("concat_cols: operands live on different tapes");
    if (p.rows() != rows) {
      throw ShapeError("concat_cols: row counts differ, " + shape_string(parts.front().value()) + " vs " +
                       shape_string(p.value()));
    }
    ids.push_back(p.id());
    widths.push_back(p.cols());
    cols += p.cols();
  }
  Matrix out(rows, cols);
  Eigen::Index offset = 0;
  for (const Var& p : parts) {
    out.middleCols(offset, p.cols()) = p.value();
    offset += p.cols();
  }
  auto inputs = ids;
  return tape.record(
      std::move(out), std::move(inputs),
      [ids, widths](Tape& t, const Matrix& g) {
        Eigen::Index at = 0;
        for (std::size_t i = 0; i < ids.size(); ++i) {
          if (t.requires_grad(ids[i])) t.accumulate(ids[i], g.middleCols(at, widths[i]));
          at += widths[i];
        }
      },
      "concat_cols");
}

Var concat_cols(Var a, Var b) {
  const Var parts[] = {a, b};
  return concat_cols(std::span<const Var>(parts));
}

Var slice_cols(Var a, Eigen::Index first, Eigen::Index count) {
  const Matrix& av = a.value();
  if (first < 0 || count < 0 || first + count > av.cols()) {
    throw ShapeError("slice_cols: columns [" + std::to_string(first) + ", " + std::to_string(first + count) +
                     ") out of range for " + shape_string(av));
  }
  const auto ia = a.id();
  const Eigen::Index rows = av.rows();
  const Eigen::Index total = av.cols();
  return a.tape().record(
      av.middleCols(first, count), {ia},
      [=](Tape& t, const Matrix& g) {
        Matrix full = Matrix::Zero(rows, total);
        full.middleCols(first, count) = g;
        t.accumulate(ia, full);
      },
      "slice_cols");
}

Var transpose(Var a) {
  const auto ia = a.id();
  return a.tape().record(
      a.value().transpose(), {ia}, [ia](Tape& t, const Matrix& g) { t.accumulate(ia, g.transpose()); }, "transpose");
}

Var reshape(Var a, Eigen::Index rows, Eigen::Index cols) {
  const Matrix& av = a.value();
  if (rows * cols != av.size()) {
    throw ShapeError("reshape: cannot view " + shape_string(av) + " as " + shape_string(rows, cols));
  }
  const auto ia = a.id();
  const Eigen::Index in_rows = av.rows();
  const Eigen::Index in_cols = av.cols();
  Matrix out = Eigen::Map<const Matrix>(av.data(), rows, cols);
  return a.tape().record(
      std::move(out), {ia},
      [=](Tape& t, const Matrix& g) { t.accumulate(ia, Eigen::Map<const Matrix>(g.data(), in_rows, in_cols)); },
      "reshape");
}

Var sigmoid(Var a) {
  const auto ia = a.id();
  Matrix out = a.value().unaryExpr([](double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
  Matrix derivative = out.array() * (1.0 - out.array());
  return a.tape().record(
      std::move(out), {ia},
      [ia, derivative = std::move(derivative)](Tape& t, const Matrix& g) {
        t.accumulate(ia, g.cwiseProduct(derivative));
      },
      "sigmoid");
}

Var relu(Var a) {
  const auto ia = a.id();
  Matrix out = a.value().cwiseMax(0.0);
  return a.tape().record(
      std::move(out), {ia},
      [ia](Tape& t, const Matrix& g) {
        const Matrix& x = t.value(ia);
        t.accumulate(ia, (x.array() > 0.0).select(g, 0.0));
      },
      "relu");
}

Var exp(Var a) {
  const auto ia = a.id();
  Matrix out = a.value().array().exp();
  Matrix copy = out;
  return a.tape().record(
      std::move(out), {ia}, [ia, copy = std::move(copy)](Tape& t, const Matrix& g) { t.accumulate(ia, g.cwiseProduct(copy)); },
      "exp");
}

namespace {

Matrix row_softmax(const Matrix& x) {
  Matrix out = x.colwise() - x.rowwise().maxCoeff();
  out = out.array().exp();
  out.array().colwise() /= out.rowwise().sum().array();
  return out;
}

Matrix row_log_softmax(const Matrix& x) {
  const Eigen::VectorXd max = x.rowwise().maxCoeff();
  Matrix shifted = x.colwise() - max;
  const Eigen::VectorXd log_norm = shifted.array().exp().rowwise().sum().log();
  return shifted.colwise() - log_norm;
}

}  // namespace

Var softmax_rows(Var a) {
  const auto ia = a.id();
  Matrix out = row_softmax(a.value());
  Matrix s = out;
  return a.tape().record(
      std::move(out), {ia},
      [ia, s = std::move(s)](Tape& t, const Matrix& g) {
        const Eigen::VectorXd dot = g.cwiseProduct(s).rowwise().sum();
        Matrix dx = s.cwiseProduct(g.colwise() - dot);
        t.accumulate(ia, dx);
      },
      "softmax_rows");
}

Var sum(Var a) {
  const auto ia = a.id();
  const Eigen::Index rows = a.rows();
  const Eigen::Index cols = a.cols();
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return a.tape().record(
      std::move(out), {ia},
      [=](Tape& t, const Matrix& g) { t.accumulate(ia, Matrix::Constant(rows, cols, g(0, 0))); }, "sum");
}

Var sum_squares(Var a) {
  const auto ia = a.id();
  Matrix out(1, 1);
  out(0, 0) = a.value().squaredNorm();
  return a.tape().record(
      std::move(out), {ia}, [ia](Tape& t, const Matrix& g) { t.accumulate(ia, 2.0 * g(0, 0) * t.value(ia)); },
      "sum_squares");
}

Var masked_mean_rows(Var a, const Mask& mask) {
  const Matrix& av = a.value();
  const std::size_t count = mask_count(mask, av.rows(), "masked_mean_rows");
  Matrix out = Matrix::Zero(1, av.cols());
  for (Eigen::Index i = 0; i < av.rows(); ++i) {
    if (mask[i] != 0) out += av.row(i);
  }
  out /= static_cast<double>(count);
  const auto ia = a.id();
  const Eigen::Index rows = av.rows();
  return a.tape().record(
      std::move(out), {ia},
      [ia, rows, mask, count](Tape& t, const Matrix& g) {
        Matrix dx = Matrix::Zero(rows, g.cols());
        for (Eigen::Index i = 0; i < rows; ++i) {
          if (mask[i] != 0) dx.row(i) = g.row(0) / static_cast<double>(count);
        }
        t.accumulate(ia, dx);
      },
      "masked_mean_rows");
}

Var dropout(Var a, double rate, std::uint64_t seed, bool training) {
  if (!(rate >= 0.0 && rate < 1.0)) throw std::invalid_argument("dropout: rate must lie in [0, 1), got " + std::to_string(rate));
  if (!training || rate == 0.0) return a;
  std::mt19937_64 gen(seed);
  const double keep_scale = 1.0 / (1.0 - rate);
  Matrix mask(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    const double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;
    mask.data()[i] = u >= rate ? keep_scale : 0.0;
  }
  const auto ia = a.id();
  Matrix out = a.value().cwiseProduct(mask);
  return a.tape().record(
      std::move(out), {ia}, [ia, mask = std::move(mask)](Tape& t, const Matrix& g) { t.accumulate(ia, g.cwiseProduct(mask)); },
      "dropout");
}

Var cross_entropy_loss(Var logits, std::span<const int> labels, const Mask& mask) {
  const Matrix& z = logits.value();
  const std::size_t count = mask_count(mask, z.rows(), "cross_entropy_loss");
  if (static_cast<Eigen::Index>(labels.size()) != z.rows()) {
    throw ShapeError("cross_entropy_loss: " + std::to_string(labels.size()) + " labels for " + std::to_string(z.rows()) +
                     " rows");
  }
  const Matrix log_p = row_log_softmax(z);
  double total = 0.0;
  Matrix dz = Matrix::Zero(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    if (mask[i] == 0) continue;
    const int y = labels[i];
    if (y < 0 || y >= z.cols()) {
      throw std::out_of_range("cross_entropy_loss: label " + std::to_string(y) + " at row " + std::to_string(i) +
                              " outside [0, " + std::to_string(z.cols()) + ")");
    }
    total -= log_p(i, y);
    dz.row(i) = log_p.row(i).array().exp();
    dz(i, y) -= 1.0;
  }
  const double inv = 1.0 / static_cast<double>(count);
  dz *= inv;
  Matrix out(1, 1);
  out(0, 0) = total * inv;
  const auto iz = logits.id();
  return logits.tape().record(
      std::move(out), {iz}, [iz, dz = std::move(dz)](Tape& t, const Matrix& g) { t.accumulate(iz, dz * g(0, 0)); },
      "cross_entropy_loss");
}

Var mse_loss(Var prediction, const Matrix& target, const Mask& mask) {
  const Matrix& p = prediction.value();
  require_same_shape(p, target, "mse_loss");
  const std::size_t count = mask_count(mask, p.rows(), "mse_loss");
  Matrix diff = p - target;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    if (mask[i] == 0) diff.row(i).setZero();
  }
  const double inv = 1.0 / static_cast<double>(count);
  Matrix out(1, 1);
  out(0, 0) = diff.squaredNorm() * inv;
  Matrix dp = 2.0 * inv * diff;
  const auto ip = prediction.id();
  return prediction.tape().record(
      std::move(out), {ip}, [ip, dp = std::move(dp)](Tape& t, const Matrix& g) { t.accumulate(ip, dp * g(0, 0)); },
      "mse_loss");
}

Var binary_cross_entropy(Var probabilities, const Matrix& target, const Matrix& pair_mask) {
  const Matrix& p = probabilities.value();
  require_same_shape(p, target, "binary_cross_entropy");
  require_same_shape(p, pair_mask, "binary_cross_entropy");
  const Matrix clamped = p.cwiseMax(kProbabilityFloor).cwiseMin(1.0 - kProbabilityFloor);
  const auto c = clamped.array();
  const auto y = target.array();
  const auto w = pair_mask.array();
  Matrix out(1, 1);
  out(0, 0) = -(w * (y * c.log() + (1.0 - y) * (1.0 - c).log())).sum();
  Matrix dp = -(w * (y / c - (1.0 - y) / (1.0 - c))).matrix();
  const auto ip = probabilities.id();
  return probabilities.tape().record(
      std::move(out), {ip}, [ip, dp = std::move(dp)](Tape& t, const Matrix& g) { t.accumulate(ip, dp * g(0, 0)); },
      "binary_cross_entropy");
}

Var gaussian_kl(Var mu, Var log_var) {
  require_same_tape(mu, log_var, "gaussian_kl");
  require_same_shape(mu.value(), log_var.value(), "gaussian_kl");
  const auto m = mu.value().array();
  const auto lv = log_var.value().array();
  Matrix out(1, 1);
  out(0, 0) = 0.5 * (lv.exp() + m.square() - 1.0 - lv).sum();
  const auto im = mu.id();
  const auto il = log_var.id();
  return mu.tape().record(
      std::move(out), {im, il},
      [im, il](Tape& t, const Matrix& g) {
        if (t.requires_grad(im)) t.accumulate(im, g(0, 0) * t.value(im));
        if (t.requires_grad(il)) t.accumulate(il, (0.5 * g(0, 0) * (t.value(il).array().exp() - 1.0)).matrix());
      },
      "gaussian_kl");
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  // splitmix64 finalizer applied to each component in turn
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(seed) ^ a) ^ b);
}

GradCheckReport finite_difference_check(const ScalarProgram& program, std::span<Parameter* const> params,
                                        double epsilon, double tolerance, double abs_floor) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("finite_difference_check: epsilon must be positive");
  for (Parameter* p : params) p->zero_grad();
  {
    Tape tape;
    Var loss = program(tape);
    tape.backward(loss);
  }
  auto evaluate = [&] {
    Tape tape;
    return program(tape).scalar();
  };

  GradCheckReport report;
  for (Parameter* p : params) {
    for (Eigen::Index idx = 0; idx < p->value.size(); ++idx) {
      double& entry = p->value.data()[idx];
      const double saved = entry;
      entry = saved + epsilon;
      const double plus = evaluate();
      entry = saved - epsilon;
      const double minus = evaluate();
      entry = saved;

      const double numeric = (plus - minus) / (2.0 * epsilon);
      const double analytic = p->grad.data()[idx];
      const double denom = std::max({std::abs(numeric), std::abs(analytic), abs_floor});
      const double rel = std::abs(numeric - analytic) / denom;
      ++report.entries_checked;
      if (rel > report.max_relative_error || !std::isfinite(rel)) {
        report.max_relative_error = std::isfinite(rel) ? rel : std::numeric_limits<double>::infinity();
        std::ostringstream where;
        where << p->name << "[" << idx / p->value.cols() << "," << idx % p->value.cols() << "] fd=" << numeric
              << " ad=" << analytic;
        report.worst_entry = where.str();
      }
    }
  }
  report.passed = report.max_relative_error < tolerance;
  return report;
}

}  // namespace hagcn

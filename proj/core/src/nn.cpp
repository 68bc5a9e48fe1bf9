// Copyright (c) 2026 The tlearn Authors.
// Licensed under the Apache License, Version 2.0. See LICENSE for details.
#include "tlearn/nn.hpp"

#include <algorithm>
#include <cmath>

#include "tlearn/errors.hpp"
#include "tlearn/rng.hpp"

namespace tlearn {

namespace {

constexpr double kLogEps = 1e-12;

double apply_scalar(Activation a, double z) {
  switch (a) {
    case Activation::identity: return z;
    case Activation::relu: return z > 0.0 ? z : 0.0;
    case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-z));
    case Activation::tanh_fn: return std::tanh(z);
    case Activation::elu: return z > 0.0 ? z : std::expm1(z);
    case Activation::softmax: break;
  }
  throw ValidationError("softmax has no scalar application");
}

// Derivative conventions: relu'(0) = 0, elu alpha = 1.
double derivative_scalar(Activation a, double z) {
  switch (a) {
    case Activation::identity: return 1.0;
    case Activation::relu: return z > 0.0 ? 1.0 : 0.0;
    case Activation::sigmoid: {
      double s = 1.0 / (1.0 + std::exp(-z));
      return s * (1.0 - s);
    }
    case Activation::tanh_fn: {
      double t = std::tanh(z);
      return 1.0 - t * t;
    }
    case Activation::elu: return z > 0.0 ? 1.0 : std::exp(z);
    case Activation::softmax: break;
  }
  throw ValidationError("softmax derivative is not elementwise");
}

Matrix apply_activation(Activation a, const Matrix& z) {
  Matrix x(z.rows, z.cols);
  if (a == Activation::softmax) {
    for (std::size_t i = 0; i < z.rows; ++i) {
      double mx = z(i, 0);
      for (std::size_t j = 1; j < z.cols; ++j) mx = std::max(mx, z(i, j));
      double sum = 0.0;
      for (std::size_t j = 0; j < z.cols; ++j) {
        double e = std::exp(z(i, j) - mx);
        x(i, j) = e;
        sum += e;
      }
      for (std::size_t j = 0; j < z.cols; ++j) x(i, j) /= sum;
    }
    return x;
  }
  for (std::size_t i = 0; i < z.size(); ++i) x.data[i] = apply_scalar(a, z.data[i]);
  return x;
}

Matrix activation_derivative(Activation a, const Matrix& z) {
  Matrix d(z.rows, z.cols);
  for (std::size_t i = 0; i < z.size(); ++i) d.data[i] = derivative_scalar(a, z.data[i]);
  return d;
}

void check_label_shape(const Matrix& predictions, const Matrix& labels) {
  if (predictions.rows != labels.rows || predictions.cols != labels.cols) {
    throw DimensionError("predictions " + std::to_string(predictions.rows) + "x" +
                         std::to_string(predictions.cols) + " vs labels " +
                         std::to_string(labels.rows) + "x" + std::to_string(labels.cols));
  }
}

void check_one_hot(const Matrix& labels) {
  for (std::size_t i = 0; i < labels.rows; ++i) {
    std::size_t ones = 0;
    for (std::size_t j = 0; j < labels.cols; ++j) {
      double v = labels(i, j);
      if (v == 1.0) {
        ++ones;
      } else if (v != 0.0) {
        throw ValidationError("cross_entropy labels must be one-hot rows (row " +
                              std::to_string(i) + ")");
      }
    }
    if (ones != 1) {
      throw ValidationError("cross_entropy labels must be one-hot rows (row " +
                            std::to_string(i) + ")");
    }
  }
}

// Shared backward kernel. Computes gradients for layers [lowest..L-1], the
// first-layer activation gradient, and optionally the gradient w.r.t. the raw
// model input (only valid when lowest == 0).
struct BackwardResult {
  GradientSet grads;
  Matrix cut_gradient;
};

BackwardResult backward_core(const MLPModel& model, const ForwardTrace& trace,
                             const Matrix& delta_last, std::size_t lowest, bool want_cut) {
  const std::size_t layer_count = model.layer_count();
  if (trace.activations.size() != layer_count || trace.pre_activations.size() != layer_count) {
    throw ValidationError("trace does not match model layer count");
  }
  const Matrix& out = trace.activations.back();
  if (delta_last.rows != out.rows || delta_last.cols != out.cols) {
    throw DimensionError("delta_last " + std::to_string(delta_last.rows) + "x" +
                         std::to_string(delta_last.cols) + " vs model output " +
                         std::to_string(out.rows) + "x" + std::to_string(out.cols));
  }

  BackwardResult result;
  result.grads.weight_grads.resize(layer_count);
  result.grads.bias_grads.resize(layer_count);

  Matrix delta = delta_last;
  for (std::size_t l = layer_count; l-- > lowest;) {
    const DenseLayer& layer = model.layers[l];
    const Matrix& below = l == 0 ? trace.input : trace.activations[l - 1];
    if (below.cols != layer.in_dim()) {
      throw ValidationError("trace activations do not chain with layer " + std::to_string(l));
    }
    result.grads.weight_grads[l] = matmul_at(delta, below);
    result.grads.bias_grads[l] = column_sums(delta);

    const bool need_below_grad = l > lowest || l == 1 || (l == 0 && want_cut);
    if (!need_below_grad) continue;
    Matrix act_grad = matmul(delta, layer.weights);  // dL/dX below this layer
    if (l == 1) result.grads.input_grad = act_grad;
    if (l == 0) {
      result.cut_gradient = std::move(act_grad);
    } else if (l > lowest) {
      delta = hadamard(act_grad, activation_derivative(model.layers[l - 1].activation,
                                                       trace.pre_activations[l - 1]));
    }
  }

  // Single-layer models have no layer above the first-layer activations; the
  // activation gradient degenerates to the delta itself.
  if (layer_count == 1) result.grads.input_grad = delta_last;

  for (std::size_t l = lowest; l < layer_count; ++l) {
    check_finite(result.grads.weight_grads[l], "weight gradient of layer " + std::to_string(l));
  }
  check_finite(result.grads.input_grad, "first-layer activation gradient");
  return result;
}

void write_layer(ByteWriter& w, const DenseLayer& layer) {
  w.u32(static_cast<std::uint32_t>(layer.out_dim()));
  w.u32(static_cast<std::uint32_t>(layer.in_dim()));
  w.u8(static_cast<std::uint8_t>(layer.activation));
  for (double v : layer.weights.data) w.f64(v);
  for (double v : layer.biases) w.f64(v);
}

}  // namespace

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::tanh_fn: return "tanh";
    case Activation::elu: return "elu";
    case Activation::softmax: return "softmax";
  }
  return "unknown";
}

Activation activation_from_name(const std::string& name) {
  if (name == "identity") return Activation::identity;
  if (name == "relu") return Activation::relu;
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "tanh") return Activation::tanh_fn;
  if (name == "elu") return Activation::elu;
  if (name == "softmax") return Activation::softmax;
  throw ValidationError("unknown activation \"" + name + "\"");
}

std::string loss_name(LossKind k) {
  return k == LossKind::cross_entropy ? "cross_entropy" : "mse";
}

LossKind loss_from_name(const std::string& name) {
  if (name == "cross_entropy") return LossKind::cross_entropy;
  if (name == "mse") return LossKind::mse;
  throw ValidationError("unknown loss \"" + name + "\"");
}

void MLPModel::validate() const {
  if (layers.empty()) throw ValidationError("model must have at least one layer");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const DenseLayer& layer = layers[l];
    if (layer.out_dim() == 0 || layer.in_dim() == 0) {
      throw ValidationError("layer " + std::to_string(l) + " has a zero dimension");
    }
    if (layer.biases.size() != layer.out_dim()) {
      throw ValidationError("layer " + std::to_string(l) + " bias length mismatch");
    }
    if (l > 0 && layer.in_dim() != layers[l - 1].out_dim()) {
      throw ValidationError("dimension chain broken between layers " + std::to_string(l - 1) +
                            " and " + std::to_string(l));
    }
    if (layer.activation == Activation::softmax && l + 1 != layers.size()) {
      throw ValidationError("softmax is only permitted on the final layer");
    }
  }
}

std::pair<Matrix, Matrix> dense_forward(const DenseLayer& layer, const Matrix& input) {
  if (input.cols != layer.in_dim()) {
    throw DimensionError("dense_forward: input " + std::to_string(input.rows) + "x" +
                         std::to_string(input.cols) + " vs weights " +
                         std::to_string(layer.out_dim()) + "x" + std::to_string(layer.in_dim()));
  }
  Matrix z = matmul_bt(input, layer.weights);
  add_row_inplace(z, layer.biases);
  Matrix x = apply_activation(layer.activation, z);
  return {std::move(z), std::move(x)};
}

ForwardTrace forward_full(const MLPModel& model, const Matrix& input) {
  model.validate();
  ForwardTrace trace;
  trace.input = input;
  const Matrix* current = &trace.input;
  for (std::size_t l = 0; l < model.layer_count(); ++l) {
    if (current->cols != model.layers[l].in_dim()) {
      throw DimensionError("forward: width " + std::to_string(current->cols) +
                           " does not match layer " + std::to_string(l) + " input width " +
                           std::to_string(model.layers[l].in_dim()));
    }
    auto [z, x] = dense_forward(model.layers[l], *current);
    trace.pre_activations.push_back(std::move(z));
    trace.activations.push_back(std::move(x));
    current = &trace.activations.back();
  }
  check_finite(trace.activations.back(), "forward output");
  return trace;
}

ForwardTrace forward_tail(const MLPModel& model, const Matrix& first_activations) {
  model.validate();
  if (model.layer_count() >= 2 && first_activations.cols != model.layers[1].in_dim()) {
    throw DimensionError("forward_tail: width " + std::to_string(first_activations.cols) +
                         " does not match layer 1 input width " +
                         std::to_string(model.layers[1].in_dim()));
  }
  if (first_activations.cols != model.layers[0].out_dim()) {
    throw DimensionError("forward_tail: width " + std::to_string(first_activations.cols) +
                         " is not the first layer's output width " +
                         std::to_string(model.layers[0].out_dim()));
  }
  ForwardTrace trace;
  trace.pre_activations.emplace_back();  // Z of layer 1 is not available here
  trace.activations.push_back(first_activations);
  const Matrix* current = &trace.activations.back();
  for (std::size_t l = 1; l < model.layer_count(); ++l) {
    auto [z, x] = dense_forward(model.layers[l], *current);
    trace.pre_activations.push_back(std::move(z));
    trace.activations.push_back(std::move(x));
    current = &trace.activations.back();
  }
  return trace;
}

LossDelta loss_and_delta_scaled(const Matrix& predictions, const Matrix& labels, LossKind kind,
                                std::size_t denominator) {
  check_label_shape(predictions, labels);
  if (predictions.rows == 0) throw ValidationError("loss over an empty batch");
  if (denominator == 0) throw ValidationError("zero loss denominator");

  LossDelta out;
  const double inv = 1.0 / static_cast<double>(denominator);
  if (kind == LossKind::cross_entropy) {
    check_one_hot(labels);
    double total = 0.0;
    for (std::size_t i = 0; i < predictions.rows; ++i) {
      for (std::size_t j = 0; j < predictions.cols; ++j) {
        if (labels(i, j) == 1.0) total += -std::log(std::max(predictions(i, j), kLogEps));
      }
    }
    out.loss = total * inv;
    out.delta = scale(sub(predictions, labels), inv);
  } else {
    const double inv_k = inv / static_cast<double>(predictions.cols);
    double total = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
      double d = predictions.data[i] - labels.data[i];
      total += d * d;
    }
    out.loss = total * inv_k;
    out.delta = scale(sub(predictions, labels), 2.0 * inv_k);
  }
  return out;
}

LossDelta loss_and_delta(const Matrix& predictions, const Matrix& labels, LossKind kind) {
  return loss_and_delta_scaled(predictions, labels, kind, predictions.rows);
}

LossDelta last_layer_loss_delta(const MLPModel& model, const ForwardTrace& trace,
                                const Matrix& labels, LossKind kind, std::size_t denominator) {
  const Activation out_act = model.layers.back().activation;
  LossDelta ld = loss_and_delta_scaled(trace.activations.back(), labels, kind, denominator);
  if (kind == LossKind::cross_entropy) {
    if (out_act != Activation::softmax) {
      throw ValidationError("cross_entropy requires a softmax output layer");
    }
    return ld;  // fused form is already dL/dZ
  }
  if (out_act == Activation::softmax) {
    throw ValidationError("mse with a softmax output layer is not supported");
  }
  ld.delta = hadamard(ld.delta, activation_derivative(out_act, trace.pre_activations.back()));
  return ld;
}

GradientSet backward_from_delta(const MLPModel& model, const ForwardTrace& trace,
                                const Matrix& delta_last) {
  return backward_core(model, trace, delta_last, 0, false).grads;
}

std::pair<GradientSet, Matrix> backward_with_cut_gradient(const MLPModel& model,
                                                          const ForwardTrace& trace,
                                                          const Matrix& delta_last) {
  BackwardResult r = backward_core(model, trace, delta_last, 0, true);
  return {std::move(r.grads), std::move(r.cut_gradient)};
}

Matrix delta_through_activation(const MLPModel& model, const ForwardTrace& trace,
                                const Matrix& upstream_grad) {
  const Activation act = model.layers.back().activation;
  if (act == Activation::softmax) {
    throw ValidationError("softmax derivative is not elementwise");
  }
  return hadamard(upstream_grad,
                  activation_derivative(act, trace.pre_activations.back()));
}

GradientSet backward_from_layer2(const MLPModel& model, const ForwardTrace& trace,
                                 const Matrix& delta_last) {
  if (model.layer_count() == 1) {
    GradientSet grads;
    grads.weight_grads.resize(1);
    grads.bias_grads.resize(1);
    grads.input_grad = delta_last;
    return grads;
  }
  return backward_core(model, trace, delta_last, 1, false).grads;
}

MLPModel sgd_step(MLPModel model, const GradientSet& grads, double learning_rate) {
  if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
  if (grads.weight_grads.size() != model.layer_count() ||
      grads.bias_grads.size() != model.layer_count()) {
    throw DimensionError("gradient set does not cover every layer");
  }
  for (std::size_t l = 0; l < model.layer_count(); ++l) {
    DenseLayer& layer = model.layers[l];
    const Matrix& dw = grads.weight_grads[l];
    const auto& db = grads.bias_grads[l];
    if (dw.rows != layer.out_dim() || dw.cols != layer.in_dim() || db.size() != layer.out_dim()) {
      throw DimensionError("gradient shapes do not mirror layer " + std::to_string(l));
    }
    for (std::size_t i = 0; i < dw.size(); ++i) layer.weights.data[i] -= learning_rate * dw.data[i];
    for (std::size_t i = 0; i < db.size(); ++i) layer.biases[i] -= learning_rate * db[i];
  }
  return model;
}

GradientSet finite_diff_grad(const MLPModel& model, const Matrix& input, const Matrix& labels,
                             LossKind kind, double eps) {
  if (!(eps > 0.0)) throw ValidationError("eps must be positive");

  MLPModel probe = model;
  auto loss_at = [&]() {
    ForwardTrace t = forward_full(probe, input);
    return loss_and_delta(t.activations.back(), labels, kind).loss;
  };

  GradientSet grads;
  grads.weight_grads.reserve(model.layer_count());
  grads.bias_grads.reserve(model.layer_count());
  for (std::size_t l = 0; l < model.layer_count(); ++l) {
    DenseLayer& layer = probe.layers[l];
    Matrix dw(layer.out_dim(), layer.in_dim());
    for (std::size_t i = 0; i < dw.size(); ++i) {
      const double saved = layer.weights.data[i];
      layer.weights.data[i] = saved + eps;
      const double up = loss_at();
      layer.weights.data[i] = saved - eps;
      const double down = loss_at();
      layer.weights.data[i] = saved;
      dw.data[i] = (up - down) / (2.0 * eps);
    }
    std::vector<double> db(layer.out_dim());
    for (std::size_t i = 0; i < db.size(); ++i) {
      const double saved = layer.biases[i];
      layer.biases[i] = saved + eps;
      const double up = loss_at();
      layer.biases[i] = saved - eps;
      const double down = loss_at();
      layer.biases[i] = saved;
      db[i] = (up - down) / (2.0 * eps);
    }
    grads.weight_grads.push_back(std::move(dw));
    grads.bias_grads.push_back(std::move(db));
  }

  // First-layer activation gradient by perturbing X^(1) and replaying the
  // remaining layers, mirroring the orchestrator's recalculation path.
  ForwardTrace base = forward_full(model, input);
  Matrix x1 = base.activations.front();
  auto tail_loss = [&]() {
    ForwardTrace t = forward_tail(model, x1);
    return loss_and_delta(t.activations.back(), labels, kind).loss;
  };
  grads.input_grad = Matrix(x1.rows, x1.cols);
  for (std::size_t i = 0; i < x1.size(); ++i) {
    const double saved = x1.data[i];
    x1.data[i] = saved + eps;
    const double up = tail_loss();
    x1.data[i] = saved - eps;
    const double down = tail_loss();
    x1.data[i] = saved;
    grads.input_grad.data[i] = (up - down) / (2.0 * eps);
  }
  return grads;
}

MLPModel init_model(std::span<const LayerSpec> spec, std::uint64_t seed) {
  if (spec.empty()) throw ValidationError("layer spec must not be empty");
  for (std::size_t l = 1; l < spec.size(); ++l) {
    if (spec[l].in_dim != spec[l - 1].out_dim) {
      throw ValidationError("dimension chain broken between layers " + std::to_string(l - 1) +
                            " and " + std::to_string(l));
    }
  }
  Rng rng(seed);
  MLPModel model;
  for (const LayerSpec& ls : spec) {
    if (ls.in_dim == 0 || ls.out_dim == 0) throw ValidationError("layer dims must be positive");
    DenseLayer layer;
    layer.activation = ls.activation;
    layer.weights = Matrix(ls.out_dim, ls.in_dim);
    const double bound = 1.0 / std::sqrt(static_cast<double>(ls.in_dim));
    for (double& w : layer.weights.data) w = rng.uniform(-1.0, 1.0) * bound;
    // Biases from the same scaled uniform. Zero biases would park dead-relu
    // rows exactly on the activation kink, where finite differences and the
    // fixed relu'(0) = 0 convention legitimately disagree.
    layer.biases.resize(ls.out_dim);
    for (double& b : layer.biases) b = rng.uniform(-1.0, 1.0) * bound;
    model.layers.push_back(std::move(layer));
  }
  model.validate();
  return model;
}

Matrix one_hot(std::span<const std::uint32_t> labels, std::size_t class_count) {
  Matrix m(labels.size(), class_count);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= class_count) {
      throw ValidationError("label " + std::to_string(labels[i]) + " out of range " +
                            std::to_string(class_count));
    }
    m(i, labels[i]) = 1.0;
  }
  return m;
}

std::vector<std::uint32_t> argmax_rows(const Matrix& outputs) {
  std::vector<std::uint32_t> ids(outputs.rows);
  for (std::size_t i = 0; i < outputs.rows; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < outputs.cols; ++j) {
      if (outputs(i, j) > outputs(i, best)) best = j;
    }
    ids[i] = static_cast<std::uint32_t>(best);
  }
  return ids;
}

std::vector<std::uint8_t> serialize_model(const MLPModel& model) {
  ByteWriter w;
  w.magic("TLMD");
  w.u32(static_cast<std::uint32_t>(model.layer_count()));
  for (const DenseLayer& layer : model.layers) write_layer(w, layer);
  return w.take();
}

MLPModel deserialize_model(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.expect_magic("TLMD");
  const std::uint32_t layer_count = r.u32();
  if (layer_count == 0) throw FormatError("model with zero layers");
  MLPModel model;
  for (std::uint32_t l = 0; l < layer_count; ++l) {
    const std::uint32_t out_dim = r.u32();
    const std::uint32_t in_dim = r.u32();
    const std::uint8_t tag = r.u8();
    if (tag > static_cast<std::uint8_t>(Activation::softmax)) {
      throw FormatError("unknown activation tag " + std::to_string(tag));
    }
    const std::uint64_t param_count =
        static_cast<std::uint64_t>(out_dim) * in_dim + out_dim;
    if (param_count * 8 > r.remaining()) throw FormatError("truncated model payload");
    DenseLayer layer;
    layer.activation = static_cast<Activation>(tag);
    layer.weights = Matrix(out_dim, in_dim);
    for (double& v : layer.weights.data) v = r.f64();
    layer.biases.resize(out_dim);
    for (double& v : layer.biases) v = r.f64();
    model.layers.push_back(std::move(layer));
  }
  r.expect_done();
  try {
    model.validate();
  } catch (const ValidationError& e) {
    throw FormatError(std::string("invalid model: ") + e.what());
  }
  return model;
}

std::uint64_t model_param_hash(const MLPModel& model) {
  auto bytes = serialize_model(model);
  return fnv1a_hash(bytes);
}

double model_max_abs_diff(const MLPModel& a, const MLPModel& b) {
  if (a.layer_count() != b.layer_count()) throw DimensionError("layer counts differ");
  double mx = 0.0;
  for (std::size_t l = 0; l < a.layer_count(); ++l) {
    mx = std::max(mx, max_abs_diff(a.layers[l].weights, b.layers[l].weights));
    if (a.layers[l].biases.size() != b.layers[l].biases.size()) {
      throw DimensionError("bias lengths differ at layer " + std::to_string(l));
    }
    for (std::size_t i = 0; i < a.layers[l].biases.size(); ++i) {
      mx = std::max(mx, std::abs(a.layers[l].biases[i] - b.layers[l].biases[i]));
    }
  }
  return mx;
}

void write_matrix(ByteWriter& w, const Matrix& m) {
  w.u32(static_cast<std::uint32_t>(m.rows));
  w.u32(static_cast<std::uint32_t>(m.cols));
  for (double v : m.data) w.f64(v);
}

Matrix read_matrix(ByteReader& r) {
  const std::uint32_t rows = r.u32();
  const std::uint32_t cols = r.u32();
  const std::uint64_t count = static_cast<std::uint64_t>(rows) * cols;
  if (count * 8 > r.remaining()) throw FormatError("truncated matrix payload");
  Matrix m(rows, cols);
  for (double& v : m.data) v = r.f64();
  return m;
}

}  // namespace tlearn

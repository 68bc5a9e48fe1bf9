// Copyright (c) 2026 The tlearn Authors.
// Licensed under the Apache License, Version 2.0. See LICENSE for details.
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tlearn/matrix.hpp"
#include "tlearn/serialize.hpp"

namespace tlearn {

enum class Activation : std::uint8_t {
  identity = 0,
  relu = 1,
  sigmoid = 2,
  tanh_fn = 3,
  elu = 4,
  softmax = 5,
};

enum class LossKind : std::uint8_t {
  cross_entropy = 0,
  mse = 1,
};

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& name);
std::string loss_name(LossKind k);
LossKind loss_from_name(const std::string& name);

struct LayerSpec {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  Activation activation = Activation::identity;
};

struct DenseLayer {
  Matrix weights;               // out_dim x in_dim
  std::vector<double> biases;   // out_dim
  Activation activation = Activation::identity;

  std::size_t in_dim() const { return weights.cols; }
  std::size_t out_dim() const { return weights.rows; }
};

struct MLPModel {
  std::vector<DenseLayer> layers;

  std::size_t layer_count() const { return layers.size(); }
  std::size_t input_dim() const { return layers.front().in_dim(); }
  std::size_t output_dim() const { return layers.back().out_dim(); }

  /// Throws on broken dimension chains, empty layers, or a non-final softmax.
  void validate() const;
};

struct ForwardTrace {
  Matrix input;
  std::vector<Matrix> pre_activations;  // Z per layer
  std::vector<Matrix> activations;      // X per layer
};

struct GradientSet {
  std::vector<Matrix> weight_grads;
  std::vector<std::vector<double>> bias_grads;
  Matrix input_grad;  // gradient w.r.t. the first layer's activation output
};

struct LossDelta {
  double loss = 0.0;
  Matrix delta;
};

/// Z = input * W^T + b (per row), X = f(Z). Softmax applied row-wise.
std::pair<Matrix, Matrix> dense_forward(const DenseLayer& layer, const Matrix& input);

ForwardTrace forward_full(const MLPModel& model, const Matrix& input);

/// Continues a forward pass from the first layer's activations: the returned
/// trace holds the given matrix at index 0 (with an empty pre-activation
/// slot) and freshly computed Z/X for layers 2..L.
ForwardTrace forward_tail(const MLPModel& model, const Matrix& first_activations);

/// Batch-mean loss and the matching delta. For softmax + cross-entropy the
/// delta is the fused (predictions - labels) / B, i.e. dL/dZ of the final
/// layer. For mse the delta is 2(pred - label) / (B*k), which is dL/dY; use
/// last_layer_loss_delta when the output activation is not the identity.
LossDelta loss_and_delta(const Matrix& predictions, const Matrix& labels, LossKind kind);

/// Same, but with an explicit denominator in place of predictions.rows. Nodes
/// use this to scale per-sample terms by the full virtual-batch size.
LossDelta loss_and_delta_scaled(const Matrix& predictions, const Matrix& labels, LossKind kind,
                                std::size_t denominator);

/// dL/dZ of the final layer for a completed trace, valid for any elementwise
/// output activation (mse) or softmax (cross-entropy, fused form).
LossDelta last_layer_loss_delta(const MLPModel& model, const ForwardTrace& trace,
                                const Matrix& labels, LossKind kind, std::size_t denominator);

/// Full backward pass seeded with delta_last = dL/dZ of the final layer.
GradientSet backward_from_delta(const MLPModel& model, const ForwardTrace& trace,
                                const Matrix& delta_last);

/// Backward pass that also returns dL/d(input) of the whole model, the
/// gradient flowing out below the first layer. Split-learning trainers use
/// the second element as the cut gradient.
std::pair<GradientSet, Matrix> backward_with_cut_gradient(const MLPModel& model,
                                                          const ForwardTrace& trace,
                                                          const Matrix& delta_last);

/// Backward over layers L..2 only: weight/bias gradients for the first layer
/// are left empty and trace.input is never touched. This is the orchestrator
/// path, which has first-layer activations but no raw inputs.
GradientSet backward_from_layer2(const MLPModel& model, const ForwardTrace& trace,
                                 const Matrix& delta_last);

/// upstream ⊙ f'(Z_last): turns dL/dX of a model's output into its last-layer
/// dL/dZ. The output activation must be elementwise (not softmax).
Matrix delta_through_activation(const MLPModel& model, const ForwardTrace& trace,
                                const Matrix& upstream_grad);

/// W <- W - lr * dW, b <- b - lr * db.
MLPModel sgd_step(MLPModel model, const GradientSet& grads, double learning_rate);

/// Central finite differences (L(p+eps) - L(p-eps)) / (2 eps) per parameter,
/// plus the same estimate for the first-layer activation gradient. Test
/// oracle; independent of the analytic backward path.
GradientSet finite_diff_grad(const MLPModel& model, const Matrix& input, const Matrix& labels,
                             LossKind kind, double eps);

/// Seeded uniform init scaled by 1/sqrt(in_dim) for weights and biases. Same
/// seed gives a bit-identical model.
MLPModel init_model(std::span<const LayerSpec> spec, std::uint64_t seed);

Matrix one_hot(std::span<const std::uint32_t> labels, std::size_t class_count);

/// Row-wise argmax (predicted class ids).
std::vector<std::uint32_t> argmax_rows(const Matrix& outputs);

// TLMD flat binary model format: magic "TLMD", u32 layer count, then per
// layer u32 out_dim, u32 in_dim, u8 activation tag, weights row-major f64 LE,
// biases f64 LE. Used for orchestrator->node redistribution and checkpoints.
std::vector<std::uint8_t> serialize_model(const MLPModel& model);
MLPModel deserialize_model(std::span<const std::uint8_t> bytes);

/// 64-bit FNV-1a over the canonical TLMD bytes.
std::uint64_t model_param_hash(const MLPModel& model);

/// Max absolute elementwise difference over all parameters.
double model_max_abs_diff(const MLPModel& a, const MLPModel& b);

// Matrix wire layout shared by TLNR reports: u32 rows, u32 cols, f64 LE
// row-major data.
void write_matrix(ByteWriter& w, const Matrix& m);
Matrix read_matrix(ByteReader& r);

}  // namespace tlearn

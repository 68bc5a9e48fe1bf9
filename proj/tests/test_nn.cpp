// Copyright (c) 2026 The tlearn Authors.
// Licensed under the Apache License, Version 2.0. See LICENSE for details.
#include <cmath>

#include <doctest.h>

#include "tlearn/errors.hpp"
#include "tlearn/nn.hpp"
#include "test_support.hpp"

using namespace tlearn;

namespace {

DenseLayer make_layer(Matrix weights, std::vector<double> biases, Activation act) {
  return DenseLayer{std::move(weights), std::move(biases), act};
}

MLPModel single_layer_model(Matrix weights, std::vector<double> biases, Activation act) {
  MLPModel m;
  m.layers.push_back(make_layer(std::move(weights), std::move(biases), act));
  return m;
}

}  // namespace

TEST_CASE("dense_forward identity case") {
  const DenseLayer layer =
      make_layer(Matrix::from_rows({{1.0, 0.0}, {0.0, 1.0}}), {0.0, 0.0}, Activation::relu);
  const auto [z, x] = dense_forward(layer, Matrix::from_rows({{3.0, 5.0}}));
  CHECK(z == Matrix::from_rows({{3.0, 5.0}}));
  CHECK(x == Matrix::from_rows({{3.0, 5.0}}));
}

TEST_CASE("dense_forward bias only, relu clamps negatives") {
  const DenseLayer layer =
      make_layer(Matrix::from_rows({{1.0, 1.0}, {1.0, 1.0}}), {1.0, -1.0}, Activation::relu);
  const auto [z, x] = dense_forward(layer, Matrix::from_rows({{0.0, 0.0}}));
  CHECK(z == Matrix::from_rows({{1.0, -1.0}}));
  CHECK(x == Matrix::from_rows({{1.0, 0.0}}));
}

TEST_CASE("dense_forward matches the scalar-loop reference on seeded input") {
  Rng rng(7);
  const Matrix weights = test::random_matrix(rng, 4, 3);
  const Matrix input = test::random_matrix(rng, 2, 3);
  const DenseLayer layer = make_layer(weights, {0.1, -0.2, 0.3, 0.4}, Activation::identity);

  Matrix want = test::reference_matmul_bt(input, weights);
  for (std::size_t i = 0; i < want.rows; ++i)
    for (std::size_t j = 0; j < want.cols; ++j) want(i, j) += layer.biases[j];

  const auto [z, x] = dense_forward(layer, input);
  CHECK(z == want);
  CHECK(x == want);
}

TEST_CASE("dense_forward shape mismatch names both shapes") {
  const DenseLayer layer = make_layer(Matrix(4, 3), {0, 0, 0, 0}, Activation::relu);
  CHECK_THROWS_WITH_AS(dense_forward(layer, Matrix(2, 5)), doctest::Contains("4x3"),
                       DimensionError);
}

TEST_CASE("forward_full single identity layer returns the input") {
  const MLPModel m =
      single_layer_model(Matrix::from_rows({{1.0, 0.0}, {0.0, 1.0}}), {0.0, 0.0},
                         Activation::identity);
  const Matrix input = Matrix::from_rows({{1.5, -2.5}, {0.0, 4.0}});
  const ForwardTrace trace = forward_full(m, input);
  CHECK(trace.activations[0] == input);
}

TEST_CASE("forward_full zero weights and softmax gives uniform rows") {
  MLPModel m;
  m.layers.push_back(make_layer(Matrix(4, 2), {0, 0, 0, 0}, Activation::relu));
  m.layers.push_back(make_layer(Matrix(3, 4), {0, 0, 0}, Activation::softmax));
  const ForwardTrace trace = forward_full(m, Matrix::from_rows({{1.0, 2.0}, {-1.0, 0.5}}));
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(trace.activations.back()(i, j) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("forward_full equals composing dense_forward") {
  const LayerSpec spec[] = {{3, 5, Activation::tanh_fn},
                            {5, 4, Activation::elu},
                            {4, 2, Activation::softmax}};
  const MLPModel m = init_model(spec, 99);
  Rng rng(100);
  const Matrix input = test::random_matrix(rng, 4, 3);

  const ForwardTrace trace = forward_full(m, input);
  Matrix current = input;
  for (std::size_t l = 0; l < m.layer_count(); ++l) {
    const auto [z, x] = dense_forward(m.layers[l], current);
    CHECK(trace.pre_activations[l] == z);
    CHECK(trace.activations[l] == x);
    current = x;
  }
}

TEST_CASE("forward_full names the offending layer on width mismatch") {
  const LayerSpec spec[] = {{3, 5, Activation::relu}, {5, 2, Activation::identity}};
  const MLPModel m = init_model(spec, 1);
  CHECK_THROWS_WITH_AS(forward_full(m, Matrix(2, 4)), doctest::Contains("layer 0"),
                       DimensionError);
}

TEST_CASE("softmax rows sum to one within 1e-12") {
  const LayerSpec spec[] = {{6, 9, Activation::relu}, {9, 7, Activation::softmax}};
  const MLPModel m = init_model(spec, 3);
  Rng rng(4);
  const ForwardTrace trace = forward_full(m, test::random_matrix(rng, 8, 6, 3.0));
  for (std::size_t i = 0; i < 8; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < 7; ++j) sum += trace.activations.back()(i, j);
    CHECK(std::abs(sum - 1.0) <= 1e-12);
  }
}

TEST_CASE("forward determinism is bit-exact") {
  const LayerSpec spec[] = {{4, 8, Activation::sigmoid}, {8, 3, Activation::softmax}};
  const MLPModel m = init_model(spec, 77);
  Rng rng(78);
  const Matrix input = test::random_matrix(rng, 5, 4);
  const ForwardTrace a = forward_full(m, input);
  const ForwardTrace b = forward_full(m, input);
  for (std::size_t l = 0; l < m.layer_count(); ++l) {
    CHECK(a.pre_activations[l] == b.pre_activations[l]);
    CHECK(a.activations[l] == b.activations[l]);
  }
}

TEST_CASE("loss_and_delta perfect one-hot prediction") {
  const Matrix p = Matrix::from_rows({{1.0, 0.0}, {0.0, 1.0}});
  const LossDelta ld = loss_and_delta(p, p, LossKind::cross_entropy);
  CHECK(ld.loss == 0.0);
  CHECK(max_abs(ld.delta) == 0.0);
}

TEST_CASE("loss_and_delta mse convention") {
  const LossDelta ld = loss_and_delta(Matrix::from_rows({{1.0, 1.0}}),
                                      Matrix::from_rows({{0.0, 0.0}}), LossKind::mse);
  CHECK(ld.loss == doctest::Approx(1.0));
  CHECK(ld.delta == Matrix::from_rows({{1.0, 1.0}}));  // 2(y_hat - y) / (B*k)
}

TEST_CASE("loss_and_delta uniform softmax cross-entropy") {
  const LossDelta ld = loss_and_delta(Matrix::from_rows({{0.5, 0.5}}),
                                      Matrix::from_rows({{1.0, 0.0}}), LossKind::cross_entropy);
  CHECK(ld.loss == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(ld.delta == Matrix::from_rows({{-0.5, 0.5}}));
}

TEST_CASE("loss_and_delta rejects non-one-hot labels") {
  CHECK_THROWS_AS(loss_and_delta(Matrix::from_rows({{0.5, 0.5}}),
                                 Matrix::from_rows({{0.5, 0.5}}), LossKind::cross_entropy),
                  ValidationError);
  CHECK_THROWS_AS(loss_and_delta(Matrix::from_rows({{0.5, 0.5}}),
                                 Matrix::from_rows({{1.0, 1.0}}), LossKind::cross_entropy),
                  ValidationError);
}

TEST_CASE("loss_and_delta clamps zero-probability true classes") {
  const LossDelta ld = loss_and_delta(Matrix::from_rows({{0.0, 1.0}}),
                                      Matrix::from_rows({{1.0, 0.0}}), LossKind::cross_entropy);
  CHECK(ld.loss == doctest::Approx(-std::log(1e-12)));
  CHECK(std::isfinite(ld.loss));
}

TEST_CASE("backward with zero delta yields zero gradients") {
  const LayerSpec spec[] = {{3, 4, Activation::relu}, {4, 2, Activation::softmax}};
  const MLPModel m = init_model(spec, 5);
  Rng rng(6);
  const Matrix input = test::random_matrix(rng, 3, 3);
  const ForwardTrace trace = forward_full(m, input);
  const GradientSet grads = backward_from_delta(m, trace, Matrix(3, 2));
  for (const Matrix& g : grads.weight_grads) CHECK(max_abs(g) == 0.0);
  CHECK(max_abs(grads.input_grad) == 0.0);
}

TEST_CASE("single linear layer weight gradient is the outer product") {
  const MLPModel m = single_layer_model(Matrix(2, 3), {0.0, 0.0}, Activation::identity);
  const Matrix input = Matrix::from_rows({{1.0, 2.0, 3.0}});
  const Matrix delta = Matrix::from_rows({{0.5, -1.0}});
  const ForwardTrace trace = forward_full(m, input);
  const GradientSet grads = backward_from_delta(m, trace, delta);
  CHECK(grads.weight_grads[0] ==
        Matrix::from_rows({{0.5, 1.0, 1.5}, {-1.0, -2.0, -3.0}}));
  CHECK(grads.bias_grads[0] == std::vector<double>{0.5, -1.0});
}

TEST_CASE("analytic gradients match central finite differences") {
  // Seeded 3-layer relu network, 5 samples, eps 1e-6, rel err <= 1e-5.
  const LayerSpec spec[] = {{4, 8, Activation::relu},
                            {8, 6, Activation::relu},
                            {6, 3, Activation::softmax}};
  const MLPModel m = init_model(spec, 21);
  Rng rng(22);
  const Matrix input = test::random_matrix(rng, 5, 4);
  const Matrix labels = test::one_hot_rows(rng, 5, 3);

  const ForwardTrace trace = forward_full(m, input);
  const LossDelta ld = last_layer_loss_delta(m, trace, labels, LossKind::cross_entropy, 5);
  const GradientSet analytic = backward_from_delta(m, trace, ld.delta);
  const GradientSet numeric = finite_diff_grad(m, input, labels, LossKind::cross_entropy, 1e-6);

  CHECK(test::max_grad_rel_err(analytic, numeric) <= 1e-5);
  // The first-layer activation gradient is FD-checked too.
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.input_grad.size(); ++i) {
    worst = std::max(worst,
                     test::rel_err(analytic.input_grad.data[i], numeric.input_grad.data[i]));
  }
  CHECK(worst <= 1e-5);
}

TEST_CASE("gradient correctness across every activation and both losses") {
  // Module invariant: <=4 layers, widths <=16, batch <=8.
  const Activation hiddens[] = {Activation::relu, Activation::sigmoid, Activation::tanh_fn,
                                Activation::elu};
  std::uint64_t seed = 500;
  for (Activation hidden : hiddens) {
    for (LossKind loss : {LossKind::cross_entropy, LossKind::mse}) {
      const Activation final_act =
          loss == LossKind::cross_entropy ? Activation::softmax : Activation::tanh_fn;
      Rng rng(seed++);
      const std::size_t in_dim = 1 + rng.next_index(8);
      const std::size_t classes = 2 + rng.next_index(3);
      const auto spec = test::random_layer_spec(rng, in_dim, classes, hidden, final_act);
      const MLPModel m = init_model(spec, seed);
      const std::size_t batch = 1 + rng.next_index(8);
      const Matrix input = test::random_matrix(rng, batch, in_dim);
      const Matrix labels = test::one_hot_rows(rng, batch, classes);

      const ForwardTrace trace = forward_full(m, input);
      const LossDelta ld = last_layer_loss_delta(m, trace, labels, loss, batch);
      const GradientSet analytic = backward_from_delta(m, trace, ld.delta);
      const GradientSet numeric = finite_diff_grad(m, input, labels, loss, 1e-6);
      CHECK(test::max_grad_rel_err(analytic, numeric) <= 1e-5);
    }
  }
}

TEST_CASE("finite differences match the closed form for a linear mse model") {
  // L = (1/k) sum (w x + b - y)^2 for one sample: dL/dw_ij = 2 (z_i - y_i) x_j / k.
  const Matrix w = Matrix::from_rows({{0.5, -1.0}, {2.0, 0.25}});
  const MLPModel m = single_layer_model(w, {0.1, -0.3}, Activation::identity);
  const Matrix x = Matrix::from_rows({{1.5, -2.0}});
  const Matrix y = Matrix::from_rows({{1.0, 0.0}});

  const GradientSet numeric = finite_diff_grad(m, x, y, LossKind::mse, 1e-6);
  const ForwardTrace trace = forward_full(m, x);
  for (std::size_t i = 0; i < 2; ++i) {
    const double z = trace.activations[0](0, i);
    for (std::size_t j = 0; j < 2; ++j) {
      const double want = 2.0 * (z - y(0, i)) * x(0, j) / 2.0;
      CHECK(test::rel_err(numeric.weight_grads[0](i, j), want) <= 1e-8);
    }
    CHECK(test::rel_err(numeric.bias_grads[0][i], 2.0 * (z - y(0, i)) / 2.0) <= 1e-8);
  }
}

TEST_CASE("dead relu units have zero finite-difference gradients") {
  // Strongly negative biases saturate the unit to 0 for this input.
  MLPModel m;
  m.layers.push_back(make_layer(Matrix::from_rows({{0.1, 0.1}}), {-100.0}, Activation::relu));
  m.layers.push_back(make_layer(Matrix::from_rows({{1.0}, {-1.0}}), {0.0, 0.0},
                                Activation::softmax));
  const Matrix x = Matrix::from_rows({{1.0, 1.0}});
  const Matrix y = Matrix::from_rows({{1.0, 0.0}});
  const GradientSet numeric = finite_diff_grad(m, x, y, LossKind::cross_entropy, 1e-6);
  CHECK(max_abs(numeric.weight_grads[0]) == 0.0);
}

TEST_CASE("finite_diff_grad validates eps") {
  const LayerSpec spec[] = {{2, 2, Activation::identity}};
  const MLPModel m = init_model(spec, 1);
  CHECK_THROWS_AS(finite_diff_grad(m, Matrix(1, 2), Matrix(1, 2), LossKind::mse, 0.0),
                  ValidationError);
}

TEST_CASE("sgd_step basics") {
  const MLPModel m = single_layer_model(Matrix::from_rows({{1.0}}), {0.0}, Activation::identity);

  GradientSet zero;
  zero.weight_grads.push_back(Matrix(1, 1));
  zero.bias_grads.push_back({0.0});
  const MLPModel same = sgd_step(m, zero, 0.5);
  CHECK(serialize_model(same) == serialize_model(m));

  GradientSet g;
  g.weight_grads.push_back(Matrix::from_rows({{0.25}}));
  g.bias_grads.push_back({0.0});
  const MLPModel stepped = sgd_step(m, g, 1.0);
  CHECK(stepped.layers[0].weights(0, 0) == 0.75);

  CHECK_THROWS_AS(sgd_step(m, g, 0.0), ValidationError);
  CHECK_THROWS_AS(sgd_step(m, g, -1.0), ValidationError);
}

TEST_CASE("sgd linearity is bit-exact on dyadic values") {
  // Dyadic weights and gradients keep every intermediate sum exact, so the
  // two-step and one-step updates agree bitwise.
  Rng rng(31);
  MLPModel m = single_layer_model(Matrix(3, 3), {0.0, 0.0, 0.0}, Activation::identity);
  auto dyadic = [&rng] { return static_cast<double>(rng.next_index(4096)) * 0x1.0p-10; };
  for (double& v : m.layers[0].weights.data) v = dyadic();

  GradientSet g1, g2, sum;
  for (GradientSet* g : {&g1, &g2, &sum}) {
    g->weight_grads.push_back(Matrix(3, 3));
    g->bias_grads.push_back(std::vector<double>(3, 0.0));
  }
  for (std::size_t i = 0; i < 9; ++i) {
    g1.weight_grads[0].data[i] = dyadic();
    g2.weight_grads[0].data[i] = dyadic();
    sum.weight_grads[0].data[i] = g1.weight_grads[0].data[i] + g2.weight_grads[0].data[i];
  }

  const MLPModel two_steps = sgd_step(sgd_step(m, g1, 0.5), g2, 0.5);
  const MLPModel one_step = sgd_step(m, sum, 0.5);
  CHECK(serialize_model(two_steps) == serialize_model(one_step));
}

TEST_CASE("init_model determinism and shapes") {
  const LayerSpec spec[] = {{2, 3, Activation::relu}, {3, 2, Activation::softmax}};
  const MLPModel a = init_model(spec, 123);
  const MLPModel b = init_model(spec, 123);
  CHECK(serialize_model(a) == serialize_model(b));

  const MLPModel c = init_model(spec, 124);
  CHECK(serialize_model(a) != serialize_model(c));

  CHECK(a.layers[0].weights.rows == 3);
  CHECK(a.layers[0].weights.cols == 2);
  CHECK(a.layers[1].weights.rows == 2);
  CHECK(a.layers[1].weights.cols == 3);
}

TEST_CASE("init_model rejects a broken dimension chain") {
  const LayerSpec spec[] = {{2, 3, Activation::relu}, {4, 2, Activation::softmax}};
  CHECK_THROWS_AS(init_model(spec, 1), ValidationError);
}

TEST_CASE("softmax is only allowed on the final layer") {
  const LayerSpec spec[] = {{2, 3, Activation::softmax}, {3, 2, Activation::identity}};
  CHECK_THROWS_AS(init_model(spec, 1), ValidationError);
}

TEST_CASE("mse with softmax output is rejected") {
  const LayerSpec spec[] = {{2, 2, Activation::softmax}};
  const MLPModel m = init_model(spec, 1);
  const ForwardTrace trace = forward_full(m, Matrix(1, 2));
  CHECK_THROWS_AS(last_layer_loss_delta(m, trace, Matrix::from_rows({{1.0, 0.0}}),
                                        LossKind::mse, 1),
                  ValidationError);
  CHECK_THROWS_AS(delta_through_activation(m, trace, Matrix(1, 2)), ValidationError);
}

TEST_CASE("model serialization round-trips and hashes canonically") {
  const LayerSpec spec[] = {{3, 5, Activation::elu}, {5, 2, Activation::softmax}};
  const MLPModel m = init_model(spec, 9);
  const auto bytes = serialize_model(m);
  const MLPModel back = deserialize_model(bytes);
  CHECK(serialize_model(back) == bytes);
  CHECK(model_param_hash(back) == model_param_hash(m));
  CHECK(model_max_abs_diff(m, back) == 0.0);
}

TEST_CASE("model deserialization rejects malformed input") {
  const LayerSpec spec[] = {{2, 2, Activation::relu}};
  auto bytes = serialize_model(init_model(spec, 2));

  auto truncated = bytes;
  truncated.pop_back();
  CHECK_THROWS_AS(deserialize_model(truncated), FormatError);

  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(deserialize_model(bad_magic), FormatError);

  auto trailing = bytes;
  trailing.push_back(0);
  CHECK_THROWS_AS(deserialize_model(trailing), FormatError);
}

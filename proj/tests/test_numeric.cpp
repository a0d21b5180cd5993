#include <cmath>
#include <vector>

#include "doctest.h"
#include "isqn/errors.hpp"
#include "isqn/mlp.hpp"
#include "isqn/optim.hpp"
#include "isqn/rng.hpp"
#include "isqn/tape.hpp"
#include "test_util.hpp"

using namespace isqn;
using isqn::testing::finite_difference;
using isqn::testing::max_relative_error;
using isqn::testing::random_matrix;

namespace {

struct TwoLayer {
  ParamSet params;
  std::vector<DenseLayer> layers;
};

// 2 → 2 (ReLU) → 1 with hand-picked weights.
TwoLayer hand_set_net(bool layernorm) {
  TwoLayer net;
  Rng rng(1);
  net.layers.push_back(make_dense_layer(net.params, "L0", 2, 2, true, layernorm, rng));
  net.layers.push_back(make_dense_layer(net.params, "L1", 2, 1, false, false, rng));
  net.params[net.layers[0].weight] = Matrix::from_rows({{1.0, -1.0}, {0.5, 2.0}});
  net.params[net.layers[0].bias] = Matrix::from_rows({{0.1, -0.2}});
  net.params[net.layers[1].weight] = Matrix::from_rows({{2.0}, {-1.0}});
  net.params[net.layers[1].bias] = Matrix::from_rows({{0.3}});
  return net;
}

TwoLayer random_net(Rng& rng, std::size_t in, std::size_t hidden, std::size_t out, bool ln) {
  TwoLayer net;
  net.layers.push_back(make_dense_layer(net.params, "L0", in, hidden, true, ln, rng));
  net.layers.push_back(make_dense_layer(net.params, "L1", hidden, hidden, true, ln, rng));
  net.layers.push_back(make_dense_layer(net.params, "L2", hidden, out, false, false, rng));
  if (ln) {
    // move LayerNorm affine parameters off their identity start
    for (const auto& l : net.layers)
      if (l.ln_gain) {
        net.params[*l.ln_gain] = random_matrix(1, hidden, rng, 0.5, 1.5);
        net.params[*l.ln_bias] = random_matrix(1, hidden, rng, -0.5, 0.5);
      }
  }
  return net;
}

}  // namespace

TEST_CASE("matrix rejects non-finite data and bad lengths") {
  CHECK_THROWS_AS(Matrix(1, 2, std::vector<double>{1.0, NAN}), NumericError);
  CHECK_THROWS_AS(Matrix(2, 2, std::vector<double>{1.0}), ConfigError);
  CHECK_THROWS_AS(matmul(Matrix(2, 3), Matrix(2, 3)), ConfigError);
}

TEST_CASE("forward_mlp: zero weights give zero output") {
  ParamSet params;
  Rng rng(3);
  std::vector<DenseLayer> layers{make_dense_layer(params, "L0", 3, 4, true, false, rng),
                                 make_dense_layer(params, "L1", 4, 2, false, false, rng)};
  for (std::size_t i = 0; i < params.size(); ++i) params[i].fill(0.0);
  const auto fwd = forward_mlp(params, layers, Matrix::from_rows({{0.3, -2.0, 5.0}}), false);
  CHECK(fwd.value() == Matrix(1, 2));
}

TEST_CASE("forward_mlp: identity weight with ReLU clips negatives") {
  ParamSet params;
  Rng rng(3);
  std::vector<DenseLayer> layers{make_dense_layer(params, "L0", 2, 2, true, false, rng)};
  params[layers[0].weight] = Matrix::from_rows({{1.0, 0.0}, {0.0, 1.0}});
  params[layers[0].bias].fill(0.0);
  const auto fwd = forward_mlp(params, layers, Matrix::from_rows({{-1.0, 2.0}}), false);
  CHECK(fwd.value() == Matrix::from_rows({{0.0, 2.0}}));
  REQUIRE(fwd.activations.size() == 1);
  CHECK(fwd.activations[0] == Matrix::from_rows({{0.0, 2.0}}));
}

TEST_CASE("forward_mlp: hand-set two-layer net matches hand computation") {
  const Matrix input = Matrix::from_rows({{1.0, 1.0}});
  {
    // h = relu([1.6, 0.8]); y = 2·1.6 − 0.8 + 0.3
    auto net = hand_set_net(false);
    const auto fwd = forward_mlp(net.params, net.layers, input, false);
    CHECK(fwd.value()(0, 0) == doctest::Approx(2.7).epsilon(1e-15));
  }
  {
    // LayerNorm on [1.6, 0.8]: x̂ = ±0.4/sqrt(0.16 + 1e-5)
    auto net = hand_set_net(true);
    const auto fwd = forward_mlp(net.params, net.layers, input, true);
    CHECK(fwd.value()(0, 0) == doctest::Approx(2.2999375029295352).epsilon(1e-14));
    const Matrix direct = evaluate_mlp(net.params, net.layers, input, true);
    CHECK(direct == fwd.value());
  }
}

TEST_CASE("forward_mlp: configuration and numeric errors") {
  auto net = hand_set_net(false);
  CHECK_THROWS_AS(forward_mlp(net.params, net.layers, Matrix(1, 3), false), ConfigError);
  CHECK_THROWS_AS(forward_mlp(net.params, net.layers, Matrix(1, 2), true), ConfigError);
  net.params[net.layers[0].weight](0, 0) = 1e308;
  try {
    forward_mlp(net.params, net.layers, Matrix::from_rows({{1e308, 1.0}}), false);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("L0") != std::string::npos);
  }
}

TEST_CASE("backward: linear map gives the input broadcast per row") {
  ParamSet params;
  const ParamId w = params.add("W", Matrix::from_rows({{0.2, -0.1, 0.4}, {1.0, 0.5, -2.0}}));
  Tape tape;
  const Matrix x = Matrix::from_rows({{3.0, -1.5}});
  const NodeId loss = tape.sum(tape.matmul(tape.constant(x), tape.param(params, w)));
  const Gradients g = tape.backward(loss, params);
  // ∂/∂W[i][j] = x[i] for every column j
  CHECK(g[w] == Matrix::from_rows({{3.0, 3.0, 3.0}, {-1.5, -1.5, -1.5}}));
}

TEST_CASE("backward: stop-gradient yields bitwise zero") {
  ParamSet params;
  const ParamId py = params.add("y_source", Matrix::from_rows({{0.7, -0.3}}));
  const ParamId pq = params.add("q_source", Matrix::from_rows({{0.1, 0.9}}));
  Tape tape;
  const NodeId y = tape.stop_gradient(tape.scale(tape.param(params, py), 3.0));
  const NodeId q = tape.param(params, pq);
  const NodeId loss = tape.sum(tape.square(tape.sub(y, q)));
  const Gradients g = tape.backward(loss, params);
  for (double v : g[py].data()) {
    CHECK(v == 0.0);
    CHECK_FALSE(std::signbit(v));
  }
  CHECK(g[pq](0, 0) == doctest::Approx(-2.0 * (2.1 - 0.1)));
}

TEST_CASE("backward: non-scalar root is a usage error") {
  ParamSet params;
  const ParamId w = params.add("W", Matrix(2, 2, 1.0));
  Tape tape;
  const NodeId out = tape.relu(tape.param(params, w));
  CHECK_THROWS_AS(tape.backward(out, params), UsageError);
}

TEST_CASE("backward: matches central finite differences on 100 random nets") {
  Rng rng(20240601);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t in = 1 + rng.below(4), hidden = 2 + rng.below(6), out = 1 + rng.below(3);
    const bool ln = trial % 2 == 0;
    auto net = random_net(rng, in, hidden, out, ln);
    const Matrix x = random_matrix(3, in, rng);
    const Matrix target = random_matrix(3, out, rng);
    auto loss_value = [&] {
      const Matrix y = evaluate_mlp(net.params, net.layers, x, ln);
      double s = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) {
        const double d = y.data()[i] - target.data()[i];
        s += d * d;
      }
      return s / static_cast<double>(y.size());
    };
    Tape tape;
    const auto trace = forward_mlp(tape, net.params, net.layers, tape.constant(x), ln);
    const NodeId loss = tape.mean(tape.square(tape.sub(trace.output, tape.constant(target))));
    CHECK(tape.scalar(loss) == doctest::Approx(loss_value()).epsilon(1e-14));
    const Gradients analytic = tape.backward(loss, net.params);
    const Gradients numeric = finite_difference(net.params, loss_value);
    worst = std::max(worst, max_relative_error(analytic, numeric));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("backward: reductions (max, logsumexp, mellowmax, gather) match finite differences") {
  Rng rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    ParamSet params;
    const ParamId q = params.add("q", random_matrix(4, 3, rng));
    const std::vector<std::size_t> idx{0, 2, 1, 2};
    const Matrix factor = random_matrix(4, 1, rng), offset = random_matrix(4, 1, rng);
    auto build = [&](Tape& t) {
      const NodeId x = t.param(params, q);
      const NodeId a = t.affine_const(t.max_row(x), factor, offset);
      const NodeId b = t.logsumexp_row(x);
      const NodeId c = t.mellowmax_row(x, 2.5);
      const NodeId d = t.gather(x, idx);
      return t.sum(t.square(t.add(t.sub(a, d), t.scale(t.add(b, c), 0.5))));
    };
    Tape tape;
    const NodeId loss = build(tape);
    const Gradients analytic = tape.backward(loss, params);
    const Gradients numeric = finite_difference(params, [&] {
      Tape t;
      return t.scalar(build(t));
    });
    CHECK(max_relative_error(analytic, numeric) < 1e-6);
  }
}

TEST_CASE("forward and backward are deterministic") {
  auto run = [] {
    Rng rng(5);
    auto net = random_net(rng, 3, 6, 2, true);
    const Matrix x = random_matrix(4, 3, rng);
    Tape tape;
    const auto trace = forward_mlp(tape, net.params, net.layers, tape.constant(x), true);
    const NodeId loss = tape.sum(tape.square(trace.output));
    return std::make_pair(tape.value(trace.output), tape.backward(loss, net.params));
  };
  const auto a = run();
  const auto b = run();
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
}

TEST_CASE("adam_step: one step from zeroed state") {
  ParamSet params;
  params.add("p", Matrix::from_rows({{0.0}}));
  AdamState state(params, AdamConfig{0.1, 0.9, 0.999, 1e-8});
  adam_step(state, params, Gradients{Matrix::from_rows({{1.0}})});
  CHECK(params[0](0, 0) == doctest::Approx(-0.1 * (1.0 / (1.0 + 1e-8))).epsilon(1e-14));
  CHECK(state.steps() == 1);
}

TEST_CASE("adam_step: zero gradient leaves parameters and decays moments") {
  ParamSet params;
  params.add("p", Matrix::from_rows({{1.0, -2.0}}));
  AdamState state(params, AdamConfig{0.1, 0.9, 0.999, 1e-8});
  adam_step(state, params, Gradients{Matrix::from_rows({{1.0, 1.0}})});
  const Matrix after_first = params[0];
  const double m1 = state.first_moment()[0](0, 0);
  const double v1 = state.second_moment()[0](0, 0);
  adam_step(state, params, Gradients{Matrix(1, 2)});
  // the moments still carry the first gradient, so the step is not zero;
  // with zero moments from the start a zero gradient is exactly a no-op
  CHECK(state.first_moment()[0](0, 0) == doctest::Approx(0.9 * m1));
  CHECK(state.second_moment()[0](0, 0) == doctest::Approx(0.999 * v1));
  CHECK(state.steps() == 2);

  ParamSet fresh;
  fresh.add("p", Matrix::from_rows({{1.0, -2.0}}));
  AdamState s2(fresh, AdamConfig{0.1, 0.9, 0.999, 1e-8});
  adam_step(s2, fresh, Gradients{Matrix(1, 2)});
  CHECK(fresh[0] == Matrix::from_rows({{1.0, -2.0}}));
  CHECK(after_first != params[0]);
}

TEST_CASE("adam_step: constant gradient approaches lr·sign(g)") {
  ParamSet params;
  params.add("p", Matrix::from_rows({{0.0, 0.0}}));
  AdamState state(params, AdamConfig{0.01, 0.9, 0.999, 1e-8});
  Matrix prev = params[0];
  for (int i = 0; i < 5000; ++i) {
    prev = params[0];
    adam_step(state, params, Gradients{Matrix::from_rows({{3.0, -0.2}})});
  }
  CHECK(params[0](0, 0) - prev(0, 0) == doctest::Approx(-0.01).epsilon(1e-6));
  CHECK(params[0](0, 1) - prev(0, 1) == doctest::Approx(0.01).epsilon(1e-6));
}

TEST_CASE("adam_step and sgd_step reject non-finite gradients and skip frozen entries") {
  ParamSet params;
  params.add("p", Matrix::from_rows({{1.0}}));
  params.add("frozen", Matrix::from_rows({{4.0}}), true);
  AdamState state(params, AdamConfig{});
  Gradients bad{Matrix(1, 1), Matrix(1, 1)};
  bad[0].data()[0] = INFINITY;
  CHECK_THROWS_AS(adam_step(state, params, bad), NumericError);
  CHECK_THROWS_AS(sgd_step(params, bad, 0.1), NumericError);
  CHECK(params[0](0, 0) == 1.0);
  sgd_step(params, Gradients{Matrix(1, 1, 1.0), Matrix(1, 1, 1.0)}, 0.5);
  CHECK(params[0](0, 0) == 0.5);
  CHECK(params[1](0, 0) == 4.0);
}

TEST_CASE("sgd_step: definition") {
  ParamSet params;
  params.add("p", Matrix::from_rows({{1.0, 2.0}}));
  sgd_step(params, Gradients{Matrix::from_rows({{0.5, -0.5}})}, 1.0);
  CHECK(params[0] == Matrix::from_rows({{0.5, 2.5}}));
  sgd_step(params, Gradients{Matrix::from_rows({{0.5, -0.5}})}, 0.0);
  CHECK(params[0] == Matrix::from_rows({{0.5, 2.5}}));
  sgd_step(params, Gradients{Matrix(1, 2)}, 3.0);
  CHECK(params[0] == Matrix::from_rows({{0.5, 2.5}}));
}

TEST_CASE("rng streams are reproducible and independent by name") {
  Rng a = Rng::stream(7, "action"), b = Rng::stream(7, "action"), c = Rng::stream(7, "buffer");
  const auto x = a.next();
  CHECK(x == b.next());
  CHECK(x != c.next());
  Rng r(1);
  for (int i = 0; i < 1000; ++i) {
    const double u = r.uniform();
    CHECK((u >= 0.0 && u < 1.0));
    CHECK(r.below(3) < 3);
  }
}

#include <cstdio>
#include <filesystem>

#include "doctest.h"
#include "isqn/checkpoint.hpp"
#include "isqn/errors.hpp"
#include "isqn/optim.hpp"
#include "isqn/qnet.hpp"
#include "isqn/rng.hpp"
#include "test_util.hpp"

using namespace isqn;
using isqn::testing::random_matrix;

namespace {

NetConfig small_config(NetMode mode, std::size_t K = 1, bool layernorm = true) {
  NetConfig c;
  c.input_dim = 4;
  c.hidden = {8, 6};
  c.n_actions = 3;
  c.layernorm = layernorm;
  c.mode = mode;
  c.K = K;
  c.pairs = K;
  return c;
}

// Independent forward pass written out with explicit loops.
Matrix naive_q(const MultiHeadQNet& net, const Matrix& states, std::size_t k) {
  const ParamSet& p = net.params();
  Matrix x = states;
  for (const auto& layer : net.torso()) {
    const Matrix& w = p[layer.weight];
    const Matrix& b = p[layer.bias];
    Matrix y(x.rows(), w.cols());
    for (std::size_t r = 0; r < x.rows(); ++r) {
      for (std::size_t j = 0; j < w.cols(); ++j) {
        double s = b(0, j);
        for (std::size_t i = 0; i < w.rows(); ++i) s += x(r, i) * w(i, j);
        y(r, j) = s;
      }
      if (layer.ln_gain) {
        double mu = 0.0, var = 0.0;
        for (std::size_t j = 0; j < y.cols(); ++j) mu += y(r, j);
        mu /= y.cols();
        for (std::size_t j = 0; j < y.cols(); ++j) var += (y(r, j) - mu) * (y(r, j) - mu);
        var /= y.cols();
        for (std::size_t j = 0; j < y.cols(); ++j)
          y(r, j) = p[*layer.ln_gain](0, j) * (y(r, j) - mu) / std::sqrt(var + 1e-5) + p[*layer.ln_bias](0, j);
      }
      for (std::size_t j = 0; j < y.cols(); ++j) y(r, j) = std::max(0.0, y(r, j));
    }
    x = y;
  }
  const Matrix& w = p[net.head(k).weight];
  const Matrix& b = p[net.head(k).bias];
  Matrix q(x.rows(), w.cols());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t a = 0; a < w.cols(); ++a) {
      double s = b(0, a);
      for (std::size_t i = 0; i < w.rows(); ++i) s += x(r, i) * w(i, a);
      q(r, a) = s;
    }
  return q;
}

void copy_head(MultiHeadQNet& net, std::size_t from, std::size_t to) {
  net.params()[net.head(to).weight] = net.params()[net.head(from).weight];
  net.params()[net.head(to).bias] = net.params()[net.head(from).bias];
}

}  // namespace

TEST_CASE("q_all_heads: head count and identical heads give identical slices") {
  Rng rng(1);
  MultiHeadQNet net(small_config(NetMode::IteratedShared, 3), rng);
  CHECK(net.num_heads() == 4);
  for (std::size_t k = 1; k < 4; ++k) copy_head(net, 0, k);
  const auto q = net.q_all_heads(random_matrix(5, 4, rng));
  REQUIRE(q.size() == 4);
  for (std::size_t k = 1; k < 4; ++k) CHECK(q[k] == q[0]);
}

TEST_CASE("q_all_heads: a zeroed head outputs zeros") {
  Rng rng(2);
  MultiHeadQNet net(small_config(NetMode::IteratedShared, 2), rng);
  net.params()[net.head(1).weight].fill(0.0);
  net.params()[net.head(1).bias].fill(0.0);
  const auto q = net.q_all_heads(random_matrix(3, 4, rng, -5, 5));
  CHECK(q[1] == Matrix(3, 3));
}

TEST_CASE("q_all_heads: each slice matches a separate per-head forward pass") {
  Rng rng(3);
  for (bool ln : {false, true}) {
    MultiHeadQNet net(small_config(NetMode::IteratedShared, 3, ln), rng);
    const Matrix s = random_matrix(3, 4, rng);
    const auto q = net.q_all_heads(s);
    for (std::size_t k = 0; k < net.num_heads(); ++k) {
      CHECK(max_abs_diff(q[k], naive_q(net, s, k)) < 1e-12);
      CHECK(q[k] == net.q_head(s, k));
    }
  }
  MultiHeadQNet net(small_config(NetMode::IteratedShared, 1), rng);
  CHECK_THROWS_AS(net.q_all_heads(Matrix(2, 5)), ConfigError);
}

TEST_CASE("heads start distinct") {
  Rng rng(4);
  MultiHeadQNet net(small_config(NetMode::IteratedShared, 2), rng);
  CHECK(net.params()[net.head(0).weight] != net.params()[net.head(1).weight]);
  CHECK(net.params()[net.head(1).weight] != net.params()[net.head(2).weight]);
}

TEST_CASE("shift_heads moves every head one slot down") {
  Rng rng(5);
  SUBCASE("K=1") {
    MultiHeadQNet net(small_config(NetMode::IteratedShared, 1), rng);
    const Matrix b = net.params()[net.head(1).weight];
    net.shift_heads();
    CHECK(net.params()[net.head(0).weight] == b);
    CHECK(net.params()[net.head(1).weight] == b);
  }
  SUBCASE("K=2") {
    MultiHeadQNet net(small_config(NetMode::IteratedShared, 2), rng);
    const Matrix B = net.params()[net.head(1).weight], C = net.params()[net.head(2).weight];
    const Matrix Cb = net.params()[net.head(2).bias];
    const Matrix torso0 = net.params()[net.torso()[0].weight];
    net.shift_heads();
    CHECK(net.params()[net.head(0).weight] == B);
    CHECK(net.params()[net.head(1).weight] == C);
    CHECK(net.params()[net.head(2).weight] == C);
    CHECK(net.params()[net.head(1).bias] == Cb);
    CHECK(net.params()[net.torso()[0].weight] == torso0);
  }
  SUBCASE("post-shift Q_0 equals pre-shift Q_1") {
    MultiHeadQNet net(small_config(NetMode::IteratedShared, 3), rng);
    const Matrix s = random_matrix(7, 4, rng);
    const Matrix before = net.q_head(s, 1);
    net.shift_heads();
    CHECK(net.q_head(s, 0) == before);
  }
  SUBCASE("identity when all heads are equal") {
    MultiHeadQNet net(small_config(NetMode::IteratedShared, 3), rng);
    for (std::size_t k = 1; k < 4; ++k) copy_head(net, 0, k);
    const ParamSet before = net.params();
    net.shift_heads();
    for (std::size_t i = 0; i < before.size(); ++i) CHECK(net.params()[i] == before[i]);
  }
  SUBCASE("wrong mode") {
    MultiHeadQNet net(small_config(NetMode::TargetFree), rng);
    CHECK_THROWS_AS(net.shift_heads(), UsageError);
  }
}

TEST_CASE("sync_target copies torso and head") {
  Rng rng(6);
  MultiHeadQNet net(small_config(NetMode::TargetBased), rng);
  const Matrix s = random_matrix(5, 4, rng);
  // perturb the online network so it differs from θ̄
  for (std::size_t i = 0; i < net.params().size(); ++i)
    for (double& v : net.params()[i].data()) v += 0.1;
  CHECK(net.q_target(s) != net.q_head(s, 0));
  net.sync_target();
  CHECK(net.q_target(s) == net.q_head(s, 0));

  const Matrix frozen = net.q_target(s);
  Gradients g = zeros_like(net.params());
  for (auto& m : g) m.fill(0.5);
  sgd_step(net.params(), g, 0.1);
  CHECK(net.q_target(s) == frozen);
  CHECK(net.q_head(s, 0) != frozen);

  MultiHeadQNet is(small_config(NetMode::IteratedShared, 2), rng);
  CHECK_THROWS_AS(is.sync_target(), UsageError);
  CHECK(is.target_params() == nullptr);
}

TEST_CASE("ensemble mode interleaves (frozen, online) pairs") {
  Rng rng(7);
  MultiHeadQNet net(small_config(NetMode::EnsembleShared, 2), rng);
  CHECK(net.num_heads() == 4);
  CHECK(net.learned_heads() == std::vector<std::size_t>{1, 3});
  CHECK(net.params().frozen(net.head(0).weight));
  CHECK_FALSE(net.params().frozen(net.head(1).weight));
  for (double& v : net.params()[net.head(3).weight].data()) v += 1.0;
  net.sync_ensemble();
  CHECK(net.params()[net.head(2).weight] == net.params()[net.head(3).weight]);
}

TEST_CASE("param_count: closed form example (torso 4→8, head 8→2)") {
  Rng rng(8);
  auto cfg = [](NetMode m, std::size_t K) {
    NetConfig c;
    c.input_dim = 4;
    c.hidden = {8};
    c.n_actions = 2;
    c.layernorm = false;
    c.mode = m;
    c.K = K;
    return c;
  };
  CHECK(param_count(MultiHeadQNet(cfg(NetMode::TargetFree, 1), rng)).grand_total == 58);
  CHECK(param_count(MultiHeadQNet(cfg(NetMode::TargetBased, 1), rng)).grand_total == 116);
  CHECK(param_count(MultiHeadQNet(cfg(NetMode::IteratedShared, 1), rng)).grand_total == 76);
  CHECK(param_count(MultiHeadQNet(cfg(NetMode::IteratedShared, 9), rng)).grand_total == 220);
  CHECK(param_count_closed_form(NetMode::IteratedShared, 40, 18, 9, 1).grand_total == 220);
  CHECK_THROWS_AS(param_count_closed_form(NetMode::IteratedShared, 40, 18, 0, 1), ConfigError);
  auto bad = cfg(NetMode::IteratedShared, 0);
  CHECK_THROWS_AS(MultiHeadQNet(bad, rng), ConfigError);
}

TEST_CASE("param_count: enumerated arrays match closed form across modes") {
  Rng rng(9);
  for (bool ln : {false, true})
    for (std::size_t K : {1, 3, 9, 49})
      for (NetMode m : {NetMode::TargetBased, NetMode::TargetFree, NetMode::IteratedShared,
                        NetMode::EnsembleShared}) {
        MultiHeadQNet net(small_config(m, K, ln), rng);
        std::size_t torso = 0;
        for (ParamId id : net.torso_param_ids()) torso += net.params()[id].size();
        std::size_t head = 0;
        for (ParamId id : net.head_param_ids(0)) head += net.params()[id].size();
        const auto enumerated = param_count(net);
        const auto closed = param_count_closed_form(m, torso, head, K, K);
        CHECK(enumerated.online_total == closed.online_total);
        CHECK(enumerated.target_extra == closed.target_extra);
        CHECK(enumerated.grand_total == closed.grand_total);
        // exactly one torso block
        std::size_t torso_arrays = 0;
        for (std::size_t i = 0; i < net.params().size(); ++i)
          if (net.params().name(i).rfind("torso.", 0) == 0) ++torso_arrays;
        CHECK(torso_arrays == net.torso_param_ids().size());
      }
}

TEST_CASE("checkpoint round-trips every mode and rejects malformed documents") {
  Rng rng(10);
  for (NetMode m : {NetMode::TargetBased, NetMode::IteratedShared, NetMode::EnsembleShared}) {
    MultiHeadQNet net(small_config(m, 2), rng);
    if (m == NetMode::TargetBased)
      for (double& v : net.params()[0].data()) v += 0.25;  // θ̄ ≠ θ
    const auto path = std::filesystem::temp_directory_path() / "isqn_ckpt_test.json";
    save_checkpoint(net, path);
    const MultiHeadQNet back = load_checkpoint(path);
    std::filesystem::remove(path);
    REQUIRE(back.params().size() == net.params().size());
    for (std::size_t i = 0; i < net.params().size(); ++i) {
      CHECK(back.params()[i] == net.params()[i]);
      CHECK(back.params().frozen(i) == net.params().frozen(i));
    }
    if (m == NetMode::TargetBased) {
      for (std::size_t i = 0; i < net.params().size(); ++i)
        CHECK((*back.target_params())[i] == (*net.target_params())[i]);
    }
  }
  MultiHeadQNet net(small_config(NetMode::TargetFree), rng);
  auto doc = checkpoint_to_json(net);
  CHECK(doc["arrays"].contains("torso.L0.W"));
  CHECK(doc["arrays"].contains("head.0.b"));
  auto wrong_version = doc;
  wrong_version["version"] = 99;
  CHECK_THROWS_AS(checkpoint_from_json(wrong_version), ConfigError);
  auto missing = doc;
  missing["arrays"].erase("head.0.W");
  CHECK_THROWS_AS(checkpoint_from_json(missing), ConfigError);
}

TEST_CASE("param_count: iS total is below TB exactly when (K-1)|h| < |w|") {
  for (std::size_t torso : {10, 40, 192, 1000})
    for (std::size_t head : {2, 18, 99})
      for (std::size_t K : {1, 2, 3, 4, 9, 49}) {
        const auto is = param_count_closed_form(NetMode::IteratedShared, torso, head, K, 1);
        const auto tb = param_count_closed_form(NetMode::TargetBased, torso, head, 1, 1);
        CHECK((is.grand_total < tb.grand_total) == ((K - 1) * head < torso));
      }
  // the weaker condition (K-1)|h| < |w|+|h| admits counterexamples
  const auto is = param_count_closed_form(NetMode::IteratedShared, 40, 18, 4, 1);
  const auto tb = param_count_closed_form(NetMode::TargetBased, 40, 18, 1, 1);
  CHECK(3 * 18 < 40 + 18);
  CHECK(is.grand_total > tb.grand_total);
}

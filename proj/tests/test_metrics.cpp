#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <numeric>

#include "doctest.h"
#include "isqn/diagnostics.hpp"
#include "isqn/errors.hpp"
#include "isqn/records.hpp"
#include "isqn/rng.hpp"
#include "isqn/stats.hpp"
#include "test_util.hpp"

using namespace isqn;
using isqn::testing::random_matrix;

TEST_CASE("iqm definition") {
  const std::vector<double> v = {8, 3, 1, 5, 2, 7, 4, 6};
  CHECK(iqm(v).value == 4.5);
  CHECK_FALSE(iqm(v).plain_mean);
  const std::vector<double> flat(9, 2.5);
  CHECK(iqm(flat).value == 2.5);
  std::vector<double> ones(12, 1.0);
  for (std::size_t i = 0; i < ones.size(); ++i) ones[i] += 0.01 * i;
  auto outlier = ones;
  outlier.back() = 1e6;
  CHECK(iqm(outlier).value == iqm(ones).value);
  const std::vector<double> few = {1, 2, 6};
  CHECK(iqm(few).value == 3.0);
  CHECK(iqm(few).plain_mean);
  CHECK_THROWS_AS(iqm(std::vector<double>{}), ConfigError);

  Rng rng(1);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> x(1 + rng.below(30));
    for (double& e : x) e = rng.uniform(-10, 10);
    const double m = iqm(x).value;
    CHECK(m >= *std::min_element(x.begin(), x.end()));
    CHECK(m <= *std::max_element(x.begin(), x.end()));
  }
}

TEST_CASE("bootstrap interval basics") {
  std::vector<std::vector<double>> constant = {{2, 2, 2, 2}, {2, 2, 2}};
  auto ci = stratified_bootstrap_ci(constant);
  CHECK(ci.lo == 2.0);
  CHECK(ci.hi == 2.0);

  std::vector<std::vector<double>> single = {{1.0}, {3.0}};
  auto d = stratified_bootstrap_ci(single);
  CHECK(d.degenerate);
  CHECK(d.lo == d.hi);

  CHECK_THROWS_AS(stratified_bootstrap_ci(constant, 999), ConfigError);

  Rng rng(2);
  int contained = 0;
  for (int t = 0; t < 30; ++t) {
    std::vector<std::vector<double>> strata(2);
    for (auto& s : strata) {
      s.resize(10);
      for (double& v : s) v = rng.uniform(0, 1);
    }
    std::vector<double> pooled;
    for (auto& s : strata) pooled.insert(pooled.end(), s.begin(), s.end());
    const double point = iqm(pooled).value;
    auto c = stratified_bootstrap_ci(strata, 2000, 0.95, t);
    CHECK(c.lo <= c.hi);
    contained += c.lo <= point && point <= c.hi;
  }
  CHECK(contained >= 29);
}

TEST_CASE("bootstrap matches exhaustive enumeration") {
  const std::vector<std::vector<double>> strata = {{0.1, 0.5, 0.9}, {1.2, 1.3, 2.0}};
  // Every ordered resample is equally likely: 27 per stratum, 729 in total.
  std::vector<double> exact;
  std::vector<double> sample(6);
  for (int i = 0; i < 729; ++i) {
    int code = i;
    for (int j = 0; j < 6; ++j) {
      sample[j] = strata[j / 3][code % 3];
      code /= 3;
    }
    exact.push_back(iqm(sample).value);
  }
  std::sort(exact.begin(), exact.end());
  auto exact_quantile = [&](double p) {
    p = std::clamp(p, 0.0, 1.0);
    return exact[std::min<std::size_t>(exact.size() - 1, static_cast<std::size_t>(p * exact.size()))];
  };
  const auto ci = stratified_bootstrap_ci(strata, 20000, 0.95, 11);
  // Monte Carlo error of a 2.5% quantile from 20000 draws is about 0.1% in
  // probability; a 1% band is a loose bracket.
  CHECK(ci.lo >= exact_quantile(0.015));
  CHECK(ci.lo <= exact_quantile(0.035));
  CHECK(ci.hi >= exact_quantile(0.965));
  CHECK(ci.hi <= exact_quantile(0.985));
}

TEST_CASE("auc summation") {
  const Normalizer n{0.2, 1.2};
  const std::vector<double> top(7, 1.2);
  CHECK(auc(top, n) == doctest::Approx(7.0).epsilon(1e-15));
  const std::vector<double> floor(7, 0.2);
  CHECK(auc(floor, n) == 0.0);
  const std::size_t E = 11;
  std::vector<double> ramp(E);
  for (std::size_t e = 0; e < E; ++e) ramp[e] = 0.2 + static_cast<double>(e) / (E - 1);
  // Σ_{e=0}^{E−1} e/(E−1) = E/2
  CHECK(auc(ramp, n) == doctest::Approx(E / 2.0).epsilon(1e-14));
  const Normalizer unit{0.0, 1.0};
  std::vector<double> x = {0.3, 0.7, 1.1}, scaled = x;
  for (double& v : scaled) v *= 2.5;
  CHECK(auc(scaled, unit) == doctest::Approx(2.5 * auc(x, unit)).epsilon(1e-15));
  CHECK_THROWS_AS(auc(x, Normalizer{1.0, 1.0}), ConfigError);
  CHECK_THROWS_AS(auc(std::vector<double>{}, unit), ConfigError);
}

TEST_CASE("gradient cosine") {
  const std::vector<double> g = {1, -2, 3}, neg = {-1, 2, -3}, scaled = {2, -4, 6};
  CHECK(grad_cosine(g, g) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(grad_cosine(g, neg) == doctest::Approx(-1.0).epsilon(1e-15));
  const std::vector<double> a = {1, 0, 1}, b = {0, 5, 0};
  CHECK(grad_cosine(a, b) == 0.0);
  CHECK(grad_cosine(std::vector<double>{0, 0, 0}, g) == 0.0);
  Rng rng(3);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> x(5), y(5);
    for (double& v : x) v = rng.uniform(-1, 1);
    for (double& v : y) v = rng.uniform(-1, 1);
    const double c = grad_cosine(x, y);
    CHECK(c >= -1.0);
    CHECK(c <= 1.0);
    CHECK(c == doctest::Approx(grad_cosine(y, x)).epsilon(1e-15));
    auto sx = x;
    for (double& v : sx) v *= 3.7;
    CHECK(grad_cosine(sx, y) == doctest::Approx(c).epsilon(1e-13));
  }
  CHECK(grad_cosine(g, scaled) == doctest::Approx(1.0));
}

TEST_CASE("singular values by Jacobi rotations") {
  Matrix d(4, 3);
  d(0, 0) = 10;
  d(1, 1) = 1;
  d(2, 2) = 0.01;
  auto s = singular_values(d);
  CHECK(s[0] == doctest::Approx(10.0).epsilon(1e-14));
  CHECK(s[1] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(s[2] == doctest::Approx(0.01).epsilon(1e-12));

  // Σσ² equals the squared Frobenius norm for any matrix, wide or tall.
  Rng rng(4);
  for (auto [r, c] : {std::pair{7, 4}, std::pair{3, 6}, std::pair{5, 5}}) {
    Matrix m = random_matrix(r, c, rng);
    auto sv = singular_values(m);
    double fro = 0.0, ss = 0.0;
    for (double v : m.data()) fro += v * v;
    for (double v : sv) ss += v * v;
    CHECK(ss == doctest::Approx(fro).epsilon(1e-12));
    CHECK(std::is_sorted(sv.begin(), sv.end(), std::greater<>()));
  }
}

TEST_CASE("srank") {
  Matrix eye(6, 6);
  for (int i = 0; i < 6; ++i) eye(i, i) = 1.0;
  CHECK(srank(eye, 0.01).rank == 6);

  Matrix rank1(5, 4);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 4; ++j) rank1(i, j) = (i + 1.0) * (j - 1.5);
  CHECK(srank(rank1, 0.01).rank == 1);

  // Cumulative fractions 10/11.01 = 0.9083 and 11/11.01 = 0.99909.
  Matrix d(3, 3);
  d(0, 0) = 10;
  d(1, 1) = 1;
  d(2, 2) = 0.01;
  CHECK(srank(d, 0.01).rank == 2);
  CHECK(srank(d, 0.0005).rank == 3);
  CHECK(srank(d, 0.1).rank == 1);
  CHECK(srank(d, 0.09).rank == 2);

  auto zero = srank(Matrix(4, 3), 0.01);
  CHECK(zero.rank == 0);
  CHECK(zero.all_zero);
  CHECK_THROWS_AS(srank(d, 0.0), ConfigError);

  Rng rng(5);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> sigma(8);
    for (double& v : sigma) v = std::exp(rng.uniform(-6, 2));
    std::sort(sigma.begin(), sigma.end(), std::greater<>());
    std::size_t prev = 0;
    for (double delta : {0.5, 0.2, 0.1, 0.05, 0.01, 0.001}) {
      const std::size_t r = srank_from_singular_values(sigma, delta).rank;
      CHECK(r >= prev);
      CHECK(r <= sigma.size());
      prev = r;
    }
  }
}

TEST_CASE("dormant fraction") {
  Matrix flat(4, 5);
  flat.fill(0.7);
  std::vector<Matrix> layers = {flat};
  CHECK(dormant_fraction(layers, 0.025) == 0.0);

  Matrix dead = flat;
  for (int i = 0; i < 4; ++i) dead(i, 2) = 0.0;
  layers = {dead};
  CHECK(dormant_fraction(layers, 0.0) == doctest::Approx(0.2));
  CHECK(dormant_fraction(layers, 0.025) == doctest::Approx(0.2));

  // Column means |h|: 1, 0.02, 0.03, 2.95 → layer mean 1.0, scores equal the means.
  Matrix hand = Matrix::from_rows({{1, 0.04, -0.06, 2.9}, {-1, 0.0, 0.0, 3.0}});
  Matrix second(2, 2);
  second.fill(1.0);
  layers = {hand, second};
  CHECK(dormant_fraction(layers, 0.025) == doctest::Approx(1.0 / 6.0));
  CHECK(dormant_fraction(layers, 0.03) == doctest::Approx(2.0 / 6.0));
  CHECK(dormant_fraction(layers, 0.019) == 0.0);
}

TEST_CASE("target churn") {
  NetConfig c;
  c.input_dim = 3;
  c.hidden = {5};
  c.n_actions = 2;
  Rng rng(6);
  Batch b;
  b.states = random_matrix(6, 3, rng);
  b.next_states = random_matrix(6, 3, rng);
  b.actions = {0, 1, 1, 0, 1, 0};
  b.rewards = {0, 1, 0, 0, 0.5, 0};
  b.dones = {0, 0, 1, 0, 0, 0};
  LossConfig cfg;
  cfg.gamma = 0.9;

  SUBCASE("target-based churn is zero") {
    c.mode = NetMode::TargetBased;
    MultiHeadQNet before(c, rng);
    MultiHeadQNet after = before;
    for (double& v : after.params()[0].data()) v += 0.3;
    CHECK(target_churn(before, after, b, cfg) == 0.0);
  }
  SUBCASE("shifting the target head bias") {
    c.mode = NetMode::IteratedShared;
    c.K = 1;
    MultiHeadQNet before(c, rng);
    MultiHeadQNet after = before;
    for (double& v : after.params()[after.head(0).bias].data()) v += 0.5;
    // Every next-state max rises by 0.5, so y moves by γ·0.5 on non-terminal rows.
    CHECK(target_churn(before, after, b, cfg) == doctest::Approx(0.9 * 0.5 * 5.0 / 6.0).epsilon(1e-12));
  }
  SUBCASE("freshest link versus all links") {
    c.mode = NetMode::IteratedShared;
    c.K = 2;
    MultiHeadQNet before(c, rng);
    MultiHeadQNet after = before;
    for (double& v : after.params()[after.head(1).bias].data()) v += 1.0;
    const double fresh = 0.9 * 5.0 / 6.0;
    CHECK(target_churn(before, after, b, cfg) == doctest::Approx(fresh).epsilon(1e-12));
    CHECK(target_churn(before, after, b, cfg, ChurnTarget::AllLinks) ==
          doctest::Approx(fresh / 2.0).epsilon(1e-12));
  }
}

TEST_CASE("churn accumulator") {
  ChurnAccumulator acc;
  CHECK(acc.period_mean() == 0.0);
  acc.add(0.5);
  acc.add(1.5);
  CHECK(acc.total() == 2.0);
  CHECK(acc.period_mean() == 1.0);
  acc.reset();
  CHECK(acc.steps() == 0);
  CHECK(acc.total() == 0.0);
}

TEST_CASE("metrics csv round trip") {
  std::vector<MetricsRow> rows(3);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i].epoch = i + 1;
    rows[i].ret = 0.1 * (i + 1);
    rows[i].norm_return = 1.0 / 3.0 * i;
    rows[i].loss = 1e-7 * (i + 1);
    rows[i].params_online = 58;
    rows[i].params_total = 116;
  }
  rows[1].churn = 0.125;
  rows[1].cos_tb = -0.3;
  rows[1].srank = 4;
  rows[1].dormant = 0.0;
  rows[2].loss.reset();
  const std::string text = metrics_csv_text(rows);
  CHECK(text.rfind(std::string(kMetricsHeader) + "\n1,0.10000000000000001,0,9.9999999999999995e-08,,,,,,58,116\n", 0) == 0);
  CHECK(parse_metrics_csv(text) == rows);
  rows[0].churn = std::nan("");
  CHECK_THROWS_AS(metrics_csv_text(rows), NumericError);
  CHECK_THROWS_AS(parse_metrics_csv("epoch\n1\n"), ConfigError);
  CHECK_THROWS_AS(parse_metrics_csv(std::string(kMetricsHeader) + "\n1,2,3\n"), ConfigError);
}

TEST_CASE("auc report json round trip") {
  AucReport r;
  r.cell = "iS-K3";
  r.env = "chain";
  r.runs = {{0, 1.25, false}, {1, 0.1 + 0.2, true}};
  r.iqm = 0.775;
  r.ci_lo = 0.3;
  r.ci_hi = 1.25;
  r.plain_mean = true;
  CHECK(parse_auc_report(auc_report_json(r)) == r);
  CHECK_THROWS_AS(parse_auc_report("{}"), ConfigError);
}

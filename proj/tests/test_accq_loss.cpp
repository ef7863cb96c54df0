#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "sketchabs/accq_loss.hpp"
#include "test_util.hpp"

using namespace sketchabs;

namespace {

// Straight transcription of the per-query loop.
double reference_loss(const Matrix& d, const std::vector<int>& q, double tau1, double tau2) {
  const auto b = d.rows();
  double total = 0;
  for (Eigen::Index i = 0; i < b; ++i) {
    double rank = 0;
    for (Eigen::Index j = 0; j < b; ++j) rank += 1.0 / (1.0 + std::exp(-(d(i, i) - d(i, j)) / tau2));
    total += 1.0 / (1.0 + std::exp(-(q[i] - rank) / tau1));
  }
  return -total / b;
}

}  // namespace

TEST_CASE("smooth sigmoid values") {
  CHECK(smooth_sigmoid(0, 1) == 0.5);
  CHECK(smooth_sigmoid(0, 0.01) == 0.5);
  CHECK(smooth_sigmoid(1, 1) == doctest::Approx(0.731059).epsilon(1e-6));
  CHECK(smooth_sigmoid(0.05, 0.01) == doctest::Approx(0.993307).epsilon(1e-6));
  CHECK(smooth_sigmoid(1e6, 1) == doctest::Approx(1.0));
  CHECK(smooth_sigmoid(-1e6, 1) == doctest::Approx(0.0));
  CHECK(smooth_sigmoid_grad(1e6, 1) == 0.0);
  CHECK(smooth_sigmoid_grad(0, 2) == doctest::Approx(0.125));
}

TEST_CASE("soft rank") {
  const std::vector<double> self{0.0};
  CHECK(soft_rank(self, 0.01) == 0.5);
  const std::vector<double> three{0.0, -0.5, 0.3};
  CHECK(soft_rank(three, 0.01) == doctest::Approx(1.5).epsilon(1e-6));
  const std::vector<double> far{0.0, -2, -3, -4};
  CHECK(soft_rank(far, 0.01) == doctest::Approx(0.5));
  CHECK_THROWS_AS(soft_rank(std::vector<double>{}, 0.01), InvalidInput);
}

TEST_CASE("single query loss") {
  const Matrix d = Matrix::Zero(1, 1);
  const std::vector<int> q{1};
  const auto r = accq_loss(d, q, 1.0, 0.01);
  CHECK(r.loss == doctest::Approx(-0.622459).epsilon(1e-6));
}

TEST_CASE("saturated two-query batch") {
  Matrix d(2, 2);
  d << 0.1, 1.0, 2.0, 0.3;
  const std::vector<int> q{1, 1};
  const auto r = accq_loss(d, q, 1.0, 1e-6);
  CHECK(r.loss == doctest::Approx(-smooth_sigmoid(0.5, 1.0)));
}

TEST_CASE("loss matches the reference loop and stays in [-1, 0]") {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> qd(1, 6);
  for (int rep = 0; rep < 30; ++rep) {
    const int b = 2 + rep % 7;
    const Matrix d = testutil::random_matrix(b, b, rng).cwiseAbs();
    std::vector<int> q(b);
    for (auto& x : q) x = qd(rng);
    const double tau2 = rep % 2 ? 0.01 : 0.3;
    const auto r = accq_loss(d, q, 1.0, tau2);
    CHECK(r.loss == doctest::Approx(reference_loss(d, q, 1.0, tau2)).epsilon(1e-12));
    CHECK(r.loss <= 0.0);
    CHECK(r.loss >= -1.0);
  }
}

TEST_CASE("accq gradient matches finite differences") {
  std::mt19937_64 rng(23);
  for (int rep = 0; rep < 20; ++rep) {
    const int b = 3 + rep % 5;
    const Matrix d = testutil::random_matrix(b, b, rng).cwiseAbs();
    std::vector<int> q(b);
    for (int i = 0; i < b; ++i) q[i] = 1 + i % 3;
    const double tau2 = 0.1 + 0.1 * (rep % 3);
    auto f = [&](const Matrix& x) { return accq_loss(x, q, 1.0, tau2).loss; };
    const auto r = accq_loss(d, q, 1.0, tau2);
    CHECK(testutil::rel_error(r.grad, testutil::numeric_grad(f, d)) < 1e-6);
  }
}

TEST_CASE("accq input checks") {
  const Matrix d = Matrix::Zero(2, 2);
  CHECK_THROWS_AS(accq_loss(d, std::vector<int>{1}, 1, 0.01), InvalidInput);
  CHECK_THROWS_AS(accq_loss(d, std::vector<int>{1, 0}, 1, 0.01), InvalidInput);
  CHECK_THROWS_AS(accq_loss(d, std::vector<int>{1, 1}, 0, 0.01), InvalidInput);
  CHECK_THROWS_AS(accq_loss(Matrix::Zero(2, 3), std::vector<int>{1, 1}, 1, 0.01), InvalidInput);
}

TEST_CASE("hard rank and exact accuracy") {
  CHECK(hard_rank(std::vector<double>{0.5, 0.1, 0.9}, 0) == 2);
  CHECK(hard_rank(std::vector<double>{0.5, 0.5, 0.5}, 2) == 1);
  std::vector<RankQuery> qs{{{0.1, 0.5, 0.7}, 0}, {{0.3, 0.2, 0.9}, 1}};
  CHECK(exact_accuracy_at_q(qs, 1) == 1.0);
  std::vector<RankQuery> ties{{std::vector<double>(10, 0.4), 3}};
  CHECK(exact_accuracy_at_q(ties, 1) == 1.0);
  CHECK_THROWS_AS(hard_rank(std::vector<double>{0.1}, 1), InvalidInput);
}

TEST_CASE("exact accuracy is monotone in q") {
  std::mt19937_64 rng(29);
  std::vector<RankQuery> qs;
  for (int i = 0; i < 40; ++i) {
    RankQuery q;
    const Matrix d = testutil::random_matrix(12, 1, rng);
    q.distances.assign(d.data(), d.data() + 12);
    q.true_index = i % 12;
    qs.push_back(q);
  }
  double prev = 0;
  for (int q = 1; q <= 12; ++q) {
    const double acc = exact_accuracy_at_q(qs, q);
    CHECK(acc >= prev);
    prev = acc;
  }
  CHECK(prev == 1.0);
}

TEST_CASE("sharp temperatures recover exact batch accuracy") {
  std::mt19937_64 rng(31);
  const int b = 16;
  for (int rep = 0; rep < 100; ++rep) {
    const Matrix d = testutil::random_matrix(b, b, rng).cwiseAbs();
    const std::vector<int> q(b, 1 + rep % 4);
    const double exact = exact_batch_accuracy_at_q(d, q);
    const double surrogate = -accq_loss(d, q, 1e-4, 1e-4).loss;
    CHECK(std::abs(surrogate - exact) <= 1.0 / (2 * b));
  }
}

TEST_CASE("level q map") {
  const LevelQMap m;
  CHECK(m.q_for(AbstractionLevel::kCoarse) == 10);
  CHECK(m.q_for(AbstractionLevel::kMid) == 5);
  CHECK(m.q_for(AbstractionLevel::kFine) == 1);
}

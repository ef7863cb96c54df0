#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sketchabs/abstraction_mask.hpp"
#include "test_util.hpp"

using namespace sketchabs;

namespace {

RowMask row_mask(std::initializer_list<double> v) {
  RowMask m;
  int i = 0;
  for (double x : v) m[i++] = x;
  return m;
}

}  // namespace

TEST_CASE("selection mask states") {
  CHECK(build_selection_mask(Vec3(1, 0, 0)) == Vec3(1, 0, 0));
  CHECK(build_selection_mask(Vec3(0, 1, 0)) == Vec3(1, 1, 0));
  CHECK(build_selection_mask(Vec3(0, 0, 1)) == Vec3(1, 1, 1));
}

TEST_CASE("expansion") {
  const GroupSizes g{3, 3, 3};
  CHECK(expand_mask(Vec3(1, 1, 0), g) == row_mask({1, 1, 1, 1, 1, 1, 0, 0, 0}));
  CHECK(expand_mask(Vec3(1, 0, 0), g) == row_mask({1, 1, 1, 0, 0, 0, 0, 0, 0}));
  for (GroupSizes other : {GroupSizes{3, 3, 3}, GroupSizes{2, 4, 3}, GroupSizes{1, 1, 7}})
    CHECK(expand_mask(Vec3(1, 1, 1), other) == RowMask::Ones());
  CHECK_THROWS_AS(expand_mask(Vec3(1, 1, 1), GroupSizes{3, 3, 2}), InvalidInput);
}

TEST_CASE("level masks and active rows") {
  const GroupSizes g{3, 3, 3};
  CHECK(active_rows(level_mask(AbstractionLevel::kCoarse, g)) == 3);
  CHECK(active_rows(level_mask(AbstractionLevel::kMid, g)) == 6);
  CHECK(active_rows(level_mask(AbstractionLevel::kFine, g)) == 9);
}

TEST_CASE("mask backward passes are adjoints") {
  std::mt19937_64 rng(4);
  const GroupSizes g{2, 3, 4};
  for (int rep = 0; rep < 5; ++rep) {
    const Vec3 a = testutil::random_matrix(3, 1, rng);
    const Vec3 b = testutil::random_matrix(3, 1, rng);
    CHECK(build_selection_mask(a).dot(b) == doctest::Approx(a.dot(build_selection_mask_backward(b))));
    const RowMask c = testutil::random_matrix(9, 1, rng);
    CHECK(expand_mask(a, g).dot(c) == doctest::Approx(a.dot(expand_mask_backward(c, g))));
  }
}

TEST_CASE("apply mask") {
  std::mt19937_64 rng(8);
  const Matrix m = testutil::random_matrix(9, 4, rng);
  CHECK(apply_mask(m, RowMask::Ones()) == m);
  CHECK(apply_mask(m, RowMask::Zero()).isZero(0.0));
  const Matrix h = apply_mask(m, row_mask({1, 1, 1, 1, 1, 1, 0, 0, 0}));
  CHECK(h.topRows(6) == m.topRows(6));
  CHECK(h.bottomRows(3).isZero(0.0));
}

TEST_CASE("abstraction head") {
  AbstractionHead head = AbstractionHead::zeros(4);
  const Vector pooled = Vector::LinSpaced(4, -1, 1);
  const Vec3 logits = abstraction_head_forward(pooled, head);
  CHECK(logits.isZero(0.0));
  const Vec3 p = softmax(logits);
  for (int i = 0; i < 3; ++i) CHECK(p[i] == doctest::Approx(1.0 / 3));

  head.bias = Vec3(10, 0, 0);
  const Vec3 q = softmax(abstraction_head_forward(pooled, head));
  CHECK(q[0] == doctest::Approx(0.99991).epsilon(1e-5));
  CHECK(q[1] == doctest::Approx(0.0000454).epsilon(1e-2));
  CHECK(q[2] == doctest::Approx(0.0000454).epsilon(1e-2));
  CHECK_THROWS_AS(abstraction_head_forward(Vector::Zero(3), head), InvalidInput);
}

TEST_CASE("head is equivariant to input permutation") {
  std::mt19937_64 rng(12);
  AbstractionHead head = AbstractionHead::zeros(5);
  head.weight = testutil::random_matrix(3, 5, rng);
  const Vector x = testutil::random_matrix(5, 1, rng);
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(5);
  perm.indices() << 3, 0, 4, 1, 2;
  AbstractionHead permuted = head;
  permuted.weight = head.weight * perm.transpose();
  const Vec3 a = abstraction_head_forward(x, head);
  const Vec3 b = abstraction_head_forward(perm * x, permuted);
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("gumbel hard sample with a dominant logit") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    const auto s = gumbel_argmax(Vec3(100, 0, 0), 1.0, true, rng);
    CHECK(s.value == Vec3(1, 0, 0));
  }
}

TEST_CASE("gumbel soft sample sums to one") {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 50; ++i) {
    const auto s = gumbel_argmax(Vec3(0.3, -1, 2), 0.5, false, rng);
    CHECK(s.value.sum() == doctest::Approx(1.0));
    CHECK(s.value == s.soft);
  }
  CHECK_THROWS_AS(gumbel_argmax(Vec3::Zero(), 0.0, true, rng), InvalidInput);
}

TEST_CASE("gumbel-max frequencies follow softmax") {
  std::mt19937_64 rng(2024);
  const Vec3 logits(std::log(2.0), 0, 0);
  Vec3 freq = Vec3::Zero();
  const int n = 100000;
  for (int i = 0; i < n; ++i) freq[static_cast<int>(argmax_level(gumbel_argmax(logits, 1.0, true, rng).value))] += 1;
  freq /= n;
  CHECK(std::abs(freq[0] - 0.5) < 0.01);
  CHECK(std::abs(freq[1] - 0.25) < 0.01);
  CHECK(std::abs(freq[2] - 0.25) < 0.01);
}

TEST_CASE("straight-through gradient is the soft Jacobian") {
  std::mt19937_64 rng(6);
  for (int rep = 0; rep < 10; ++rep) {
    const Vec3 logits = testutil::random_matrix(3, 1, rng);
    const Vec3 noise = sample_gumbel_noise(rng);
    const Vec3 w = testutil::random_matrix(3, 1, rng);
    const double temp = 0.7;
    const auto hard = gumbel_argmax_with_noise(logits, noise, temp, true);
    auto f = [&](const Matrix& l) { return gumbel_argmax_with_noise(Vec3(l), noise, temp, false).value.dot(w); };
    const Vec3 a = gumbel_backward(hard, w);
    CHECK(testutil::rel_error(Matrix(a), testutil::numeric_grad(f, Matrix(logits))) < 1e-6);
    CHECK(hard.value.sum() == 1.0);
  }
}

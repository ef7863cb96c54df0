#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sketchabs/core.hpp"
#include "test_util.hpp"

using namespace sketchabs;

TEST_CASE("row normalization") {
  Matrix m(3, 2);
  m << 3, 4, 0, 0, 1, 0;
  const Matrix n = row_l2_normalize(m);
  CHECK(n(0, 0) == doctest::Approx(0.6));
  CHECK(n(0, 1) == doctest::Approx(0.8));
  CHECK(n(1, 0) == 0.0);
  CHECK(n(1, 1) == 0.0);
  CHECK(n(2, 0) == 1.0);
  CHECK(n(2, 1) == 0.0);
}

TEST_CASE("normalized rows have unit norm") {
  std::mt19937_64 rng(3);
  const Matrix n = row_l2_normalize(testutil::random_matrix(9, 7, rng));
  for (int r = 0; r < 9; ++r) CHECK(std::abs(n.row(r).norm() - 1.0) < 1e-6);
}

TEST_CASE("normalization rejects NaN") {
  Matrix m = Matrix::Ones(2, 2);
  m(1, 1) = std::nan("");
  CHECK_THROWS_AS(row_l2_normalize(m), InvalidInput);
}

TEST_CASE("normalization backward matches finite differences") {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 10; ++rep) {
    const Matrix raw = testutil::random_matrix(9, 4, rng);
    const Matrix w = testutil::random_matrix(9, 4, rng);
    auto f = [&](const Matrix& x) { return row_l2_normalize(x).cwiseProduct(w).sum(); };
    const Matrix a = row_l2_normalize_backward(raw, w);
    CHECK(testutil::rel_error(a, testutil::numeric_grad(f, raw)) < 1e-6);
  }
}

TEST_CASE("masked distance on unit gaps") {
  const Matrix ones = Matrix::Ones(9, 1);
  const Matrix zeros = Matrix::Zero(9, 1);
  RowMask mask = RowMask::Zero();
  mask.head(3).setOnes();
  CHECK(matrix_distance(ones, zeros, mask) == doctest::Approx(std::sqrt(3.0)));
  CHECK(matrix_distance(ones, zeros) == doctest::Approx(3.0));
  CHECK(matrix_distance(ones, zeros, full_mask()) == matrix_distance(ones, zeros));
  CHECK(matrix_distance(ones, ones, mask) == 0.0);
}

TEST_CASE("distance shape checks") {
  CHECK_THROWS_AS(matrix_distance(Matrix::Zero(9, 2), Matrix::Zero(9, 3)), InvalidInput);
  CHECK_THROWS_AS(matrix_distance(Matrix::Zero(8, 2), Matrix::Zero(8, 2)), InvalidInput);
}

TEST_CASE("distance gradient") {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 10; ++rep) {
    const Matrix a = testutil::random_matrix(9, 3, rng);
    const Matrix b = testutil::random_matrix(9, 3, rng);
    RowMask mask;
    for (int r = 0; r < 9; ++r) mask[r] = 0.2 + 0.1 * r;
    const auto g = matrix_distance_grad(a, b, mask);
    CHECK(g.value == doctest::Approx(matrix_distance(a, b, mask)));
    auto fa = [&](const Matrix& x) { return matrix_distance(x, b, mask); };
    auto fb = [&](const Matrix& x) { return matrix_distance(a, x, mask); };
    auto fm = [&](const Matrix& x) { return matrix_distance(a, b, RowMask(x)); };
    CHECK(testutil::rel_error(g.d_m1, testutil::numeric_grad(fa, a)) < 1e-6);
    CHECK(testutil::rel_error(g.d_m2, testutil::numeric_grad(fb, b)) < 1e-6);
    CHECK(testutil::rel_error(Matrix(g.d_mask), testutil::numeric_grad(fm, Matrix(mask))) < 1e-6);
  }
}

TEST_CASE("zero distance has zero gradient") {
  const Matrix a = Matrix::Constant(9, 2, 0.5);
  const auto g = matrix_distance_grad(a, a, full_mask());
  CHECK(g.value == 0.0);
  CHECK(g.d_m1.isZero(0.0));
  CHECK(g.d_m2.isZero(0.0));
}

TEST_CASE("pairwise distances") {
  std::vector<FeatureMatrix> s{Matrix::Zero(9, 2), Matrix::Zero(9, 2)};
  s[0](0, 0) = 1;
  s[1](0, 1) = 1;
  std::vector<RowMask> masks(2, full_mask());
  const auto d = pairwise_batch_distances(s, s, masks);
  CHECK(d(0, 0) == 0.0);
  CHECK(d(1, 1) == 0.0);
  CHECK(d(0, 1) == doctest::Approx(std::sqrt(2.0)));
  CHECK(d(1, 0) == doctest::Approx(std::sqrt(2.0)));

  std::vector<FeatureMatrix> one{s[0]};
  std::vector<RowMask> m1{full_mask()};
  CHECK(pairwise_batch_distances(one, one, m1)(0, 0) == 0.0);
}

TEST_CASE("pairwise distances are permutation equivariant") {
  std::mt19937_64 rng(2);
  std::vector<FeatureMatrix> s, p;
  for (int i = 0; i < 4; ++i) {
    s.push_back(testutil::random_matrix(9, 3, rng));
    p.push_back(testutil::random_matrix(9, 3, rng));
  }
  std::vector<RowMask> masks(4, full_mask());
  const auto d = pairwise_batch_distances(s, p, masks);
  std::vector<FeatureMatrix> q{p[2], p[0], p[3], p[1]};
  const auto e = pairwise_batch_distances(s, q, masks);
  const int perm[] = {2, 0, 3, 1};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) CHECK(e(i, j) == d(i, perm[j]));
}

TEST_CASE("embedding config validation") {
  EmbeddingConfig c;
  CHECK_NOTHROW(c.validate());
  c.group_sizes = {3, 3, 2};
  CHECK_THROWS_AS(c.validate(), InvalidInput);
  c.group_sizes = {3, 0, 6};
  CHECK_THROWS_AS(c.validate(), InvalidInput);
  c = EmbeddingConfig{};
  c.d = 0;
  CHECK_THROWS_AS(c.validate(), InvalidInput);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sketchabs/aux_losses.hpp"
#include "test_util.hpp"

using namespace sketchabs;

TEST_CASE("triplet values") {
  Matrix s = Matrix::Zero(9, 2);
  Matrix n = s;
  n(0, 0) = 0.2;
  CHECK(triplet_loss(s, s, n, 0.3).loss == doctest::Approx(0.1));
  CHECK(triplet_loss(s, s, s, 0.3).loss == doctest::Approx(0.3));
  n(0, 0) = 0.5;
  const auto off = triplet_loss(s, s, n, 0.3);
  CHECK(off.loss == 0.0);
  CHECK(off.d_anchor.isZero(0.0));
  CHECK(triplet_hinge(0.1, 0.2, 0.3) == doctest::Approx(0.2));
  CHECK(triplet_hinge(0.1, 0.5, 0.3) == 0.0);
}

TEST_CASE("triplet gradients away from the kink") {
  std::mt19937_64 rng(41);
  int checked = 0;
  while (checked < 20) {
    const Matrix a = testutil::random_matrix(9, 3, rng);
    const Matrix p = testutil::random_matrix(9, 3, rng);
    const Matrix n = testutil::random_matrix(9, 3, rng);
    RowMask mask = RowMask::Zero();
    mask.head(3 * (1 + checked % 3)).setOnes();
    const double margin = 1.0;
    const double pre = margin + matrix_distance(a, p, mask) - matrix_distance(a, n, mask);
    if (std::abs(pre) < 1e-3) continue;
    const auto r = triplet_loss(a, p, n, margin, mask);
    auto fa = [&](const Matrix& x) { return triplet_loss(x, p, n, margin, mask).loss; };
    auto fp = [&](const Matrix& x) { return triplet_loss(a, x, n, margin, mask).loss; };
    auto fn = [&](const Matrix& x) { return triplet_loss(a, p, x, margin, mask).loss; };
    CHECK(testutil::rel_error(r.d_anchor, testutil::numeric_grad(fa, a)) < 1e-6);
    CHECK(testutil::rel_error(r.d_positive, testutil::numeric_grad(fp, p)) < 1e-6);
    CHECK(testutil::rel_error(r.d_negative, testutil::numeric_grad(fn, n)) < 1e-6);
    ++checked;
  }
}

TEST_CASE("abstraction cross-entropy values") {
  CHECK(abstraction_ce_loss(Vec3(0, 1, 0), Vec3(0, 1, 0)).loss == 0.0);
  CHECK(abstraction_ce_loss(Vec3::Constant(1.0 / 3), Vec3(1, 0, 0)).loss ==
        doctest::Approx(0.366204).epsilon(1e-6));
  const double a = abstraction_ce_loss(Vec3(0.2, 0.5, 0.3), Vec3(0, 1, 0)).loss;
  const double b = abstraction_ce_loss(Vec3(0.45, 0.5, 0.05), Vec3(0, 1, 0)).loss;
  CHECK(a == b);
  const auto floor = abstraction_ce_loss(Vec3(1, 0, 0), Vec3(0, 0, 1));
  CHECK(std::isfinite(floor.loss));
  CHECK(floor.loss == doctest::Approx(-std::log(1e-12) / 3));
}

TEST_CASE("cross-entropy gradient through softmax") {
  std::mt19937_64 rng(43);
  for (int rep = 0; rep < 20; ++rep) {
    const Vec3 logits = testutil::random_matrix(3, 1, rng);
    const Vec3 gt = one_hot(static_cast<AbstractionLevel>(rep % 3));
    auto f = [&](const Matrix& l) { return abstraction_ce_loss(softmax(Vec3(l)), gt).loss; };
    const auto r = abstraction_ce_loss(softmax(logits), gt);
    CHECK(testutil::rel_error(Matrix(r.d_logits), testutil::numeric_grad(f, Matrix(logits))) < 1e-6);
    auto fp = [&](const Matrix& p) { return abstraction_ce_loss(Vec3(p), gt).loss; };
    const Vec3 p = softmax(logits);
    CHECK(testutil::rel_error(Matrix(r.d_probs), testutil::numeric_grad(fp, Matrix(p), 1e-8)) < 1e-5);
  }
}

TEST_CASE("latent padding") {
  std::mt19937_64 rng(1);
  const Matrix m = testutil::random_matrix(9, 4, rng);
  for (int n : {3, 6, 9}) {
    std::mt19937_64 r1(5), r2(5);
    const Matrix a = pad_latent(m, n, r1);
    const Matrix b = pad_latent(m, n, r2);
    CHECK(a.rows() == 14);
    CHECK(a.topRows(n) == m.topRows(n));
    CHECK(a == b);
    CHECK(!a.bottomRows(14 - n).isZero(0.0));
  }
  CHECK_THROWS_AS(pad_latent(m, 4, rng), InvalidInput);
}

TEST_CASE("reconstruction with trivial generators") {
  const int d = 4;
  const LinearGenerator zero(Matrix::Zero(d, 14 * d), d);
  const Matrix z = Matrix::Ones(14, d);
  CHECK(reconstruction_loss(z, z, Vector::Zero(d), zero, 9).loss == 0.0);

  Matrix a = Matrix::Zero(d, 14 * d);
  a.leftCols(d).setIdentity();
  const LinearGenerator first_row(a, d);
  const Vector target = Vector::LinSpaced(d, 1, 2);
  Matrix latent = Matrix::Zero(14, d);
  latent.row(0) = target.transpose();
  CHECK(reconstruction_loss(latent, latent, target, first_row, 3).loss == 0.0);
}

TEST_CASE("reconstruction against a random linear map") {
  std::mt19937_64 rng(3);
  const int d = 5;
  const LinearGenerator gen(d, 7, 99);
  const Matrix zs = testutil::random_matrix(14, d, rng);
  const Matrix zp = testutil::random_matrix(14, d, rng);
  const Vector p = testutil::random_matrix(7, 1, rng);
  Vector fs(14 * d), fp(14 * d);
  for (int r = 0; r < 14; ++r)
    for (int c = 0; c < d; ++c) {
      fs[r * d + c] = zs(r, c);
      fp[r * d + c] = zp(r, c);
    }
  const double hand = (p - gen.matrix() * fs).norm() + (p - gen.matrix() * fp).norm();
  CHECK(reconstruction_loss(zs, zp, p, gen, 9).loss == doctest::Approx(hand).epsilon(1e-12));
}

TEST_CASE("generator entries have variance 1/(14 d)") {
  const LinearGenerator gen(8, 200, 5);
  const Matrix& a = gen.matrix();
  const double var = a.array().square().mean();
  CHECK(var == doctest::Approx(1.0 / (14 * 8)).epsilon(0.05));
}

TEST_CASE("reconstruction gradient reaches only the unpadded rows") {
  std::mt19937_64 rng(7);
  const int d = 3;
  const LinearGenerator gen(d, 6, 1);
  for (int rep = 0; rep < 20; ++rep) {
    const int n = 3 * (1 + rep % 3);
    const Matrix zs = testutil::random_matrix(14, d, rng);
    const Matrix zp = testutil::random_matrix(14, d, rng);
    const Vector p = testutil::random_matrix(6, 1, rng);
    const auto r = reconstruction_loss(zs, zp, p, gen, n);
    auto fs = [&](const Matrix& x) { return reconstruction_loss(x, zp, p, gen, n).loss; };
    auto fp = [&](const Matrix& x) { return reconstruction_loss(zs, x, p, gen, n).loss; };
    Matrix ns = testutil::numeric_grad(fs, zs);
    Matrix np = testutil::numeric_grad(fp, zp);
    ns.bottomRows(14 - n).setZero();
    np.bottomRows(14 - n).setZero();
    CHECK(testutil::rel_error(r.d_latent_sketch, ns) < 1e-6);
    CHECK(testutil::rel_error(r.d_latent_photo, np) < 1e-6);
    CHECK(r.d_latent_sketch.bottomRows(14 - n).isZero(0.0));
  }
}

TEST_CASE("reconstruction descent decreases the loss") {
  std::mt19937_64 rng(9);
  const int d = 4;
  const LinearGenerator gen(d, 10, 2);
  Matrix z = testutil::random_matrix(14, d, rng);
  const Vector p = testutil::random_matrix(10, 1, rng);
  double prev = reconstruction_loss(z, z, p, gen, 9).loss;
  for (int step = 0; step < 100; ++step) {
    const auto r = reconstruction_loss(z, z, p, gen, 9);
    z -= 0.01 * r.d_latent_sketch;
    const double now = reconstruction_loss(z, z, p, gen, 9).loss;
    CHECK(now < prev);
    prev = now;
  }
}

TEST_CASE("weighted total") {
  const LossComponents c{2.0, -0.6, 0.4};
  CHECK(total_loss(c, LossWeights{}) == doctest::Approx(0.6));
  CHECK(total_loss(c, LossWeights{0, 0, 0}) == 0.0);
  CHECK(total_loss(c, LossWeights{1.0, 2.0, 1.0}) == doctest::Approx(2 * total_loss(c, LossWeights{})));
  CHECK_THROWS_AS(LossWeights({-1, 1, 1}).validate(), InvalidInput);
}

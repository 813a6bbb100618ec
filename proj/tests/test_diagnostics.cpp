#include <doctest.h>

#include <cmath>
#include <numeric>

#include "diaurec/diagnostics.hpp"
#include "diaurec/error.hpp"
#include "diaurec/losses.hpp"
#include "support.hpp"

using namespace diaurec;

namespace {

const KernelConvention kDefault{false}, kUnit{true};

double row_dot(const Matrix& a, std::size_t i, const Matrix& b, std::size_t j) { return dot(a.row(i), b.row(j)); }

Matrix random_rotation(std::size_t d, Rng& rng) {
  // Gram-Schmidt on a Gaussian matrix
  Matrix q = testing::random_matrix(d, d, rng);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      const double p = row_dot(q, i, q, j);
      for (std::size_t k = 0; k < d; ++k) q(i, k) -= p * q(j, k);
    }
    const double n = norm(q.row(i));
    for (double& x : q.row(i)) x /= n;
  }
  return q;
}

}  // namespace

TEST_CASE("conventions") {
  CHECK(kDefault.gradient_coefficient() == 8.0);
  CHECK(kUnit.gradient_coefficient() == 4.0);
  CHECK(kDefault.describe() != kUnit.describe());
}

TEST_CASE("closed-form uniformity gradient") {
  const Matrix same(2, 3, std::vector<double>{0, 1, 0, 0, 1, 0});
  CHECK(testing::max_abs(uniform_grad_closed_form(same)) == 0.0);

  // antipodal pair: π = ½ each way, so grad_0 = −c·½·(z_0 − z_1)
  const Matrix anti(2, 2, std::vector<double>{1, 0, -1, 0});
  const Matrix g = uniform_grad_closed_form(anti);
  CHECK(g(0, 0) == doctest::Approx(-8.0));
  CHECK(g(0, 1) == doctest::Approx(0.0));
  CHECK(uniform_grad_closed_form(anti, kUnit)(0, 0) == doctest::Approx(-4.0));
  // descending moves point 0 further from point 1
  CHECK(-g(0, 0) * (anti(0, 0) - anti(1, 0)) > 0.0);

  Rng rng(3);
  for (int t = 0; t < 10; ++t) {
    const Matrix z = testing::random_unit_rows(5, 3, rng);
    CHECK(uniform_value(z) == doctest::Approx(uniform_loss(z).value).epsilon(1e-13));
    const Matrix fd = testing::numeric_grad([](const Matrix& m) { return uniform_loss(m).value; }, z, 1e-5);
    CHECK(max_abs_diff(uniform_grad_closed_form(z), fd) < 1e-6);
    CHECK(max_abs_diff(uniform_grad_closed_form(z), uniform_loss(z).grads[0]) < 1e-12);
    for (auto conv : {kDefault, kUnit}) {
      const Matrix fdc = uniform_grad_numeric(z, 1e-5, conv);
      CHECK(max_abs_diff(uniform_grad_closed_form(z, conv), fdc) < 1e-6);
    }
  }
  CHECK_THROWS_AS(uniform_grad_closed_form(Matrix(1, 3, 1.0)), Error);
}

TEST_CASE("pair weights") {
  Rng rng(4);
  const Matrix z = testing::random_unit_rows(6, 4, rng);
  const Matrix pi = pair_weights(z);
  double s = 0.0;
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(pi(i, i) == 0.0);
    for (std::size_t j = 0; j < 6; ++j) {
      s += pi(i, j);
      CHECK(pi(i, j) == doctest::Approx(pi(j, i)).epsilon(1e-15));
    }
  }
  CHECK(s == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("Laplacian form") {
  Rng rng(5);
  const Matrix z = testing::random_unit_rows(7, 3, rng);
  for (auto conv : {kDefault, kUnit}) {
    const LaplacianForm lf = laplacian_form(z, conv);
    const Matrix ones(7, 1, 1.0);
    CHECK(testing::max_abs(matmul(lf.laplacian, ones)) < 1e-15);
    const Matrix direct = matmul(lf.laplacian, z) * -conv.gradient_coefficient();
    CHECK(max_abs_diff(direct, uniform_grad_closed_form(z, conv)) < 1e-10);
    CHECK(max_abs_diff(lf.gradient, direct) < 1e-12);
    // rows sum to zero
    Matrix col(1, 7, 1.0);
    CHECK(testing::max_abs(matmul(col, lf.gradient)) < 1e-8);
  }

  // equilateral triangle in the plane
  const double s3 = std::sqrt(3.0) / 2.0;
  const Matrix tri(3, 2, std::vector<double>{1, 0, -0.5, s3, -0.5, -s3});
  const LaplacianForm t = laplacian_form(tri);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      if (i != j) CHECK(t.weights(i, j) == doctest::Approx(1.0 / 6.0).epsilon(1e-14));
  // centroid is the origin: the descent direction −grad points outward
  for (std::size_t i = 0; i < 3; ++i) {
    const double outward = -(t.gradient(i, 0) * tri(i, 0) + t.gradient(i, 1) * tri(i, 1));
    CHECK(outward > 0.0);
    const double cross = t.gradient(i, 0) * tri(i, 1) - t.gradient(i, 1) * tri(i, 0);
    CHECK(std::abs(cross) < 1e-14);
  }
}

TEST_CASE("Laplacian energy") {
  const Matrix same(3, 2, std::vector<double>{0, 1, 0, 1, 0, 1});
  CHECK(laplacian_energy(same) == 0.0);
  const Matrix anti(2, 2, std::vector<double>{1, 0, -1, 0});
  CHECK(laplacian_energy(anti) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(laplacian_energy(anti, kUnit) == doctest::Approx(2.0).epsilon(1e-14));

  Rng rng(6);
  for (int t = 0; t < 10; ++t) {
    const Matrix z = testing::random_unit_rows(6, 4, rng);
    const Matrix pi = pair_weights(z);
    double pairwise = 0.0;
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t j = 0; j < 6; ++j) pairwise += 0.5 * pi(i, j) * squared_distance(z.row(i), z.row(j));
    const double e = laplacian_energy(z);
    CHECK(std::abs(e - pairwise) < 1e-10);
    CHECK(e >= 0.0);
    const Matrix rotated = matmul_nt(z, random_rotation(4, rng));
    CHECK(std::abs(laplacian_energy(rotated) - e) < 1e-10);
  }
  CHECK_THROWS_AS(laplacian_energy(Matrix(1, 2, 1.0)), Error);
}

TEST_CASE("tangent projection matches normalized finite differences") {
  Rng rng(7);
  const Matrix z = testing::random_unit_rows(5, 3, rng);
  const Matrix tangent = tangent_project(uniform_grad_closed_form(z), z);
  for (std::size_t i = 0; i < 5; ++i) CHECK(std::abs(dot(tangent.row(i), z.row(i))) < 1e-12);
  const Matrix riemannian =
      testing::numeric_grad([](const Matrix& m) { return uniform_value(normalize_rows(m)); }, z, 1e-5);
  CHECK(max_abs_diff(tangent, riemannian) < 1e-6);
}

TEST_CASE("measure_geometry") {
  const Matrix one(4, 3, std::vector<double>{0, 0, 1, 0, 0, 1, 0, 0, 1, 0, 0, 1});
  EdgeList pairs;
  pairs.user_count = pairs.item_count = 4;
  pairs.pairs = {{0, 1}, {1, 2}, {3, 0}};
  const GeometryReport flat = measure_geometry(one, one, pairs, 16, 1);
  CHECK(flat.alignment == 0.0);
  CHECK(flat.uniformity_user == 0.0);
  CHECK(std::abs(flat.energy_item) < 1e-15);
  CHECK(flat.user_sample == 4);
  CHECK(flat.pair_sample == 3);
  CHECK(flat.nn_cosine_histogram.back() == 4);

  const Matrix basis = Matrix::identity(5);
  EdgeList diag;
  diag.user_count = diag.item_count = 5;
  for (std::size_t i = 0; i < 5; ++i) diag.pairs.push_back({i, i});
  const GeometryReport ortho = measure_geometry(basis, basis, diag, 16, 1);
  CHECK(ortho.uniformity_user == doctest::Approx(-4.0).epsilon(1e-14));
  CHECK(ortho.uniformity_item == doctest::Approx(-4.0).epsilon(1e-14));
  CHECK(ortho.alignment == 0.0);
  // each item's nearest neighbour has cosine 0: bin of [0, 0.125)
  CHECK(ortho.nn_cosine_histogram[8] == 5);

  Rng rng(8);
  const Matrix u = testing::random_unit_rows(300, 4, rng), v = testing::random_unit_rows(200, 4, rng);
  const EdgeList e = testing::random_edges(300, 200, 900, rng);
  const GeometryReport a = measure_geometry(u, v, e, 64, 9), b = measure_geometry(u, v, e, 64, 9);
  CHECK(a.user_sample == 64);
  CHECK(a.alignment == b.alignment);
  CHECK(a.grad_norm_item == b.grad_norm_item);
  CHECK(a.nn_cosine_histogram == b.nn_cosine_histogram);
  const std::size_t binned = std::accumulate(a.nn_cosine_histogram.begin(), a.nn_cosine_histogram.end(), std::size_t{0});
  CHECK(binned == a.item_sample);
  CHECK(a.energy_user >= 0.0);

  CHECK_THROWS_AS(measure_geometry(u, v, e, 1, 9), Error);
}

TEST_CASE("gradient suite passes for both conventions") {
  Rng rng(10);
  const std::vector<Matrix> extra = {testing::random_unit_rows(40, 8, rng)};
  for (auto conv : {kDefault, kUnit}) {
    const GradientCheckReport r = run_gradient_suite(20, 11, conv, extra);
    CHECK(r.passed);
    CHECK(r.failures.empty());
    CHECK(r.instances == 21);
    CHECK(r.max_fd_error < 1e-6);
    CHECK(r.max_closed_form_gap < 1e-10);
    CHECK(r.max_row_sum < 1e-8);
    CHECK(r.max_energy_gap < 1e-10);
    CHECK(r.max_rotation_gap < 1e-10);
    CHECK(r.max_tangent_error < 1e-6);
  }
}

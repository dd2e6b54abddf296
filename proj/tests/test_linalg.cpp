#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "cyclemon/error.hpp"
#include "cyclemon/linalg.hpp"
#include "cyclemon/rng.hpp"

using namespace cyclemon;
using la::Matrix;

namespace {

Matrix random_spd(Rng& rng, std::size_t n) {
  Matrix g(n, n);
  for (double& v : g.a) v = rng.uniform(-1.0, 1.0);
  Matrix a = la::matmul(la::transpose(g), g);
  for (std::size_t i = 0; i < n; ++i) a(i, i) += static_cast<double>(n);
  return a;
}

Matrix random_sym(Rng& rng, std::size_t n) {
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      const double v = rng.uniform(-3.0, 3.0);
      a(i, j) = v;
      a(j, i) = v;
    }
  return a;
}

double frob(const Matrix& m) {
  double s = 0;
  for (double v : m.a) s += v * v;
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("matmul / transpose / matvec basics") {
  Matrix x(2, 3);
  x.a = {1, 2, 3, 4, 5, 6};
  Matrix y(3, 2);
  y.a = {7, 8, 9, 10, 11, 12};
  const Matrix p = la::matmul(x, y);
  REQUIRE(p.rows == 2);
  REQUIRE(p.cols == 2);
  CHECK(p(0, 0) == 58);
  CHECK(p(0, 1) == 64);
  CHECK(p(1, 0) == 139);
  CHECK(p(1, 1) == 154);

  const Matrix t = la::transpose(x);
  CHECK(t.rows == 3);
  CHECK(t(0, 1) == 4);
  CHECK(t(2, 0) == 3);

  const std::vector<double> v = la::matvec(x, {1, 0, -1});
  CHECK(v[0] == -2);
  CHECK(v[1] == -2);

  const Matrix id = Matrix::identity(3);
  CHECK(frob(la::matmul(id, y)) == doctest::Approx(frob(y)));
}

TEST_CASE("cholesky reconstructs and rejects indefinite input") {
  Rng rng(31);
  for (std::size_t n : {1u, 2u, 5u, 12u}) {
    const Matrix a = random_spd(rng, n);
    const Matrix l = la::cholesky(a);
    // L is lower triangular
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) CHECK(l(i, j) == 0.0);
    const Matrix back = la::matmul(l, la::transpose(l));
    Matrix diff = back;
    for (std::size_t i = 0; i < diff.a.size(); ++i) diff.a[i] -= a.a[i];
    CHECK(frob(diff) <= 1e-10 * std::max(1.0, frob(a)));
  }

  Matrix bad(2, 2);
  bad.a = {1, 2, 2, 1};  // eigenvalues 3, -1
  CHECK_THROWS_AS(la::cholesky(bad), Error);
}

TEST_CASE("triangular solves invert the factor") {
  Rng rng(32);
  const Matrix a = random_spd(rng, 6);
  const Matrix l = la::cholesky(a);
  std::vector<double> b(6);
  for (double& v : b) v = rng.uniform(-1.0, 1.0);

  const std::vector<double> y = la::solve_lower(l, b);
  const std::vector<double> ly = la::matvec(l, y);
  for (std::size_t i = 0; i < 6; ++i)
    CHECK(ly[i] == doctest::Approx(b[i]).epsilon(1e-12));

  const std::vector<double> x = la::solve_lower_t(l, b);
  const std::vector<double> ltx = la::matvec(la::transpose(l), x);
  for (std::size_t i = 0; i < 6; ++i)
    CHECK(ltx[i] == doctest::Approx(b[i]).epsilon(1e-12));
}

TEST_CASE("invert_spd gives A * inv(A) = I") {
  Rng rng(33);
  for (std::size_t n : {1u, 3u, 8u}) {
    const Matrix a = random_spd(rng, n);
    const Matrix inv = la::invert_spd(a);
    const Matrix prod = la::matmul(a, inv);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        CHECK(prod(i, j) == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1)
                                .scale(1e-10));
  }
}

TEST_CASE("jacobi_eigen: residuals, orthonormality, descending order") {
  Rng rng(34);
  for (std::size_t n : {2u, 4u, 9u}) {
    const Matrix a = random_sym(rng, n);
    const la::EigenSym e = la::jacobi_eigen(a);
    REQUIRE(e.values.size() == n);
    for (std::size_t j = 0; j + 1 < n; ++j) CHECK(e.values[j] >= e.values[j + 1]);

    for (std::size_t j = 0; j < n; ++j) {
      std::vector<double> v(n), av(n, 0.0);
      for (std::size_t i = 0; i < n; ++i) v[i] = e.vectors(i, j);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < n; ++k) av[i] += a(i, k) * v[k];
      double resid = 0, norm = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const double r = av[i] - e.values[j] * v[i];
        resid += r * r;
        norm += v[i] * v[i];
      }
      CHECK(std::sqrt(resid) <= 1e-8);
      CHECK(std::sqrt(norm) == doctest::Approx(1.0).epsilon(1e-10));
    }
  }
}

TEST_CASE("generalized_eigen_spd solves B w = lambda W w") {
  Rng rng(35);
  for (std::size_t n : {2u, 5u, 8u}) {
    Matrix b = random_sym(rng, n);
    // make B PSD-ish but general symmetric is fine for the residual check
    const Matrix w = random_spd(rng, n);
    const la::EigenSym e = la::generalized_eigen_spd(b, w);
    REQUIRE(e.values.size() == n);

    for (std::size_t j = 0; j < n; ++j) {
      std::vector<double> v(n), bv(n, 0.0), wv(n, 0.0);
      double norm = 0, maxc = 0;
      std::size_t maxi = 0;
      for (std::size_t i = 0; i < n; ++i) {
        v[i] = e.vectors(i, j);
        norm += v[i] * v[i];
        if (std::fabs(v[i]) > maxc) {
          maxc = std::fabs(v[i]);
          maxi = i;
        }
      }
      CHECK(std::sqrt(norm) == doctest::Approx(1.0).epsilon(1e-10));
      CHECK(v[maxi] > 0.0);  // deterministic sign
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < n; ++k) {
          bv[i] += b(i, k) * v[k];
          wv[i] += w(i, k) * v[k];
        }
      double resid = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const double r = bv[i] - e.values[j] * wv[i];
        resid += r * r;
      }
      CHECK(std::sqrt(resid) <= 1e-8 * std::max(1.0, std::fabs(e.values[j])));
    }
  }
}

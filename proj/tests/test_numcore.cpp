#include <doctest.h>

#include <cmath>
#include <set>

#include "imaginet/errors.hpp"
#include "imaginet/numcore.hpp"
#include "imaginet/rng.hpp"

using namespace imaginet;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  Matrix m(r, c);
  for (double& x : m.span()) x = rng.uniform(-1.0, 1.0);
  return m;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a.span()[i] - b.span()[i]));
  return d;
}

}  // namespace

TEST_CASE("matmul hand examples") {
  const Matrix a{{1, 2}, {3, 4}};
  const Matrix b{{1}, {1}};
  CHECK(matmul(a, b) == Matrix{{3}, {7}});

  Rng rng(3);
  const Matrix m = random_matrix(3, 4, rng);
  CHECK(matmul(Matrix::identity(3), m) == m);
  CHECK(matmul(m, Matrix(4, 2)) == Matrix(3, 2));
}

TEST_CASE("matmul shape mismatch names both shapes") {
  try {
    matmul(Matrix(2, 3), Matrix(2, 3));
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("2x3") != std::string::npos);
  }
}

TEST_CASE("matmul is associative on random triples") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(16), k = 1 + rng.below(16), l = 1 + rng.below(16),
                      m = 1 + rng.below(16);
    const Matrix a = random_matrix(n, k, rng), b = random_matrix(k, l, rng),
                 c = random_matrix(l, m, rng);
    const Matrix left = matmul(matmul(a, b), c);
    const Matrix right = matmul(a, matmul(b, c));
    double scale = 1.0;
    for (double x : left.span()) scale = std::max(scale, std::abs(x));
    CHECK(max_abs_diff(left, right) / scale < 1e-9);
  }
}

TEST_CASE("parallel kernels agree with the serial reference") {
  Rng rng(5);
  const std::size_t shapes[][3] = {{1, 1, 1}, {7, 3, 5}, {64, 48, 40}, {130, 70, 90}};
  for (const auto& [n, k, m] : shapes) {
    const Matrix a = random_matrix(n, k, rng), b = random_matrix(k, m, rng);
    CHECK(max_abs_diff(matmul(a, b), matmul_reference(a, b)) < 1e-12);
    CHECK(max_abs_diff(gram(a), gram_reference(a)) < 1e-12);
    CHECK(max_abs_diff(matmul_tn(a.transpose(), b), matmul_reference(a, b)) < 1e-12);
  }
}

TEST_CASE("gram is symmetric") {
  Rng rng(9);
  const Matrix a = random_matrix(20, 6, rng);
  const Matrix g = gram(a);
  REQUIRE(g.rows() == 6);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j) CHECK(g(i, j) == g(j, i));
}

TEST_CASE("vector kernels") {
  const Matrix m{{1, 2, 3}, {4, 5, 6}};
  const Vector x{1, 0, -1};
  CHECK(matvec(m, x.span()) == Vector{-2, -2});

  Vector y{1, 1, 1};
  matvec_t_add(m, Vector{1, 1}.span(), y.span());
  CHECK(y == Vector{6, 8, 10});

  Matrix o(2, 2);
  outer_add(o, Vector{1, 2}.span(), Vector{3, 4}.span(), 0.5);
  CHECK(o == Matrix{{1.5, 2}, {3, 4}});

  Vector z{1, 2};
  axpy(2.0, Vector{1, 1}.span(), z.span());
  CHECK(z == Vector{3, 4});
  CHECK(dot(z.span(), z.span()) == 25.0);
  CHECK(norm2(z.span()) == 5.0);
  CHECK_THROWS_AS(dot(z.span(), Vector{1}.span()), ShapeError);
}

TEST_CASE("cosine examples") {
  const Vector u{0.3, -1.2, 2.0};
  CHECK(cosine(u, u) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(cosine(Vector{1, 0}, Vector{0, 1}) == 0.0);
  CHECK(cosine(Vector{1, 0}, Vector{1, 1}) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
  CHECK_THROWS_AS(cosine(Vector{0, 0}, Vector{1, 1}), UndefinedSimilarityError);
  CHECK_THROWS_AS(cosine(Vector{1, 0}, Vector{1, 0, 0}), ShapeError);
}

TEST_CASE("cosine is invariant to positive rescaling") {
  Rng rng(21);
  for (int trial = 0; trial < 500; ++trial) {
    Vector u(8), v(8);
    for (double& x : u) x = rng.uniform(-1, 1);
    for (double& x : v) x = rng.uniform(-1, 1);
    const double a = std::exp(rng.uniform(-5, 5)), b = std::exp(rng.uniform(-5, 5));
    Vector su = u, sv = v;
    for (double& x : su) x *= a;
    for (double& x : sv) x *= b;
    CHECK(std::abs(cosine(su, sv) - cosine(u, v)) <= 1e-12);
    const double c = cosine(u, v);
    CHECK(c >= -1.0);
    CHECK(c <= 1.0);
  }
}

TEST_CASE("init_matrix range and reproducibility") {
  Rng a(42), b(42), c(43);
  const Matrix m1 = init_matrix(10, 12, 0.1, a);
  const Matrix m2 = init_matrix(10, 12, 0.1, b);
  const Matrix m3 = init_matrix(10, 12, 0.1, c);
  for (double x : m1.span()) {
    CHECK(x >= -0.1);
    CHECK(x <= 0.1);
  }
  CHECK(m1 == m2);
  CHECK_FALSE(m1 == m3);
  Rng d(1);
  CHECK_THROWS_AS(init_matrix(2, 2, 0.0, d), ConfigError);
  CHECK_THROWS_AS(init_matrix(2, 2, -1.0, d), ConfigError);
}

TEST_CASE("finiteness scan") {
  CHECK(all_finite(Matrix{{1, 2}, {3, 4}}));
  CHECK_FALSE(all_finite(Vector{1, NAN}));
  CHECK_FALSE(all_finite(Vector{INFINITY}));
}

TEST_CASE("solve_spd against a reconstructed right-hand side") {
  Rng rng(8);
  const Matrix r = random_matrix(12, 6, rng);
  Matrix a = gram(r);
  for (std::size_t i = 0; i < 6; ++i) a(i, i) += 0.5;
  const Matrix x = random_matrix(6, 3, rng);
  const Matrix b = matmul(a, x);
  CHECK(max_abs_diff(solve_spd(a, b), x) < 1e-10);
  CHECK_THROWS_AS(solve_spd(Matrix(2, 2), Matrix(2, 1)), RankDeficiencyError);
}

TEST_CASE("ragged initializer is rejected") {
  CHECK_THROWS_AS((Matrix{{1, 2}, {3}}), ShapeError);
}

TEST_CASE("rng streams") {
  Rng a(7), b(7);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  // First outputs of the 64-bit Mersenne Twister are fixed by its definition.
  Rng std_seed(5489);
  CHECK(std_seed.next_u64() == 14514284786278117030ULL);

  Rng r(1);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 10000; ++i) {
    const std::uint64_t x = r.below(7);
    CHECK(x < 7);
    seen.insert(x);
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  CHECK(seen.size() == 7);

  Rng s(1);
  CHECK(s.split(1).next_u64() != s.split(2).next_u64());
  CHECK(s.split(1).next_u64() == Rng(1).split(1).next_u64());
}

TEST_CASE("normal draws have unit moments") {
  Rng r(99);
  double sum = 0.0, sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    sum += x;
    sq += x * x;
  }
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(std::abs(sq / n - 1.0) < 0.02);
}

TEST_CASE("shuffle is a permutation") {
  Rng r(4);
  std::vector<int> v{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  r.shuffle(std::span<int>(v));
  std::multiset<int> s(v.begin(), v.end());
  CHECK(s == std::multiset<int>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
}

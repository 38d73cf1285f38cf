#include <cmath>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "pucl/errors.hpp"
#include "pucl/numerics.hpp"

using namespace pucl;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, RngStream& rng) {
  Matrix m(r, c);
  for (double& v : m.data()) v = rng.normal();
  return m;
}

Matrix naive_product(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      long double s = 0.0L;
      for (std::size_t k = 0; k < a.cols(); ++k) s += static_cast<long double>(a(i, k)) * b(k, j);
      out(i, j) = static_cast<double>(s);
    }
  return out;
}

Matrix transpose(const Matrix& m) {
  Matrix t(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) t(j, i) = m(i, j);
  return t;
}

double relative_max_error(const Matrix& got, const Matrix& want) {
  double err = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i) {
    err = std::max(err, std::abs(got.data()[i] - want.data()[i]));
    scale = std::max(scale, std::abs(want.data()[i]));
  }
  return scale == 0.0 ? err : err / scale;
}

}  // namespace

TEST_CASE("log_sum_exp examples") {
  CHECK(log_sum_exp(std::vector<double>{0, 0, 0}) == doctest::Approx(std::log(3.0)).epsilon(1e-15));
  CHECK(log_sum_exp(std::vector<double>{0, 0, 0}) == doctest::Approx(1.098612).epsilon(1e-6));
  const double big = log_sum_exp(std::vector<double>{1000, 1000});
  CHECK(std::isfinite(big));
  CHECK(big == doctest::Approx(1000.0 + std::log(2.0)).epsilon(1e-15));
  const long double direct = std::log(std::exp(1.0L) + 2.0L);
  CHECK(log_sum_exp(std::vector<double>{1, 0, 0}) == doctest::Approx(static_cast<double>(direct)).epsilon(1e-15));
  CHECK(log_sum_exp(std::vector<double>{1, 0, 0}) == doctest::Approx(1.551445).epsilon(1e-6));
  CHECK(log_sum_exp(std::vector<double>{-1000, -1000}) == doctest::Approx(-1000.0 + std::log(2.0)));
  CHECK_THROWS_AS(log_sum_exp(std::vector<double>{}), ArgumentError);
}

TEST_CASE("log_sum_exp is shift invariant") {
  RngStream rng(11, 0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v(1 + rng.uniform_index(10));
    for (double& x : v) x = 5.0 * rng.normal();
    const double c = 20.0 * (rng.uniform() - 0.5);
    std::vector<double> shifted = v;
    for (double& x : shifted) x += c;
    CHECK(std::abs(log_sum_exp(shifted) - (log_sum_exp(v) + c)) <= 1e-12);
  }
}

TEST_CASE("row_l2_normalize examples and errors") {
  const Matrix a = row_l2_normalize(Matrix{{3, 4}});
  CHECK(a(0, 0) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(a(0, 1) == doctest::Approx(0.8).epsilon(1e-15));
  const Matrix b = row_l2_normalize(Matrix{{1, 0}});
  CHECK(b == Matrix{{1, 0}});
  const Matrix c = row_l2_normalize(Matrix{{1, 1}});
  CHECK(c(0, 0) == doctest::Approx(0.707107).epsilon(1e-6));
  CHECK(c(0, 1) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));

  try {
    row_l2_normalize(Matrix{{1, 2}, {0, 0}});
    FAIL("expected ZeroRowError");
  } catch (const ZeroRowError& e) {
    CHECK(e.row() == 1);
  }
}

TEST_CASE("row_l2_normalize is idempotent bit for bit") {
  RngStream rng(12, 0);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix m = random_matrix(1 + rng.uniform_index(8), 1 + rng.uniform_index(8), rng);
    const Matrix once = row_l2_normalize(m);
    CHECK(row_l2_normalize(once) == once);
    for (std::size_t r = 0; r < once.rows(); ++r)
      CHECK(std::sqrt(dot(once.row(r), once.row(r))) == doctest::Approx(1.0).epsilon(1e-15));
  }
}

TEST_CASE("gemm examples") {
  RngStream rng(13, 0);
  const Matrix m = random_matrix(3, 3, rng);
  CHECK(gemm(Matrix::identity(3), m) == m);
  CHECK(gemm(Matrix{{1, 2}, {3, 4}}, Matrix{{0}, {1}}) == Matrix{{2}, {4}});
  const Matrix a = random_matrix(3, 4, rng);
  const Matrix b = random_matrix(4, 2, rng);
  CHECK(testing::max_abs_diff(gemm(a, b), naive_product(a, b)) <= 1e-12);
  CHECK_THROWS_AS(gemm(a, a), ArgumentError);
  CHECK_THROWS_AS(gemm_tn(a, b), ArgumentError);
  CHECK_THROWS_AS(gemm_nt(a, b), ArgumentError);
}

TEST_CASE("gemm variants match a naive triple loop up to 64x64") {
  RngStream rng(14, 0);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t r = 1 + rng.uniform_index(64);
    const std::size_t k = 1 + rng.uniform_index(64);
    const std::size_t c = 1 + rng.uniform_index(64);
    const Matrix a = random_matrix(r, k, rng);
    const Matrix b = random_matrix(k, c, rng);
    const Matrix want = naive_product(a, b);
    CHECK(relative_max_error(gemm(a, b), want) <= 1e-12);
    CHECK(relative_max_error(gemm_tn(transpose(a), b), want) <= 1e-12);
    CHECK(relative_max_error(gemm_nt(a, transpose(b)), want) <= 1e-12);
  }
}

TEST_CASE("RngStream replay and stream separation") {
  RngStream a(42, 7), b(42, 7), c(42, 8), d(43, 7);
  std::size_t same_c = 0, same_d = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto x = a();
    REQUIRE(x == b());
    same_c += (x == c());
    same_d += (x == d());
  }
  CHECK(same_c == 0);
  CHECK(same_d == 0);
  CHECK(a.counter() == 10000);
}

TEST_CASE("RngStream distributions") {
  RngStream rng(5, 1);
  const int n = 200000;
  double sum = 0.0, sq = 0.0, usum = 0.0;
  std::vector<int> hist(7, 0);
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sq += z * z;
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    usum += u;
    hist[rng.uniform_index(7)]++;
  }
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(std::abs(sq / n - 1.0) < 0.02);
  CHECK(std::abs(usum / n - 0.5) < 0.005);
  for (int h : hist) CHECK(std::abs(h - n / 7.0) < 0.03 * n / 7.0);
  CHECK_THROWS_AS(rng.uniform_index(0), ArgumentError);
}

TEST_CASE("random_permutation and sample_without_replacement") {
  RngStream rng(6, 0);
  auto p = random_permutation(100, rng);
  std::vector<std::size_t> sorted = p;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < 100; ++i) CHECK(sorted[i] == i);
  RngStream again(6, 0);
  CHECK(random_permutation(100, again) == p);

  RngStream rng2(7, 0);
  auto s = sample_without_replacement(50, 20, rng2);
  CHECK(s.size() == 20);
  CHECK(std::is_sorted(s.begin(), s.end()));
  CHECK(std::adjacent_find(s.begin(), s.end()) == s.end());
  CHECK(s.back() < 50);
  CHECK(sample_without_replacement(5, 5, rng2) == std::vector<std::size_t>{0, 1, 2, 3, 4});
  CHECK(sample_without_replacement(5, 0, rng2).empty());
  CHECK_THROWS_AS(sample_without_replacement(3, 4, rng2), ArgumentError);
}

TEST_CASE("Matrix construction") {
  CHECK_THROWS_AS(Matrix(2, 2, std::vector<double>{1, 2, 3}), ArgumentError);
  CHECK_THROWS_AS((Matrix{{1, 2}, {3}}), ArgumentError);
  Matrix m(2, 3, 1.5);
  CHECK(m.all_finite());
  m(1, 2) = std::nan("");
  CHECK_FALSE(m.all_finite());
}

#include <doctest.h>

#include <random>

#include "vocada/kernels.hpp"

using namespace vocada::kernels;

namespace {

std::vector<float> random_rows(std::size_t rows, std::size_t dim, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<float> dist;
  std::vector<float> v(rows * dim);
  for (auto& x : v) {
    x = dist(rng);
  }
  return v;
}

}  // namespace

TEST_CASE("similarity computes row dot products") {
  const std::vector<float> q{1, 0, 0.8f, 0.6f};
  const std::vector<float> c{1, 0, 0, 1, 0.6f, 0.8f};
  std::vector<double> out(6);
  similarity(q, c, 2, out);
  CHECK(out[0] == doctest::Approx(1.0));
  CHECK(out[1] == doctest::Approx(0.0));
  CHECK(out[3] == doctest::Approx(0.8));
  CHECK(out[4] == doctest::Approx(0.6));
  CHECK(out[5] == doctest::Approx(0.96));
}

TEST_CASE("OpenMP similarity matches the serial reference bitwise") {
  for (unsigned seed : {1u, 2u, 3u}) {
    const std::size_t nq = 37 + seed, nc = 11 * seed, dim = 64;
    const auto q = random_rows(nq, dim, seed);
    const auto c = random_rows(nc, dim, seed + 100);
    std::vector<double> a(nq * nc), b(nq * nc);
    similarity(q, c, dim, a);
    similarity_serial(q, c, dim, b);
    CHECK(a == b);
  }
}

TEST_CASE("argmax_rows takes the lowest column on ties") {
  const std::vector<double> s{0.5, 0.9, 0.9, 0.1, 0.0, 0.0, 0.0, 0.0, -1.0, -0.5, -0.5, -2.0};
  const auto a = argmax_rows(s, 4);
  REQUIRE(a.size() == 3);
  CHECK(a[0] == 1);
  CHECK(a[1] == 0);
  CHECK(a[2] == 1);
  CHECK(argmax_rows_serial(s, 4) == a);
}

TEST_CASE("OpenMP argmax matches the serial reference") {
  std::mt19937 rng(5);
  std::uniform_int_distribution<int> d(0, 4);
  std::vector<double> s(500 * 7);
  for (auto& x : s) {
    x = d(rng) / 4.0;  // plenty of ties
  }
  CHECK(argmax_rows(s, 7) == argmax_rows_serial(s, 7));
}

TEST_CASE("topk orders by score then index") {
  const std::vector<double> row{0.8, 0.6, 0.96, 0.8};
  const auto t = topk(row, 3);
  REQUIRE(t.size() == 3);
  CHECK(t[0].first == 2);
  CHECK(t[1].first == 0);
  CHECK(t[2].first == 3);
  CHECK(topk(row, 10).size() == 4);
  CHECK(topk(row, 0).empty());
  CHECK(topk(std::vector<double>{}, 3).empty());
}

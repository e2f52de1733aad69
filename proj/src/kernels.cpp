#include "vocada/kernels.hpp"

#include <algorithm>
#include <cstdint>
#include <stdexcept>

#include <omp.h>

namespace vocada::kernels {

namespace {

inline double dot(const float* a, const float* b, std::size_t dim) {
  double acc = 0.0;
  for (std::size_t d = 0; d < dim; ++d) {
    acc += static_cast<double>(a[d]) * static_cast<double>(b[d]);
  }
  return acc;
}

inline std::size_t argmax(const double* row, std::size_t cols) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < cols; ++c) {
    if (row[c] > row[best]) {
      best = c;
    }
  }
  return best;
}

void check_shapes(std::span<const float> queries, std::span<const float> candidates, std::size_t dim,
                  std::span<double> out) {
  if (dim == 0 || queries.size() % dim != 0 || candidates.size() % dim != 0) {
    throw std::invalid_argument("similarity: buffer sizes are not multiples of dim");
  }
  if (out.size() != (queries.size() / dim) * (candidates.size() / dim)) {
    throw std::invalid_argument("similarity: output buffer has wrong size");
  }
}

}  // namespace

void similarity(std::span<const float> queries, std::span<const float> candidates, std::size_t dim,
                std::span<double> out) {
  check_shapes(queries, candidates, dim, out);
  const auto nq = static_cast<std::int64_t>(queries.size() / dim);
  const std::size_t nc = candidates.size() / dim;

#pragma omp parallel for schedule(static)
  for (std::int64_t q = 0; q < nq; ++q) {
    const float* qv = queries.data() + q * dim;
    double* dst = out.data() + q * nc;
    for (std::size_t c = 0; c < nc; ++c) {
      dst[c] = dot(qv, candidates.data() + c * dim, dim);
    }
  }
}

void similarity_serial(std::span<const float> queries, std::span<const float> candidates, std::size_t dim,
                       std::span<double> out) {
  check_shapes(queries, candidates, dim, out);
  const std::size_t nq = queries.size() / dim;
  const std::size_t nc = candidates.size() / dim;
  for (std::size_t q = 0; q < nq; ++q) {
    for (std::size_t c = 0; c < nc; ++c) {
      out[q * nc + c] = dot(queries.data() + q * dim, candidates.data() + c * dim, dim);
    }
  }
}

std::vector<std::size_t> argmax_rows(std::span<const double> scores, std::size_t cols) {
  if (cols == 0) {
    throw std::invalid_argument("argmax_rows: zero columns");
  }
  const auto rows = static_cast<std::int64_t>(scores.size() / cols);
  std::vector<std::size_t> out(static_cast<std::size_t>(rows));

#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < rows; ++r) {
    out[r] = argmax(scores.data() + r * cols, cols);
  }
  return out;
}

std::vector<std::size_t> argmax_rows_serial(std::span<const double> scores, std::size_t cols) {
  if (cols == 0) {
    throw std::invalid_argument("argmax_rows: zero columns");
  }
  std::vector<std::size_t> out(scores.size() / cols);
  for (std::size_t r = 0; r < out.size(); ++r) {
    out[r] = argmax(scores.data() + r * cols, cols);
  }
  return out;
}

std::vector<std::pair<std::size_t, double>> topk(std::span<const double> row, std::size_t k) {
  std::vector<std::pair<std::size_t, double>> items;
  items.reserve(row.size());
  for (std::size_t i = 0; i < row.size(); ++i) {
    items.emplace_back(i, row[i]);
  }
  const std::size_t n = std::min(k, items.size());
  std::partial_sort(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(n), items.end(),
                    [](const auto& a, const auto& b) {
                      if (a.second != b.second) {
                        return a.second > b.second;
                      }
                      return a.first < b.first;
                    });
  items.resize(n);
  return items;
}

}  // namespace vocada::kernels

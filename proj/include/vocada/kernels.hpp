#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

// Data-parallel inner loops. Each kernel has an OpenMP version and a serial
// reference with identical per-element arithmetic, so results match bitwise.

namespace vocada::kernels {

/// out[q * n_cand + c] = <queries[q], candidates[c]>, accumulated in double.
void similarity(std::span<const float> queries, std::span<const float> candidates, std::size_t dim,
                std::span<double> out);
void similarity_serial(std::span<const float> queries, std::span<const float> candidates, std::size_t dim,
                       std::span<double> out);

/// Column of the maximum in each row of a row-major matrix; lowest column wins ties.
std::vector<std::size_t> argmax_rows(std::span<const double> scores, std::size_t cols);
std::vector<std::size_t> argmax_rows_serial(std::span<const double> scores, std::size_t cols);

/// Top min(k, row.size()) (index, score) pairs, score descending, index ascending on ties.
std::vector<std::pair<std::size_t, double>> topk(std::span<const double> row, std::size_t k);

}  // namespace vocada::kernels

#pragma once

#include <cstdint>
#include <exception>
#include <type_traits>
#include <vector>

#include <omp.h>

namespace vocada {

/// Applies `fn` to every item on `workers` OpenMP threads and returns results in
/// input order. If any item throws, the exception of the lowest failing index is
/// rethrown after all items finish, so failures are deterministic too.
template <typename In, typename Fn>
auto ordered_map(const std::vector<In>& items, int workers, Fn&& fn)
    -> std::vector<std::invoke_result_t<Fn&, const In&>> {
  using Out = std::invoke_result_t<Fn&, const In&>;
  std::vector<Out> results(items.size());
  std::vector<std::exception_ptr> errors(items.size());
  const auto n = static_cast<std::int64_t>(items.size());
  const int threads = workers < 1 ? 1 : workers;

#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      results[static_cast<std::size_t>(i)] = fn(items[static_cast<std::size_t>(i)]);
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) {
      std::rethrow_exception(e);
    }
  }
  return results;
}

}  // namespace vocada

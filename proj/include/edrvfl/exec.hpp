#pragma once

#include <cstddef>
#include <omp.h>

namespace edrvfl {

// Every parallel lane in the library (layer updates, repetition pools, row
// blocks in feature evaluation) goes through parallel_for with an explicit
// policy. serial is the reference path; openmp must produce identical output,
// which the tests assert. Work is partitioned by index so no cross-thread
// reduction order exists.
enum class ExecPolicy { serial, openmp };

template <typename Fn>
void parallel_for(std::size_t n, ExecPolicy policy, Fn&& fn) {
  if (policy == ExecPolicy::openmp) {
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(n); ++i) {
      fn(static_cast<std::size_t>(i));
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) fn(i);
  }
}

}  // namespace edrvfl

#pragma once

#include <cstddef>
#include <functional>

namespace ecc {

// Worker count used by data-parallel kernels. Resolution order:
// set_max_threads() > ECC_THREADS env var > std::thread::hardware_concurrency.
int max_threads();
void set_max_threads(int n);

// Runs fn(begin, end) over disjoint contiguous index ranges covering [0, n).
// Ranges never overlap and every reduction stays ordered within its range,
// so results are independent of the number of workers.
void parallel_for(std::size_t n, std::size_t grain,
                  const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace ecc

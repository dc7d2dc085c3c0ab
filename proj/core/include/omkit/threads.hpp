#pragma once

#include <cstddef>

namespace omkit {

/// Upper bound on worker threads used by parallel loops in the library.
/// Zero (the default) means one per hardware thread. Results never depend on
/// this setting.
void set_worker_threads(std::size_t n);
std::size_t worker_threads();

}  // namespace omkit

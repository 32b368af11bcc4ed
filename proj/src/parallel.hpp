#pragma once

#include <omp.h>

namespace icfenc::detail {

// Thread count for a parallel region; nonpositive means the OpenMP default.
inline int resolve_workers(int workers) { return workers > 0 ? workers : omp_get_max_threads(); }

}  // namespace icfenc::detail

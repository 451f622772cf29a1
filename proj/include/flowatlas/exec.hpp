#pragma once

// Sample-parallel kernels. Every batch computation here has two code paths:
// an OpenMP loop and the plain serial loop it must agree with bit for bit.
// Results are written by index, so reduction order never depends on
// scheduling.

#include <cstddef>
#include <vector>

namespace flowatlas {

enum class Execution { serial, parallel };

template <class Out, class Fn>
std::vector<Out> map_indices(Execution exec, std::size_t count, Fn&& fn)
{
    std::vector<Out> out(count);
    if (exec == Execution::parallel) {
        const auto n = static_cast<long long>(count);
#pragma omp parallel for schedule(dynamic, 8)
        for (long long i = 0; i < n; ++i)
            out[static_cast<std::size_t>(i)] = fn(static_cast<std::size_t>(i));
    } else {
        for (std::size_t i = 0; i < count; ++i)
            out[i] = fn(i);
    }
    return out;
}

int hardware_threads();

} // namespace flowatlas

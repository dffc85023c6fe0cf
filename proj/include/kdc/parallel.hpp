#pragma once

#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace kdc {

// Thread count: test override > KDC_THREADS env > hardware.
int thread_count();
void set_thread_override(int n);  // n <= 0 clears the override

// Static contiguous partition of [begin, end). Each index is processed exactly
// once by exactly one thread; callers must write to disjoint, index-addressed
// slots so results are independent of the thread count.
void parallel_for(int begin, int end, const std::function<void(int)>& body);

}  // namespace kdc

#pragma once

#include <cstddef>

namespace battkit::par {

// Global worker cap shared by every OpenMP kernel. 1 forces the serial
// reference paths; 0 means "use the OpenMP default".
void set_max_threads(int n);
int max_threads();

// True when parallel kernels should run their OpenMP path.
bool parallel_enabled();

// Number of threads an OpenMP region will actually use under the cap.
int effective_threads();

} // namespace battkit::par

#ifndef MVLDP_PARALLEL_HPP
#define MVLDP_PARALLEL_HPP

namespace mvldp {

// Resolves a worker count: explicit request > 0 wins, then the MVLDP_THREADS
// environment variable, then the OpenMP default, then 1.
int resolve_threads(int requested);

}  // namespace mvldp

#endif

#ifndef MVLDP_RNG_HPP
#define MVLDP_RNG_HPP

#include <array>
#include <cstdint>

namespace mvldp::rng {

// Philox4x32-10 block function (Salmon et al., SC'11).  Maps a 128-bit
// counter and 64-bit key to 128 bits of output; distinct counters give
// independent outputs, which is what makes draw-indexed streams safe to
// evaluate in any order.
std::array<uint32_t, 4> philox4x32(std::array<uint32_t, 4> counter,
                                   uint32_t key0, uint32_t key1);

// One logical stream of i.i.d. draws addressed by draw index.  Streams with
// distinct (seed, stream_id, channel) are independent.  Because a draw is a
// pure function of its index, parallel consumers reproduce serial output bit
// for bit regardless of scheduling.
class NoiseStream {
 public:
  NoiseStream(uint64_t seed, uint32_t stream_id, uint32_t channel)
      : key0_(static_cast<uint32_t>(seed)),
        key1_(static_cast<uint32_t>(seed >> 32)),
        stream_(stream_id),
        channel_(channel) {}

  // Uniform draw in (0,1].
  double uniform(uint64_t draw) const;

  // Standard normal draw (Box-Muller, one pair per Philox block).
  double normal(uint64_t draw) const;

  // Fills out[0..dim) with the normals for one time step.  Step k uses pair
  // indices disjoint from every other step, so streams never alias across
  // steps even for odd dim.
  void step_normals(uint64_t step, int dim, double* out) const;

 private:
  std::array<uint32_t, 4> block(uint64_t pair_index) const;
  void pair(uint64_t pair_index, double& z0, double& z1) const;

  uint32_t key0_, key1_, stream_, channel_;
};

}  // namespace mvldp::rng

#endif

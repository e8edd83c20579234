#include "mvldp/rng.hpp"

#include <cmath>

namespace mvldp::rng {

namespace {

inline void mulhilo(uint32_t a, uint32_t b, uint32_t& hi, uint32_t& lo) {
  const uint64_t p = static_cast<uint64_t>(a) * b;
  hi = static_cast<uint32_t>(p >> 32);
  lo = static_cast<uint32_t>(p);
}

// Converts 64 random bits to a double in (0,1]; never 0, so log() is safe.
inline double u64_to_unit(uint64_t v) {
  return (static_cast<double>(v >> 11) + 1.0) * 0x1.0p-53;
}

constexpr double kTwoPi = 6.283185307179586476925286766559;

}  // namespace

std::array<uint32_t, 4> philox4x32(std::array<uint32_t, 4> c,
                                   uint32_t key0, uint32_t key1) {
  constexpr uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
  constexpr uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    uint32_t hi0, lo0, hi1, lo1;
    mulhilo(M0, c[0], hi0, lo0);
    mulhilo(M1, c[2], hi1, lo1);
    c = {hi1 ^ c[1] ^ key0, lo1, hi0 ^ c[3] ^ key1, lo0};
    key0 += W0;
    key1 += W1;
  }
  return c;
}

std::array<uint32_t, 4> NoiseStream::block(uint64_t pair_index) const {
  const std::array<uint32_t, 4> ctr = {
      static_cast<uint32_t>(pair_index),
      static_cast<uint32_t>(pair_index >> 32),
      stream_,
      channel_,
  };
  return philox4x32(ctr, key0_, key1_);
}

double NoiseStream::uniform(uint64_t draw) const {
  const auto r = block(draw >> 1);
  const uint64_t a = (static_cast<uint64_t>(r[0]) << 32) | r[1];
  const uint64_t b = (static_cast<uint64_t>(r[2]) << 32) | r[3];
  return u64_to_unit((draw & 1) ? b : a);
}

void NoiseStream::pair(uint64_t pair_index, double& z0, double& z1) const {
  const auto r = block(pair_index);
  const uint64_t a = (static_cast<uint64_t>(r[0]) << 32) | r[1];
  const uint64_t b = (static_cast<uint64_t>(r[2]) << 32) | r[3];
  const double u1 = u64_to_unit(a);
  const double u2 = u64_to_unit(b);
  const double rad = std::sqrt(-2.0 * std::log(u1));
  z0 = rad * std::cos(kTwoPi * u2);
  z1 = rad * std::sin(kTwoPi * u2);
}

double NoiseStream::normal(uint64_t draw) const {
  double z0, z1;
  pair(draw >> 1, z0, z1);
  return (draw & 1) ? z1 : z0;
}

void NoiseStream::step_normals(uint64_t step, int dim, double* out) const {
  const uint64_t pairs_per_step = static_cast<uint64_t>((dim + 1) / 2);
  uint64_t p = step * pairs_per_step;
  for (int i = 0; i < dim; i += 2, ++p) {
    double z0, z1;
    pair(p, z0, z1);
    out[i] = z0;
    if (i + 1 < dim) out[i + 1] = z1;
  }
}

}  // namespace mvldp::rng

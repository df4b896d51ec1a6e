#pragma once

#include <cstdint>
#include <string_view>

namespace fern::rng {

// Counter-based pseudo-random stream. The full algorithm is pinned down here
// so that other implementations (Python checkers, sibling tools) can
// reproduce every draw bit for bit:
//
//   mix64(z):  z ^= z >> 30;  z *= 0xBF58476D1CE4E5B9;
//              z ^= z >> 27;  z *= 0x94D049BB133111EB;
//              z ^= z >> 31;  return z
//
//   raw draw i of stream k:   mix64(k + 0x9E3779B97F4A7C15 * (i + 1))
//   child stream with tag t:  key = mix64(k ^ (mix64(t) | 1))
//   string tags:              t = FNV-1a 64 over the label bytes
//
//   uniform  = (raw >> 11) * 2^-53                      consumes 1 draw
//   normal   = sqrt(-2 ln u1) * cos(2 pi u2)            consumes 2 draws
//              u1 = ((raw_a >> 11) + 1) * 2^-53  in (0,1]
//              u2 = (raw_b >> 11) * 2^-53        in [0,1)
//
// Draws are pure functions of (key, counter), so a stream can be forked or
// fast-forwarded without generating the skipped values. Simulation code
// documents its draw order next to each stepper; the convention used
// throughout is one normal per stochastic step and one uniform per regime
// transition.
class Stream {
 public:
  Stream() : Stream(0) {}
  explicit Stream(std::uint64_t key) : key_(key) {}

  // Derives an independent child stream. The child starts at counter 0 and
  // never collides with the parent's own draws.
  [[nodiscard]] Stream split(std::string_view label) const;
  [[nodiscard]] Stream split(std::uint64_t tag) const;

  std::uint64_t next_u64();
  double uniform();   // [0, 1)
  double normal();    // standard normal

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }
  void seek(std::uint64_t counter) { counter_ = counter; }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t z);
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace fern::rng

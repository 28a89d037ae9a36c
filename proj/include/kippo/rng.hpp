#pragma once

#include <cstdint>
#include <string_view>

namespace kippo {

// Counter-based random stream. State is (key, counter); the key identifies the
// stream, the counter advances one draw at a time, so the full generator state
// serializes as two integers. Named substreams derived with split() are
// decorrelated from the parent and from each other, which lets independent
// parts of a run (environment, init, action sampling, shuffling, evaluation)
// consume randomness without perturbing one another.
class Rng {
 public:
  explicit Rng(uint64_t seed);

  // Derive an independent stream identified by name.
  Rng split(std::string_view name) const;

  uint64_t next_u64();
  double uniform();                    // [0, 1)
  double uniform(double lo, double hi);
  double uniform_open();               // (0, 1)
  double normal();                     // standard Gaussian (Box-Muller)
  uint64_t uniform_int(uint64_t n);    // [0, n), unbiased

  uint64_t key() const { return key_; }
  uint64_t counter() const { return counter_; }
  static Rng restore(uint64_t key, uint64_t counter);

 private:
  Rng() = default;
  uint64_t key_ = 0;
  uint64_t counter_ = 0;
};

}  // namespace kippo

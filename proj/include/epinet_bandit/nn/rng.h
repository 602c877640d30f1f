#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <string_view>

namespace epinet_bandit::nn {

// 64-bit FNV-1a over raw bytes. Used for stream labels and content hashes.
std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t basis = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a64(std::string_view text);

// Seed for an independent stream named `label` under `root`.
std::uint64_t derive_seed(std::uint64_t root, std::string_view label);

// xoshiro256** generator. All derived draws (uniform, normal, index) are
// implemented here so streams are bit-identical across platforms and
// standard library versions.
class Rng {
 public:
  using result_type = std::uint64_t;
  using State = std::array<std::uint64_t, 4>;

  explicit Rng(std::uint64_t seed = 0);

  // Independent stream for one consumer (e.g. "init", "index", "env.users").
  static Rng stream(std::uint64_t root, std::string_view label) { return Rng(derive_seed(root, label)); }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()();

  double uniform();  // [0, 1)
  double uniform(double lo, double hi);
  double normal();  // standard normal, Box-Muller
  std::uint64_t uniform_index(std::uint64_t n);  // [0, n), unbiased
  bool bernoulli(double p) { return uniform() < p; }

  std::uint64_t seed() const { return seed_; }
  const State& state() const { return state_; }
  void set_state(const State& state) { state_ = state; }

 private:
  std::uint64_t seed_;
  State state_;
};

}  // namespace epinet_bandit::nn

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace s2p {

// Deterministic random stream. The engine (mt19937_64) is fully specified by
// the standard; all distributions are implemented here so draw sequences do
// not depend on the standard library vendor.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed = 0);

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  // Uniform in (0, 1), clamped away from both ends by `margin`.
  double uniform_open(double margin = 1e-12);
  double normal(double mean = 0.0, double stddev = 1.0);
  double gumbel();
  // Uniform integer in [0, n). n must be positive.
  std::size_t uniform_index(std::size_t n);
  bool bernoulli(double p);

  template <class T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = uniform_index(i);
      std::swap(items[i - 1], items[j]);
    }
  }

  // Independent child stream keyed by `tag`; does not advance this stream.
  RngStream derive(std::uint64_t tag) const;

  std::string serialize() const;
  static RngStream deserialize(std::string_view text);

  bool operator==(const RngStream& other) const {
    return seed_ == other.seed_ && engine_ == other.engine_;
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

// Stream tags used across the project so independent purposes never share draws.
namespace stream {
inline constexpr std::uint64_t init = 1;
inline constexpr std::uint64_t schedule = 2;
inline constexpr std::uint64_t supervised = 3;
inline constexpr std::uint64_t self_play = 4;
inline constexpr std::uint64_t evaluation = 5;
inline constexpr std::uint64_t language = 6;
inline constexpr std::uint64_t dataset = 7;
inline constexpr std::uint64_t world = 8;
inline constexpr std::uint64_t distill = 9;
inline constexpr std::uint64_t dropout = 10;
}  // namespace stream

}  // namespace s2p

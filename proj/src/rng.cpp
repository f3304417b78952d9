#include "s2p/rng.hpp"

#include <cmath>
#include <sstream>

#include "s2p/error.hpp"

namespace s2p {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

RngStream::RngStream(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

double RngStream::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RngStream::uniform_open(double margin) {
  double u = uniform();
  if (u < margin) u = margin;
  if (u > 1.0 - margin) u = 1.0 - margin;
  return u;
}

double RngStream::normal(double mean, double stddev) {
  // Box-Muller, one value per call so the state is just the engine.
  double u1 = uniform_open();
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  return mean + stddev * r * std::cos(2.0 * M_PI * u2);
}

double RngStream::gumbel() {
  return -std::log(-std::log(uniform_open(1e-12)));
}

std::size_t RngStream::uniform_index(std::size_t n) {
  if (n == 0) throw Error(ErrorKind::invalid_parameter, "uniform_index over empty range");
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t draw;
  do {
    draw = engine_();
  } while (draw >= limit);
  return static_cast<std::size_t>(draw % bound);
}

bool RngStream::bernoulli(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorKind::invalid_parameter, "bernoulli p outside [0,1]");
  return uniform() < p;
}

RngStream RngStream::derive(std::uint64_t tag) const {
  return RngStream(splitmix64(seed_ ^ splitmix64(tag + 0x632be59bd9b4e019ULL)));
}

std::string RngStream::serialize() const {
  std::ostringstream out;
  out << seed_ << ' ' << engine_;
  return out.str();
}

RngStream RngStream::deserialize(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::uint64_t seed = 0;
  RngStream rng(0);
  if (!(in >> seed >> rng.engine_)) throw Error(ErrorKind::io, "malformed rng state");
  rng.seed_ = seed;
  return rng;
}

}  // namespace s2p

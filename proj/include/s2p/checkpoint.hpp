#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "s2p/rng.hpp"
#include "s2p/tensor.hpp"

namespace s2p {

// Text checkpoint container, format version 1:
//
//   s2p-checkpoint 1
//   meta <key> <value>                       (any number)
//   rng <name> <serialized stream>           (any number)
//   section <name> <array count>
//   array <name> <rows> <cols> <frozen 0|1> <adam step>
//   value <rows*cols numbers>
//   m1 <rows*cols numbers>
//   m2 <rows*cols numbers>
//   end
//
// Numbers use the shortest round-trip decimal form, so load(save(x)) is
// bitwise identical.
inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  std::map<std::string, std::string> meta;
  std::map<std::string, RngStream> rngs;
  std::vector<std::pair<std::string, ParameterSet>> sections;

  const ParameterSet& section(const std::string& name) const;
};

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// Shortest round-trip text for a double.
std::string format_double(double v);
double parse_double(std::string_view text);

}  // namespace s2p

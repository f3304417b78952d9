#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "s2p/ibr_game.hpp"
#include "s2p/or_game.hpp"
#include "s2p/population.hpp"
#include "s2p/schedule.hpp"

namespace s2p {

// Flat key=value experiment configuration. Every known key has a default; the
// resolved map (defaults plus overrides) is what gets written next to outputs.
class ExperimentConfig {
 public:
  ExperimentConfig();

  // "key = value" lines; '#' starts a comment. Unknown keys and malformed
  // lines are config errors.
  static ExperimentConfig parse(std::istream& in);
  static ExperimentConfig load(const std::string& path);

  void set(const std::string& key, const std::string& value);
  bool is_default(const std::string& key) const;
  const std::map<std::string, std::string>& values() const { return values_; }
  void write(std::ostream& out) const;

  std::string get(const std::string& key) const;
  long get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<double> get_doubles(const std::string& key) const;
  std::vector<long> get_ints(const std::string& key) const;
  std::vector<std::uint64_t> get_seeds(const std::string& key = "seeds") const;
  std::vector<std::string> get_strings(const std::string& key) const;

  // Typed views of the key groups.
  OrGameConfig object_game() const;
  OrTrainingConfig object_training() const;
  IbrConfig referential_game() const;
  IbrTrainingConfig referential_training() const;
  SyntheticWorldConfig world() const;
  ScheduleSpec schedule() const;
  DistillConfig distillation() const;
  int threads() const;

 private:
  std::map<std::string, std::string> values_;
  std::map<std::string, std::string> overridden_;
};

// Documentation of every key: (key, default, description).
struct ConfigKey {
  const char* key;
  const char* default_value;
  const char* help;
};
const std::vector<ConfigKey>& config_keys();

}  // namespace s2p

#pragma once

// Shared plumbing for the experiment drivers (not part of the public API).

#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "s2p/experiments.hpp"

namespace s2p::detail {

// Output directory that remembers every file it hands out.
class OutputDir {
 public:
  explicit OutputDir(std::string root);

  std::ofstream open(const std::string& relative);
  const std::string& root() const { return root_; }
  std::string path(const std::string& relative) const;
  const std::vector<std::string>& files() const { return files_; }

 private:
  std::string root_;
  std::vector<std::string> files_;
};

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;
};
MeanSd mean_sd(const std::vector<double>& xs);

inline constexpr long kNotReached = std::numeric_limits<long>::max();
std::string budget_text(long b);

Finding majority_finding(const std::string& name, const std::vector<bool>& per_seed, double fraction,
                         const std::string& detail = {});

// Per-seed streams of an experiment.
inline RngStream seed_stream(std::uint64_t seed, std::uint64_t tag) { return RngStream(seed).derive(tag); }
// Member seeds of the population trained for experiment seed s.
std::vector<std::uint64_t> population_seeds(std::uint64_t s, int size);

// Object game setup shared by the object-game experiments.
struct ObjectWorld {
  OrGameConfig game;
  OrTrainingConfig training;
  CompositionalLanguage language;
  std::vector<ObjectObservation> objects;  // distinct, dataset prefixes come from here
  double val_fraction = 0.1;
  std::uint64_t seed = 0;

  Dataset dataset(std::size_t n) const;
  OrEnvironment environment(const Dataset& d) const;
};
ObjectWorld make_object_world(const ExperimentConfig& c, std::uint64_t seed, std::size_t max_objects);

// Referential game setup: one synthetic world per seed.
struct ReferentialWorld {
  IbrConfig game;
  IbrTrainingConfig training;
  // Training images: the first `budget` form D, the next val_size D_val, and
  // every image outside D_val is a self-play target or distractor.
  std::vector<WorldItem> pool;
  std::vector<WorldItem> test;
  std::size_t val_size = 0;
  std::uint64_t seed = 0;

  IbrData data(std::size_t budget) const;
};
ReferentialWorld make_referential_world(const ExperimentConfig& c, std::uint64_t seed);

void write_finding_csv(OutputDir& out, const std::vector<Finding>& findings);

ExperimentResult exp_seed_sweep(const ExperimentConfig& c, OutputDir& out);
ExperimentResult exp_simple_game(const ExperimentConfig& c, OutputDir& out);
ExperimentResult exp_perfect_emcomm(const ExperimentConfig& c, OutputDir& out);
ExperimentResult exp_schedules(const ExperimentConfig& c, OutputDir& out);
ExperimentResult exp_population(const ExperimentConfig& c, OutputDir& out);
ExperimentResult exp_crossplay(const ExperimentConfig& c, OutputDir& out);

}  // namespace s2p::detail

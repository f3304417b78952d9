#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "s2p/config.hpp"

namespace s2p {

// Outcome of one assertion-style finding, evaluated as a majority over seeds.
struct Finding {
  std::string name;
  bool passed = false;
  int wins = 0;
  int seeds = 0;
  std::string detail;
};

struct ExperimentResult {
  std::string experiment;
  std::vector<Finding> findings;
  std::vector<std::string> outputs;  // paths relative to the output directory
};

// Everything needed to rerun an experiment bit for bit.
struct RunManifest {
  std::string experiment;
  std::string version;
  ExperimentConfig config;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> outputs;
};

const char* code_version();
void write_manifest(const std::string& path, const RunManifest& manifest);
RunManifest read_manifest(const std::string& path);

const std::vector<std::string>& experiment_names();

// Writes manifest.json and config.txt into out_dir first, runs the experiment
// named by config key "experiment", then rewrites the manifest with the list
// of outputs.
ExperimentResult run_experiment(const ExperimentConfig& config, const std::string& out_dir);
ExperimentResult rerun_from_manifest(const std::string& manifest_path, const std::string& out_dir);

// True when wins >= ceil(fraction * seeds).
bool majority_holds(int wins, int seeds, double fraction);

}  // namespace s2p

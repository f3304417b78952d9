#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "s2p/ibr_game.hpp"
#include "s2p/or_game.hpp"
#include "s2p/schedule.hpp"

namespace s2p {

// Population training: N seed-randomized S2P runs, cross-play, prediction
// diversity, and aggregation into one student (distillation or majority vote).

enum class Aggregation { distill, ensemble };

Aggregation parse_aggregation(const std::string& name);
const char* to_string(Aggregation a);

struct PopulationSpec {
  int size = 50;
  ScheduleSpec schedule;
  std::vector<std::uint64_t> seeds;  // explicit member seeds; empty means base_seed + i
  std::uint64_t base_seed = 1;
  Aggregation aggregation = Aggregation::distill;
  int threads = 1;

  // Seeds of all members; throws config on duplicates or an empty population.
  std::vector<std::uint64_t> member_seeds() const;
};

struct PopulationMember {
  std::uint64_t seed = 0;
  RunResult run;
};

// Member i starts from init_agent_pair(arch, seed_i) and runs with root stream
// RngStream(seed_i), exactly like a single S2P run with that seed.
std::vector<PopulationMember> train_population(const PopulationSpec& spec, const ArchitectureSpec& arch,
                                               const Environment& env, const RunOptions& options = {});

std::vector<AgentPair> member_pairs(const std::vector<PopulationMember>& members);

// ---- cross-play ----

// Accuracy of one (speaker, listener) combination.
using PairScore = std::function<double(const AgentPair&)>;

// N x N matrix; entry (i, j) scores speaker i with listener j.
Array crossplay_matrix(std::span<const AgentPair> agents, const PairScore& score, int threads = 1);
// Object game: n_episodes objects drawn once and shared by every cell.
Array or_crossplay_matrix(std::span<const AgentPair> agents, int n_episodes, RngStream& rng, int threads = 1);
// Referential game: n_episodes trials over `pool`, shared by every cell.
Array ibr_crossplay_matrix(std::span<const AgentPair> agents, const std::vector<WorldItem>& pool, int n_episodes,
                           RngStream& rng, int threads = 1);

struct CrossplaySummary {
  double diagonal_mean = 0.0;
  double off_diagonal_mean = 0.0;
};
CrossplaySummary summarize_crossplay(const Array& matrix);

// Header "speaker,<id>,...", then one row per speaker.
void write_crossplay_csv(std::ostream& out, const Array& matrix, const std::vector<std::uint64_t>& ids);

// ---- prediction diversity ----

using PredictionHistogram = std::map<long, int>;  // label -> agent count

// predictions[a][k]: label agent a predicts for input k.
std::vector<PredictionHistogram> prediction_histograms(const std::vector<std::vector<long>>& predictions);
// Object game: label = index of the object the listener reconstructs from the
// expert utterance.
std::vector<PredictionHistogram> or_prediction_diversity(std::span<const AgentPair> agents,
                                                         const CompositionalLanguage& language,
                                                         const std::vector<ObjectObservation>& inputs);
// Referential game: label = candidate chosen from the target's caption.
std::vector<PredictionHistogram> ibr_prediction_diversity(std::span<const AgentPair> agents,
                                                          const std::vector<ReferentialTrial>& trials);
double fraction_with_disagreement(const std::vector<PredictionHistogram>& histograms);
// "input,label,count".
void write_diversity_csv(std::ostream& out, const std::vector<PredictionHistogram>& histograms);

// ---- ensembling ----

// Modal vote; ties go to the lowest label.
int majority_vote(std::span<const int> votes);
ObjectObservation ensemble_reconstruct(std::span<const AgentPair> agents, const Message& message);
std::size_t ensemble_choice(std::span<const AgentPair> agents, const Message& message, const ReferentialTrial& trial);
OrAccuracy ensemble_accuracy(std::span<const AgentPair> agents, const CompositionalLanguage& language,
                             const std::vector<ObjectObservation>& objects);
double ensemble_selection_accuracy(std::span<const AgentPair> agents, const std::vector<ReferentialTrial>& trials);

// ---- distillation ----

struct DistillConfig {
  int steps = 2000;
  int batch = 32;
  OptimizerConfig optimizer{UpdateRule::adam, 1e-3};
  bool distill_speaker = false;  // the listener is always distilled
  // Referential game: share of examples that use a captioned item and its
  // caption instead of a teacher's utterance (needs captioned items).
  double caption_fraction = 0.5;
};

// An object-game teacher: a trained pair, or a programmatic expert that
// speaks and parses one fixed language.
struct OrTeacher {
  const AgentPair* pair = nullptr;
  const CompositionalLanguage* language = nullptr;

  Message utterance(const OrGameConfig& cfg, const ObjectObservation& object) const;
  // Per-property type distributions for a message. An expert puts all mass on
  // the types its words name (averaged if a property is named twice) and is
  // uniform over properties it hears nothing about.
  std::vector<Vec> listen(const OrGameConfig& cfg, const Message& message) const;
  std::vector<Vec> speak_distribution(const OrGameConfig& cfg, const ObjectObservation& object) const;
};

std::vector<OrTeacher> neural_teachers(std::span<const AgentPair> agents);
std::vector<OrTeacher> expert_teachers(std::span<const CompositionalLanguage> languages);

// Each example: a fresh random object, the utterance of one uniformly drawn
// teacher, and as target the mean of every teacher's listener distribution on
// that utterance (speaker: mean token distributions on the object).
AgentPair distill_or(std::span<const OrTeacher> teachers, AgentPair student, const DistillConfig& config,
                     RngStream& rng);

// Referential analogue: targets from `inputs` with distractors from `inputs`;
// the utterance is one teacher's greedy message, the target the mean of every
// teacher's choice distribution (speaker: mean teacher-forced token
// distributions). When `captioned` is non-empty, a caption_fraction share of
// examples instead takes a captioned item as target and its caption as the
// utterance.
AgentPair distill_ibr(std::span<const AgentPair> teachers, AgentPair student, const std::vector<WorldItem>& inputs,
                      const DistillConfig& config, RngStream& rng, const std::vector<WorldItem>& captioned = {});

}  // namespace s2p

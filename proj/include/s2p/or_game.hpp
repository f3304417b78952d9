#pragma once

#include <span>
#include <vector>

#include "s2p/agents.hpp"
#include "s2p/language.hpp"
#include "s2p/optimizer.hpp"
#include "s2p/schedule.hpp"

namespace s2p {

// Object reconstruction game: the speaker sees a symbolic object, the listener
// rebuilds every property from the message.

Vec encode_object(const ObjectObservation& object, const OrGameConfig& cfg);
ObjectObservation decode_object(std::span<const double> encoded, const OrGameConfig& cfg);
// Positions of the ones in encode_object(object).
std::vector<int> object_active_inputs(const ObjectObservation& object, const OrGameConfig& cfg);

enum class EpisodeMode { self_play, expert_speaker };

struct EpisodeResult {
  Message message;
  std::vector<Vec> logits;  // one vector of t logits per property
  Vec losses;               // per-property cross-entropy
  std::vector<bool> correct;

  double loss() const;  // sum over properties
};

struct EpisodeGrads {
  Gradients* speaker = nullptr;
  Gradients* listener = nullptr;
};

struct EpisodeOptions {
  bool straight_through = true;             // false plays the soft relaxation (gradient checks)
  const std::vector<Vec>* noise = nullptr;  // forced Gumbel noise per position
};

// Self-play: the speaker samples straight-through Gumbel tokens. Expert mode:
// the message is speak(expert, object) and the speaker is never touched.
EpisodeResult play_episode(const AgentPair& pair, const ObjectObservation& object, EpisodeMode mode,
                           const CompositionalLanguage* expert, RngStream& rng, EpisodeGrads grads = {},
                           const EpisodeOptions& options = {});

// Listener cross-entropy on a given message; accumulates listener gradients.
double or_listener_loss(const ParameterSet& listener, const OrGameConfig& cfg, const Message& message,
                        const ObjectObservation& object, Gradients* grads);
// Position-wise cross-entropy of the speaker against a target message.
double or_speaker_loss(const ParameterSet& speaker, const OrGameConfig& cfg, const ObjectObservation& object,
                       const Message& target, Gradients* grads);

// Cross-entropy against per-property (listener) or per-position (speaker)
// target distributions, as used by distillation.
double or_listener_soft_loss(const ParameterSet& listener, const OrGameConfig& cfg, const Message& message,
                             const std::vector<Vec>& targets, Gradients* grads);
double or_speaker_soft_loss(const ParameterSet& speaker, const OrGameConfig& cfg, const ObjectObservation& object,
                            const std::vector<Vec>& targets, Gradients* grads);

// Listener's per-property argmax for a message.
ObjectObservation listener_reconstruct(const ParameterSet& listener, const OrGameConfig& cfg,
                                       const Message& message);
// Per-property probability vectors for a message (distillation targets).
std::vector<Vec> listener_distributions(const ParameterSet& listener, const OrGameConfig& cfg,
                                        const Message& message);
Message speaker_greedy(const ParameterSet& speaker, const OrGameConfig& cfg, const ObjectObservation& object);
// Per-position token probabilities of the speaker.
std::vector<Vec> speaker_distributions(const ParameterSet& speaker, const OrGameConfig& cfg,
                                       const ObjectObservation& object);

struct OrAccuracy {
  double per_property = 0.0;
  double exact_match = 0.0;
};

// Listener hears speak(language, o) for every o.
OrAccuracy evaluate_accuracy(const ParameterSet& listener, const OrGameConfig& cfg,
                             const CompositionalLanguage& language,
                             const std::vector<ObjectObservation>& objects);
// Greedy speaker and listener playing together.
OrAccuracy evaluate_self_play(const AgentPair& pair, const std::vector<ObjectObservation>& objects);

// Held-out objects: every object outside `exclude` when that leaves at most
// `limit` of them, otherwise `limit` sampled unseen objects.
std::vector<ObjectObservation> unseen_objects(const OrGameConfig& cfg,
                                              const std::vector<ObjectObservation>& exclude,
                                              std::size_t limit, RngStream& rng);

struct OrTrainingConfig {
  OptimizerConfig optimizer{UpdateRule::adam, 1e-3};
  int sup_batch = 64;  // D_train is used whole when smaller
  int sp_batch = 32;
  int test_objects = 5000;
  int self_play_eval_objects = 500;
};

class OrEnvironment : public Environment {
 public:
  // eval_rng fixes the held-out test and self-play evaluation objects. The test
  // set is every unseen object (sampled when large), or the whole input space
  // when the data covers it.
  OrEnvironment(OrGameConfig cfg, CompositionalLanguage target, Dataset data, OrTrainingConfig training,
                RngStream eval_rng);

  bool has_supervised_data() const override { return !train_.empty(); }
  double supervised_step(AgentPair& pair, RngStream& rng) const override;
  double self_play_step(AgentPair& pair, RngStream& rng) const override;
  // Falls back to D_train accuracy when D_val is empty.
  double val_accuracy(const AgentPair& pair) const override;
  double self_play_accuracy(const AgentPair& pair) const override;
  double test_accuracy(const AgentPair& pair) const override;

  OrAccuracy test_metrics(const ParameterSet& listener) const;
  const OrGameConfig& config() const { return cfg_; }
  const CompositionalLanguage& target() const { return target_; }
  const Dataset& data() const { return data_; }
  const OrTrainingConfig& training() const { return training_; }
  const std::vector<ObjectObservation>& test_set() const { return test_; }

 private:
  OrGameConfig cfg_;
  CompositionalLanguage target_;
  Dataset data_;
  OrTrainingConfig training_;
  std::vector<Example> train_;
  std::vector<ObjectObservation> val_;
  std::vector<ObjectObservation> train_objects_;
  std::vector<ObjectObservation> test_;
  std::vector<ObjectObservation> self_play_eval_;
};

// Indices of a minibatch of size min(batch, n): all of [0, n) in order when
// n <= batch, otherwise a uniform sample without replacement.
std::vector<std::size_t> minibatch_indices(std::size_t n, std::size_t batch, RngStream& rng);

}  // namespace s2p

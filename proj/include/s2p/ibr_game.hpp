#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "s2p/agents.hpp"
#include "s2p/language.hpp"
#include "s2p/optimizer.hpp"
#include "s2p/schedule.hpp"

namespace s2p {

// Referential game: the speaker describes a target's features, the listener
// picks the target among distractors + 1 candidates.

struct WorldItem {
  Vec features;
  Message caption;                // padded to the message length with kPadToken
  ObjectObservation attributes;   // latent attributes (synthetic worlds only)
};

struct ReferentialTrial {
  std::size_t target = 0;                    // index into candidates
  std::vector<const WorldItem*> candidates;  // distractors + 1
};

// logit_d = 1 / (mean((message_repr - candidate_d)^2) + epsilon).
Vec reciprocal_mse_logits(std::span<const double> message_repr, const std::vector<Vec>& candidate_reprs,
                          double epsilon);
// Gradients of the logits above w.r.t. the message and every candidate.
void reciprocal_mse_backward(std::span<const double> message_repr, const std::vector<Vec>& candidate_reprs,
                             const Vec& logits, std::span<const double> dlogits, Vec& dmessage,
                             std::vector<Vec>& dcandidates);

struct SelectionResult {
  double loss = 0.0;
  Vec logits;
  std::size_t choice = 0;
  bool correct = false;
};

// Listener cross-entropy over candidates for a given token sequence.
// dtokens (if non-null) receives the gradient w.r.t. each token vector.
SelectionResult listener_select(const ParameterSet& listener, const IbrConfig& cfg,
                                const std::vector<TokenInput>& tokens, const ReferentialTrial& trial,
                                Gradients* grads, std::vector<Vec>* dtokens = nullptr,
                                RngStream* dropout_rng = nullptr);

// Listener trained on the ground-truth caption of the target.
double lsn_supervised_loss(const ParameterSet& listener, const IbrConfig& cfg, const Message& caption,
                           const ReferentialTrial& trial, Gradients* grads, RngStream* dropout_rng = nullptr);

// Teacher-forced token cross-entropy over non-pad caption positions. Captions
// longer than the message length are truncated and *truncated is set.
double spk_supervised_loss(const ParameterSet& speaker, const IbrConfig& cfg, const WorldItem& item,
                           Gradients* grads, bool* truncated = nullptr, RngStream* dropout_rng = nullptr);

// Distillation losses: listener cross-entropy against a distribution over the
// trial's candidates; speaker cross-entropy against per-position token
// distributions while teacher-forcing `message` (every position counts).
double lsn_soft_loss(const ParameterSet& listener, const IbrConfig& cfg, const Message& message,
                     const ReferentialTrial& trial, std::span<const double> target, Gradients* grads);
double spk_soft_loss(const ParameterSet& speaker, const IbrConfig& cfg, std::span<const double> features,
                     const Message& message, const std::vector<Vec>& targets, Gradients* grads);
// Token probabilities of the speaker at every position while teacher-forcing `message`.
std::vector<Vec> ibr_speaker_distributions(const ParameterSet& speaker, const IbrConfig& cfg,
                                           std::span<const double> features, const Message& message);

struct SelfPlayOptions {
  bool straight_through = true;
  const std::vector<Vec>* noise = nullptr;
};

// Speaker emits message_length straight-through Gumbel tokens for the target;
// the listener selects with them. speaker_grads null means no speaker update.
SelectionResult self_play_loss(const AgentPair& pair, const ReferentialTrial& trial, RngStream& rng,
                               Gradients* speaker_grads, Gradients* listener_grads,
                               const SelfPlayOptions& options = {}, Message* emitted = nullptr);

// ---- synthetic world ----

struct SyntheticWorldConfig {
  int properties = 4;
  int types = 8;
  double noise = 0.1;  // feature noise standard deviation
};

inline constexpr int kCaptionWordOffset = 2;  // word ids 0 and 1 are pad and unk

// Fixed captioning language and attribute embedding of one world.
class SyntheticWorld {
 public:
  SyntheticWorld(const IbrConfig& cfg, const SyntheticWorldConfig& world, RngStream& rng);

  WorldItem make_item(const ObjectObservation& attributes, RngStream& rng) const;
  std::vector<WorldItem> sample(std::size_t n, RngStream& rng) const;
  Message caption(const ObjectObservation& attributes) const;
  // Inverse of caption(); throws unparseable.
  ObjectObservation parse_caption(const Message& caption) const;
  const CompositionalLanguage& language() const { return language_; }
  const SyntheticWorldConfig& config() const { return world_; }

 private:
  IbrConfig cfg_;
  SyntheticWorldConfig world_;
  CompositionalLanguage language_;
  Array embedding_;  // feature_dim x (p*t)
};

std::vector<WorldItem> synth_world(const IbrConfig& cfg, const SyntheticWorldConfig& world,
                                   std::size_t n_items, RngStream& rng);

// One trial per target: distractors drawn uniformly from `pool`, skipping the
// target itself; the target's slot is uniform.
ReferentialTrial make_trial(const WorldItem& target, const std::vector<WorldItem>& pool, int distractors,
                            RngStream& rng);
std::vector<ReferentialTrial> make_trials(const std::vector<WorldItem>& targets,
                                          const std::vector<WorldItem>& pool, int distractors,
                                          std::size_t n_trials, RngStream& rng);

// Fraction of trials where the listener, hearing the target's caption, ranks
// the target first.
double evaluate_selection_accuracy(const ParameterSet& listener, const IbrConfig& cfg,
                                   const std::vector<ReferentialTrial>& trials);
double evaluate_selection_accuracy(const ParameterSet& listener, const IbrConfig& cfg,
                                   const std::vector<WorldItem>& targets, const std::vector<WorldItem>& pool,
                                   int n_trials, RngStream& rng);
// Greedy speaker with its listener.
double evaluate_self_play_accuracy(const AgentPair& pair, const std::vector<ReferentialTrial>& trials);

// Listener's chosen candidate for a message.
std::size_t listener_choice(const ParameterSet& listener, const IbrConfig& cfg, const Message& message,
                            const ReferentialTrial& trial);
// Softmax over candidates for a message.
Vec listener_choice_distribution(const ParameterSet& listener, const IbrConfig& cfg, const Message& message,
                                 const ReferentialTrial& trial);
Message ibr_speaker_greedy(const ParameterSet& speaker, const IbrConfig& cfg, std::span<const double> features);

// ---- pre-extracted data ----

struct IngestStats {
  std::size_t read = 0;
  std::size_t dropped_unknown = 0;
  std::size_t truncated = 0;
};

// Lines "id<TAB>features<TAB>token ids". Captions with more than 30% unknown
// tokens are dropped; longer captions are truncated to the message length.
std::vector<WorldItem> read_ingested_items(std::istream& in, const IbrConfig& cfg, IngestStats* stats = nullptr);
// Sidecar vocabulary: one "id<TAB>word" per line.
std::vector<std::string> read_vocabulary(std::istream& in);

// ---- environment ----

struct IbrTrainingConfig {
  OptimizerConfig optimizer{UpdateRule::adam, 1e-3};
  int batch = 32;
  int val_trials = 400;
  int test_trials = 1000;
  int self_play_eval_trials = 400;
};

struct IbrData {
  std::vector<WorldItem> train;  // D_train (captioned)
  std::vector<WorldItem> val;    // D_val
  std::vector<WorldItem> pool;   // uncaptioned training images: self-play targets and distractors
  std::vector<WorldItem> test;   // held-out items
};

class IbrEnvironment : public Environment {
 public:
  IbrEnvironment(IbrConfig cfg, IbrData data, IbrTrainingConfig training, RngStream eval_rng);
  // Trials point into data_, so the environment stays in place.
  IbrEnvironment(const IbrEnvironment&) = delete;
  IbrEnvironment& operator=(const IbrEnvironment&) = delete;

  bool has_supervised_data() const override { return !data_.train.empty(); }
  double supervised_step(AgentPair& pair, RngStream& rng) const override;
  double self_play_step(AgentPair& pair, RngStream& rng) const override;
  double val_accuracy(const AgentPair& pair) const override;
  double self_play_accuracy(const AgentPair& pair) const override;
  double test_accuracy(const AgentPair& pair) const override;

  const IbrConfig& config() const { return cfg_; }
  const IbrData& data() const { return data_; }
  const IbrTrainingConfig& training() const { return training_; }
  const std::vector<ReferentialTrial>& test_trials() const { return test_trials_; }

 private:
  IbrConfig cfg_;
  IbrData data_;
  IbrTrainingConfig training_;
  std::vector<ReferentialTrial> val_trials_;
  std::vector<ReferentialTrial> test_trials_;
  std::vector<ReferentialTrial> self_play_trials_;
};

}  // namespace s2p

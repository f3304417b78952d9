#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "s2p/checkpoint.hpp"
#include "s2p/language.hpp"
#include "s2p/ops.hpp"
#include "s2p/rng.hpp"
#include "s2p/tensor.hpp"

namespace s2p {

enum class GameKind { object_reconstruction, referential };

const char* to_string(GameKind kind);
GameKind parse_game_kind(const std::string& name);

// Hidden-layer activation of the OR agents.
enum class Nonlinearity { tanh, linear };

// "nonlinear" -> tanh, "linear" -> linear; "bilinear" is a recognised name
// that is not implemented and raises a config error.
Nonlinearity parse_architecture(const std::string& name);
const char* to_string(Nonlinearity n);

struct OrGameConfig {
  int properties = 6;
  int types = 10;
  int vocab = 60;
  int message_length = 6;
  int hidden = 200;
  Nonlinearity nonlinearity = Nonlinearity::tanh;
  double temperature = 1.0;

  int object_size() const { return properties * types; }
  int message_size() const { return message_length * vocab; }
  LanguageConfig language() const { return {properties, types, vocab}; }
  void validate() const;
};

struct IbrConfig {
  int feature_dim = 2048;
  int vocab = 100;
  int message_length = 15;
  int distractors = 9;
  int embedding = 256;
  int hidden = 512;
  double temperature = 1.0;
  double mse_epsilon = 1e-6;
  double dropout = 0.0;  // on listener and speaker embedding outputs

  int candidates() const { return distractors + 1; }
  void validate() const;
};

inline constexpr int kPadToken = 0;
inline constexpr int kUnknownToken = 1;
inline constexpr int kBosToken = kPadToken;  // decoder start symbol

struct ArchitectureSpec {
  GameKind game = GameKind::object_reconstruction;
  OrGameConfig object_game;
  IbrConfig referential_game;

  void validate() const;
  static ArchitectureSpec object_reconstruction(const OrGameConfig& cfg);
  static ArchitectureSpec referential(const IbrConfig& cfg);
};

struct AgentPair {
  ParameterSet speaker;
  ParameterSet listener;
  bool speaker_frozen = false;
  std::uint64_t seed = 0;
  ArchitectureSpec arch;
};

AgentPair init_agent_pair(const ArchitectureSpec& spec, std::uint64_t seed);
void set_speaker_frozen(AgentPair& pair, bool frozen);

Checkpoint agent_checkpoint(const AgentPair& pair);
AgentPair agent_from_checkpoint(const Checkpoint& ckpt);
void save_agent_pair(const std::string& path, const AgentPair& pair);
AgentPair load_agent_pair(const std::string& path);

// A token fed to a network: a one-hot index, or a dense (soft) vector when
// index < 0.
struct TokenInput {
  int index = -1;
  Vec dense;

  static TokenInput hot(int i) { return {i, {}}; }
};

std::vector<TokenInput> hot_tokens(const Message& m);

// ---- object reconstruction agents: affine -> activation -> affine ----

struct OrSpeakerTrace {
  std::vector<int> active;  // one-hot input positions
  Vec hidden;
  Vec logits;  // message_length * vocab
};

Vec or_speaker_logits(const ParameterSet& speaker, const OrGameConfig& cfg,
                      std::span<const int> active_inputs, OrSpeakerTrace* trace = nullptr);
void or_speaker_backward(const ParameterSet& speaker, const OrGameConfig& cfg,
                         const OrSpeakerTrace& trace, std::span<const double> dlogits,
                         Gradients& grads);

struct OrListenerTrace {
  std::vector<TokenInput> tokens;
  Vec hidden;
  Vec logits;  // properties * types
};

Vec or_listener_logits(const ParameterSet& listener, const OrGameConfig& cfg,
                       const std::vector<TokenInput>& tokens, OrListenerTrace* trace = nullptr);
// dtokens (if non-null) receives d loss / d token vector, one vocab-sized
// vector per position.
void or_listener_backward(const ParameterSet& listener, const OrGameConfig& cfg,
                          const OrListenerTrace& trace, std::span<const double> dlogits,
                          Gradients* grads, std::vector<Vec>* dtokens);

// ---- referential agents: embedding + GRU ----

struct IbrEncoderTrace {
  std::vector<TokenInput> tokens;
  std::vector<Vec> masks;  // dropout masks (empty when dropout is off)
  std::vector<GruCache> steps;
  Vec state;  // final recurrent state
};

// Listener message representation: final GRU state over all positions.
Vec ibr_encode_message(const ParameterSet& listener, const IbrConfig& cfg,
                       const std::vector<TokenInput>& tokens, IbrEncoderTrace* trace = nullptr,
                       RngStream* dropout_rng = nullptr);
void ibr_encode_backward(const ParameterSet& listener, const IbrEncoderTrace& trace,
                         std::span<const double> dstate, Gradients* grads,
                         std::vector<Vec>* dtokens);

// Listener candidate representation: affine map of the features.
Vec ibr_encode_candidate(const ParameterSet& listener, std::span<const double> features);
void ibr_candidate_backward(const ParameterSet& listener, std::span<const double> features,
                            std::span<const double> drepr, Gradients* grads);

struct IbrSpeakerTrace {
  Vec features;
  Vec initial_state;
  std::vector<TokenInput> inputs;  // decoder inputs, starting with BOS
  std::vector<Vec> masks;
  std::vector<GruCache> steps;
  std::vector<Vec> logits;
  std::vector<GumbelSample> samples;  // filled by sampled rollouts
};

// Teacher-forced decoding of `target` (pad positions still advance the
// decoder but carry no loss). Returns per-position logits.
void ibr_speaker_teacher_forced(const ParameterSet& speaker, const IbrConfig& cfg,
                                std::span<const double> features, const Message& target,
                                IbrSpeakerTrace& trace, RngStream* dropout_rng = nullptr);

enum class SpeakMode { greedy, gumbel_st };

struct RolloutOptions {
  SpeakMode mode = SpeakMode::greedy;
  double temperature = 1.0;
  bool straight_through = true;  // false feeds the soft relaxation forward
  const std::vector<Vec>* noise = nullptr;  // forced Gumbel noise per position
};

// Free-running decode of message_length tokens; each emitted token is fed back
// as the next input.
void ibr_speaker_rollout(const ParameterSet& speaker, const IbrConfig& cfg,
                         std::span<const double> features, const RolloutOptions& options,
                         RngStream* rng, IbrSpeakerTrace& trace, RngStream* dropout_rng = nullptr);

// Backward through either decode. dlogits: per position gradient added to the
// logits (teacher forcing); demitted: gradient w.r.t. emitted tokens of a
// sampled rollout (may be empty).
void ibr_speaker_backward(const ParameterSet& speaker, const IbrConfig& cfg,
                          const IbrSpeakerTrace& trace, const std::vector<Vec>& dlogits,
                          const std::vector<Vec>& demitted, double temperature, Gradients& grads);

// ---- role-generic speaker call ----

struct SpeakerOutput {
  Message message;
  std::vector<GumbelSample> samples;  // empty in greedy mode
};

// input: the encoded object (object game) or the feature vector (referential
// game).
SpeakerOutput speaker_forward(const AgentPair& pair, std::span<const double> input,
                              const RolloutOptions& options, RngStream* rng);

}  // namespace s2p

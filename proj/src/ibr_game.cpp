#include "s2p/ibr_game.hpp"

#include <cmath>
#include <istream>
#include <sstream>

#include "s2p/checkpoint.hpp"
#include "s2p/error.hpp"

namespace s2p {

Vec reciprocal_mse_logits(std::span<const double> message_repr, const std::vector<Vec>& candidate_reprs,
                          double epsilon) {
  if (!(epsilon > 0)) throw Error(ErrorKind::invalid_parameter, "epsilon must be positive");
  const std::size_t h = message_repr.size();
  Vec logits;
  logits.reserve(candidate_reprs.size());
  for (const Vec& c : candidate_reprs) {
    if (c.size() != h) throw Error(ErrorKind::shape, "candidate representation dimension mismatch");
    double mse = 0.0;
    for (std::size_t k = 0; k < h; ++k) {
      const double d = message_repr[k] - c[k];
      mse += d * d;
    }
    mse /= static_cast<double>(h);
    logits.push_back(1.0 / (mse + epsilon));
  }
  return logits;
}

void reciprocal_mse_backward(std::span<const double> message_repr, const std::vector<Vec>& candidate_reprs,
                             const Vec& logits, std::span<const double> dlogits, Vec& dmessage,
                             std::vector<Vec>& dcandidates) {
  const std::size_t h = message_repr.size();
  dmessage.assign(h, 0.0);
  dcandidates.assign(candidate_reprs.size(), Vec(h, 0.0));
  for (std::size_t d = 0; d < candidate_reprs.size(); ++d) {
    // d logit / d mse = -logit^2; d mse / d message = 2 (message - c) / h.
    const double coef = dlogits[d] * logits[d] * logits[d] * 2.0 / static_cast<double>(h);
    for (std::size_t k = 0; k < h; ++k) {
      const double diff = message_repr[k] - candidate_reprs[d][k];
      dmessage[k] -= coef * diff;
      dcandidates[d][k] += coef * diff;
    }
  }
}

namespace {

// Listener selection with either the trial target or a soft target.
SelectionResult select_impl(const ParameterSet& listener, const IbrConfig& cfg, const std::vector<TokenInput>& tokens,
                            const ReferentialTrial& trial, std::span<const double> soft_target, Gradients* grads,
                            std::vector<Vec>* dtokens, RngStream* dropout_rng) {
  if (trial.target >= trial.candidates.size()) throw Error(ErrorKind::index, "trial target out of range");
  if (!soft_target.empty() && soft_target.size() != trial.candidates.size())
    throw Error(ErrorKind::shape, "soft target size differs from the candidate count");
  IbrEncoderTrace et;
  const bool need_backward = grads || dtokens;
  const Vec msg = ibr_encode_message(listener, cfg, tokens, need_backward ? &et : nullptr, dropout_rng);
  std::vector<Vec> cands;
  cands.reserve(trial.candidates.size());
  for (const WorldItem* c : trial.candidates) cands.push_back(ibr_encode_candidate(listener, c->features));
  SelectionResult r;
  r.logits = reciprocal_mse_logits(msg, cands, cfg.mse_epsilon);
  LossGrad lg = soft_target.empty() ? cross_entropy(r.logits, trial.target) : soft_cross_entropy(r.logits, soft_target);
  r.loss = lg.loss;
  r.choice = argmax(r.logits);
  r.correct = r.choice == trial.target;
  if (need_backward) {
    Vec dmsg;
    std::vector<Vec> dcands;
    reciprocal_mse_backward(msg, cands, r.logits, lg.grad, dmsg, dcands);
    if (grads)
      for (std::size_t d = 0; d < cands.size(); ++d)
        ibr_candidate_backward(listener, trial.candidates[d]->features, dcands[d], grads);
    ibr_encode_backward(listener, et, dmsg, grads, dtokens);
  }
  return r;
}

}  // namespace

SelectionResult listener_select(const ParameterSet& listener, const IbrConfig& cfg,
                                const std::vector<TokenInput>& tokens, const ReferentialTrial& trial,
                                Gradients* grads, std::vector<Vec>* dtokens, RngStream* dropout_rng) {
  return select_impl(listener, cfg, tokens, trial, {}, grads, dtokens, dropout_rng);
}

double lsn_soft_loss(const ParameterSet& listener, const IbrConfig& cfg, const Message& message,
                     const ReferentialTrial& trial, std::span<const double> target, Gradients* grads) {
  if (target.empty()) throw Error(ErrorKind::invalid_input, "empty soft target");
  return select_impl(listener, cfg, hot_tokens(message), trial, target, grads, nullptr, nullptr).loss;
}

double spk_soft_loss(const ParameterSet& speaker, const IbrConfig& cfg, std::span<const double> features,
                     const Message& message, const std::vector<Vec>& targets, Gradients* grads) {
  if (targets.size() != message.tokens.size()) throw Error(ErrorKind::shape, "one target per message position");
  IbrSpeakerTrace trace;
  ibr_speaker_teacher_forced(speaker, cfg, features, message, trace);
  double loss = 0.0;
  std::vector<Vec> dlogits(trace.logits.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    LossGrad lg = soft_cross_entropy(trace.logits[i], targets[i]);
    loss += lg.loss;
    dlogits[i] = std::move(lg.grad);
  }
  if (grads) ibr_speaker_backward(speaker, cfg, trace, dlogits, {}, cfg.temperature, *grads);
  return loss;
}

std::vector<Vec> ibr_speaker_distributions(const ParameterSet& speaker, const IbrConfig& cfg,
                                           std::span<const double> features, const Message& message) {
  IbrSpeakerTrace trace;
  ibr_speaker_teacher_forced(speaker, cfg, features, message, trace);
  std::vector<Vec> out;
  for (std::size_t i = 0; i < message.tokens.size(); ++i) out.push_back(softmax(trace.logits[i]));
  return out;
}

double lsn_supervised_loss(const ParameterSet& listener, const IbrConfig& cfg, const Message& caption,
                           const ReferentialTrial& trial, Gradients* grads, RngStream* dropout_rng) {
  return listener_select(listener, cfg, hot_tokens(caption), trial, grads, nullptr, dropout_rng).loss;
}

double spk_supervised_loss(const ParameterSet& speaker, const IbrConfig& cfg, const WorldItem& item,
                           Gradients* grads, bool* truncated, RngStream* dropout_rng) {
  Message target;
  for (int w : item.caption.tokens) {
    if (w == kPadToken) break;
    target.tokens.push_back(w);
  }
  if (target.tokens.empty()) throw Error(ErrorKind::invalid_input, "caption is empty");
  const bool cut = static_cast<int>(target.tokens.size()) > cfg.message_length;
  if (cut) target.tokens.resize(static_cast<std::size_t>(cfg.message_length));
  if (truncated) *truncated = cut;

  IbrSpeakerTrace trace;
  ibr_speaker_teacher_forced(speaker, cfg, item.features, target, trace, dropout_rng);
  double loss = 0.0;
  std::vector<Vec> dlogits(trace.logits.size());
  for (std::size_t i = 0; i < target.tokens.size(); ++i) {
    LossGrad lg = cross_entropy(trace.logits[i], static_cast<std::size_t>(target.tokens[i]));
    loss += lg.loss;
    dlogits[i] = std::move(lg.grad);
  }
  if (grads) ibr_speaker_backward(speaker, cfg, trace, dlogits, {}, cfg.temperature, *grads);
  return loss;
}

SelectionResult self_play_loss(const AgentPair& pair, const ReferentialTrial& trial, RngStream& rng,
                               Gradients* speaker_grads, Gradients* listener_grads,
                               const SelfPlayOptions& options, Message* emitted) {
  if (pair.arch.game != GameKind::referential)
    throw Error(ErrorKind::contract, "referential self-play needs referential agents");
  const IbrConfig& cfg = pair.arch.referential_game;
  RolloutOptions ro;
  ro.mode = SpeakMode::gumbel_st;
  ro.temperature = cfg.temperature;
  ro.straight_through = options.straight_through;
  ro.noise = options.noise;
  IbrSpeakerTrace st;
  ibr_speaker_rollout(pair.speaker, cfg, trial.candidates[trial.target]->features, ro, &rng, st);
  std::vector<TokenInput> tokens;
  for (const auto& s : st.samples)
    tokens.push_back(options.straight_through ? TokenInput::hot(static_cast<int>(s.index)) : TokenInput{-1, s.soft});
  if (emitted) {
    emitted->tokens.clear();
    for (const auto& s : st.samples) emitted->tokens.push_back(static_cast<int>(s.index));
  }
  std::vector<Vec> dtokens;
  SelectionResult r = listener_select(pair.listener, cfg, tokens, trial, listener_grads,
                                      speaker_grads ? &dtokens : nullptr);
  if (speaker_grads) ibr_speaker_backward(pair.speaker, cfg, st, {}, dtokens, cfg.temperature, *speaker_grads);
  return r;
}

SyntheticWorld::SyntheticWorld(const IbrConfig& cfg, const SyntheticWorldConfig& world, RngStream& rng)
    : cfg_(cfg),
      world_(world),
      language_([&] {
        const LanguageConfig lc{world.properties, world.types, world.properties * world.types};
        if (lc.pair_count() + kCaptionWordOffset > cfg.vocab)
          throw Error(ErrorKind::infeasible, "vocabulary too small for the attribute space");
        if (world.properties > cfg.message_length)
          throw Error(ErrorKind::infeasible, "captions longer than the message length");
        return sample_compositional_language(lc, rng);
      }()),
      embedding_(static_cast<std::size_t>(cfg.feature_dim), static_cast<std::size_t>(world.properties * world.types)) {
  if (world.noise < 0) throw Error(ErrorKind::config, "noise must be non-negative");
  const double scale = 1.0 / std::sqrt(static_cast<double>(world.properties));
  for (double& v : embedding_.values()) v = rng.normal(0.0, scale);
}

Message SyntheticWorld::caption(const ObjectObservation& attributes) const {
  Message m = speak(language_, attributes);
  for (int& w : m.tokens) w += kCaptionWordOffset;
  m.tokens.resize(static_cast<std::size_t>(cfg_.message_length), kPadToken);
  return m;
}

ObjectObservation SyntheticWorld::parse_caption(const Message& caption) const {
  Message m;
  for (int w : caption.tokens) {
    if (w == kPadToken) break;
    m.tokens.push_back(w - kCaptionWordOffset);
  }
  return parse(language_, m);
}

WorldItem SyntheticWorld::make_item(const ObjectObservation& attributes, RngStream& rng) const {
  WorldItem item;
  item.attributes = attributes;
  item.caption = caption(attributes);
  item.features.assign(static_cast<std::size_t>(cfg_.feature_dim), 0.0);
  for (std::size_t j = 0; j < attributes.types.size(); ++j)
    blas::add_column(embedding_, j * static_cast<std::size_t>(world_.types) + static_cast<std::size_t>(attributes.types[j]),
                     item.features);
  if (world_.noise > 0)
    for (double& v : item.features) v += rng.normal(0.0, world_.noise);
  return item;
}

std::vector<WorldItem> SyntheticWorld::sample(std::size_t n, RngStream& rng) const {
  std::vector<WorldItem> items;
  items.reserve(n);
  for (std::size_t i = 0; i < n; ++i) items.push_back(make_item(random_object(language_.config(), rng), rng));
  return items;
}

std::vector<WorldItem> synth_world(const IbrConfig& cfg, const SyntheticWorldConfig& world, std::size_t n_items,
                                   RngStream& rng) {
  if (n_items < static_cast<std::size_t>(cfg.candidates()))
    throw Error(ErrorKind::invalid_input, "world needs at least distractors + 1 items");
  SyntheticWorld w(cfg, world, rng);
  return w.sample(n_items, rng);
}

ReferentialTrial make_trial(const WorldItem& target, const std::vector<WorldItem>& pool, int distractors,
                            RngStream& rng) {
  std::size_t available = pool.size();
  for (const auto& p : pool)
    if (&p == &target) --available;
  if (available < static_cast<std::size_t>(distractors))
    throw Error(ErrorKind::invalid_input, "distractor pool too small");
  ReferentialTrial t;
  std::vector<std::size_t> chosen;
  while (chosen.size() < static_cast<std::size_t>(distractors)) {
    const std::size_t i = rng.uniform_index(pool.size());
    if (&pool[i] == &target) continue;
    bool dup = false;
    for (std::size_t c : chosen) dup = dup || c == i;
    if (!dup) chosen.push_back(i);
  }
  t.target = rng.uniform_index(static_cast<std::size_t>(distractors) + 1);
  for (std::size_t k = 0, d = 0; k <= static_cast<std::size_t>(distractors); ++k)
    t.candidates.push_back(k == t.target ? &target : &pool[chosen[d++]]);
  return t;
}

std::vector<ReferentialTrial> make_trials(const std::vector<WorldItem>& targets,
                                          const std::vector<WorldItem>& pool, int distractors,
                                          std::size_t n_trials, RngStream& rng) {
  if (targets.empty()) throw Error(ErrorKind::invalid_input, "no trial targets");
  std::vector<ReferentialTrial> out;
  out.reserve(n_trials);
  for (std::size_t i = 0; i < n_trials; ++i)
    out.push_back(make_trial(targets[i % targets.size()], pool, distractors, rng));
  return out;
}

double evaluate_selection_accuracy(const ParameterSet& listener, const IbrConfig& cfg,
                                   const std::vector<ReferentialTrial>& trials) {
  if (trials.empty()) throw Error(ErrorKind::invalid_input, "no evaluation trials");
  std::size_t hits = 0;
  for (const auto& t : trials)
    hits += listener_choice(listener, cfg, t.candidates[t.target]->caption, t) == t.target;
  return static_cast<double>(hits) / static_cast<double>(trials.size());
}

double evaluate_selection_accuracy(const ParameterSet& listener, const IbrConfig& cfg,
                                   const std::vector<WorldItem>& targets, const std::vector<WorldItem>& pool,
                                   int n_trials, RngStream& rng) {
  if (n_trials <= 0) throw Error(ErrorKind::invalid_input, "n_trials must be positive");
  return evaluate_selection_accuracy(
      listener, cfg, make_trials(targets, pool, cfg.distractors, static_cast<std::size_t>(n_trials), rng));
}

double evaluate_self_play_accuracy(const AgentPair& pair, const std::vector<ReferentialTrial>& trials) {
  if (trials.empty()) throw Error(ErrorKind::invalid_input, "no evaluation trials");
  const IbrConfig& cfg = pair.arch.referential_game;
  std::size_t hits = 0;
  for (const auto& t : trials) {
    const Message m = ibr_speaker_greedy(pair.speaker, cfg, t.candidates[t.target]->features);
    hits += listener_choice(pair.listener, cfg, m, t) == t.target;
  }
  return static_cast<double>(hits) / static_cast<double>(trials.size());
}

std::size_t listener_choice(const ParameterSet& listener, const IbrConfig& cfg, const Message& message,
                            const ReferentialTrial& trial) {
  return listener_select(listener, cfg, hot_tokens(message), trial, nullptr).choice;
}

Vec listener_choice_distribution(const ParameterSet& listener, const IbrConfig& cfg, const Message& message,
                                 const ReferentialTrial& trial) {
  return softmax(listener_select(listener, cfg, hot_tokens(message), trial, nullptr).logits);
}

Message ibr_speaker_greedy(const ParameterSet& speaker, const IbrConfig& cfg, std::span<const double> features) {
  IbrSpeakerTrace trace;
  ibr_speaker_rollout(speaker, cfg, features, RolloutOptions{}, nullptr, trace);
  Message m;
  for (const auto& s : trace.samples) m.tokens.push_back(static_cast<int>(s.index));
  return m;
}

std::vector<WorldItem> read_ingested_items(std::istream& in, const IbrConfig& cfg, IngestStats* stats) {
  IngestStats local;
  std::vector<WorldItem> items;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) throw Error(ErrorKind::io, "item line needs id, features and caption");
    ++local.read;
    WorldItem item;
    {
      std::istringstream fs(line.substr(t1 + 1, t2 - t1 - 1));
      std::string tok;
      while (fs >> tok) item.features.push_back(parse_double(tok));
    }
    if (static_cast<int>(item.features.size()) != cfg.feature_dim)
      throw Error(ErrorKind::io, "item has " + std::to_string(item.features.size()) + " features, expected " +
                                     std::to_string(cfg.feature_dim));
    std::istringstream cs(line.substr(t2 + 1));
    int w;
    int unknown = 0;
    while (cs >> w) {
      if (w < 0 || w >= cfg.vocab) w = kUnknownToken;
      unknown += w == kUnknownToken;
      item.caption.tokens.push_back(w);
    }
    if (item.caption.tokens.empty() ||
        static_cast<double>(unknown) > 0.3 * static_cast<double>(item.caption.tokens.size())) {
      ++local.dropped_unknown;
      continue;
    }
    if (static_cast<int>(item.caption.tokens.size()) > cfg.message_length) ++local.truncated;
    item.caption.tokens.resize(static_cast<std::size_t>(cfg.message_length), kPadToken);
    items.push_back(std::move(item));
  }
  if (stats) *stats = local;
  return items;
}

std::vector<std::string> read_vocabulary(std::istream& in) {
  std::vector<std::string> vocab;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw Error(ErrorKind::io, "vocabulary line needs id<TAB>word");
    const auto id = static_cast<std::size_t>(std::stoul(line.substr(0, tab)));
    if (vocab.size() <= id) vocab.resize(id + 1);
    vocab[id] = line.substr(tab + 1);
  }
  return vocab;
}

IbrEnvironment::IbrEnvironment(IbrConfig cfg, IbrData data, IbrTrainingConfig training, RngStream eval_rng)
    : cfg_(cfg), data_(std::move(data)), training_(training) {
  cfg_.validate();
  if (data_.pool.size() < static_cast<std::size_t>(cfg_.candidates()))
    throw Error(ErrorKind::invalid_input, "image pool smaller than the candidate count");
  RngStream val_rng = eval_rng.derive(1), test_rng = eval_rng.derive(2), sp_rng = eval_rng.derive(3);
  const auto& val_targets = data_.val.empty() ? data_.train : data_.val;
  if (!val_targets.empty())
    val_trials_ = make_trials(val_targets, data_.pool, cfg_.distractors,
                              static_cast<std::size_t>(training_.val_trials), val_rng);
  if (!data_.test.empty())
    test_trials_ = make_trials(data_.test, data_.pool, cfg_.distractors,
                               static_cast<std::size_t>(training_.test_trials), test_rng);
  self_play_trials_ = make_trials(data_.pool, data_.pool, cfg_.distractors,
                                  static_cast<std::size_t>(training_.self_play_eval_trials), sp_rng);
}

double IbrEnvironment::supervised_step(AgentPair& pair, RngStream& rng) const {
  if (data_.train.empty()) throw Error(ErrorKind::contract, "supervised step with empty D_train");
  Gradients gl = Gradients::zeros_like(pair.listener, true);
  Gradients gs = Gradients::zeros_like(pair.speaker, true);
  const bool speaker_learns = gs.size() > 0;
  RngStream* drop = cfg_.dropout > 0 ? &rng : nullptr;
  double loss = 0.0;
  for (int b = 0; b < training_.batch; ++b) {
    const WorldItem& target = data_.train[rng.uniform_index(data_.train.size())];
    const ReferentialTrial trial = make_trial(target, data_.pool, cfg_.distractors, rng);
    loss += lsn_supervised_loss(pair.listener, cfg_, target.caption, trial, &gl, drop);
    if (speaker_learns) loss += spk_supervised_loss(pair.speaker, cfg_, target, &gs, nullptr, drop);
  }
  const double scale = 1.0 / training_.batch;
  gl.scale(scale);
  optimizer_step(pair.listener, gl, training_.optimizer);
  if (speaker_learns) {
    gs.scale(scale);
    optimizer_step(pair.speaker, gs, training_.optimizer);
  }
  return loss * scale;
}

double IbrEnvironment::self_play_step(AgentPair& pair, RngStream& rng) const {
  Gradients gl = Gradients::zeros_like(pair.listener, true);
  Gradients gs = Gradients::zeros_like(pair.speaker, true);
  const bool speaker_learns = gs.size() > 0;
  double loss = 0.0;
  for (int b = 0; b < training_.batch; ++b) {
    const WorldItem& target = data_.pool[rng.uniform_index(data_.pool.size())];
    const ReferentialTrial trial = make_trial(target, data_.pool, cfg_.distractors, rng);
    loss += self_play_loss(pair, trial, rng, speaker_learns ? &gs : nullptr, &gl).loss;
  }
  const double scale = 1.0 / training_.batch;
  gl.scale(scale);
  optimizer_step(pair.listener, gl, training_.optimizer);
  if (speaker_learns) {
    gs.scale(scale);
    optimizer_step(pair.speaker, gs, training_.optimizer);
  }
  return loss * scale;
}

double IbrEnvironment::val_accuracy(const AgentPair& pair) const {
  return evaluate_selection_accuracy(pair.listener, cfg_, val_trials_);
}

double IbrEnvironment::self_play_accuracy(const AgentPair& pair) const {
  return evaluate_self_play_accuracy(pair, self_play_trials_);
}

double IbrEnvironment::test_accuracy(const AgentPair& pair) const {
  return evaluate_selection_accuracy(pair.listener, cfg_, test_trials_);
}

}  // namespace s2p

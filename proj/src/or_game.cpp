#include "s2p/or_game.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <set>
#include <unordered_set>

#include "s2p/error.hpp"

namespace s2p {

Vec encode_object(const ObjectObservation& object, const OrGameConfig& cfg) {
  Vec v(static_cast<std::size_t>(cfg.object_size()), 0.0);
  for (int a : object_active_inputs(object, cfg)) v[static_cast<std::size_t>(a)] = 1.0;
  return v;
}

ObjectObservation decode_object(std::span<const double> encoded, const OrGameConfig& cfg) {
  if (static_cast<int>(encoded.size()) != cfg.object_size())
    throw Error(ErrorKind::shape, "encoded object has wrong length");
  ObjectObservation o;
  for (int j = 0; j < cfg.properties; ++j)
    o.types.push_back(static_cast<int>(argmax(encoded.subspan(static_cast<std::size_t>(j * cfg.types),
                                                             static_cast<std::size_t>(cfg.types)))));
  return o;
}

std::vector<int> object_active_inputs(const ObjectObservation& object, const OrGameConfig& cfg) {
  if (!valid_object(object, cfg.language())) throw Error(ErrorKind::invalid_input, "invalid object");
  std::vector<int> a(object.types.size());
  for (std::size_t j = 0; j < a.size(); ++j) a[j] = static_cast<int>(j) * cfg.types + object.types[j];
  return a;
}

double EpisodeResult::loss() const { return std::accumulate(losses.begin(), losses.end(), 0.0); }

namespace {

// Per-property cross-entropy; fills result fields and returns dlogits.
Vec property_losses(const OrGameConfig& cfg, const Vec& logits, const ObjectObservation& object,
                    EpisodeResult* result) {
  Vec dlogits(logits.size());
  const auto t = static_cast<std::size_t>(cfg.types);
  for (int j = 0; j < cfg.properties; ++j) {
    std::span<const double> block(logits.data() + static_cast<std::size_t>(j) * t, t);
    LossGrad lg = cross_entropy(block, static_cast<std::size_t>(object.types[static_cast<std::size_t>(j)]));
    std::copy(lg.grad.begin(), lg.grad.end(), dlogits.begin() + static_cast<std::ptrdiff_t>(j * cfg.types));
    if (result) {
      result->logits.emplace_back(block.begin(), block.end());
      result->losses.push_back(lg.loss);
      result->correct.push_back(static_cast<int>(argmax(block)) == object.types[static_cast<std::size_t>(j)]);
    }
  }
  return dlogits;
}

}  // namespace

EpisodeResult play_episode(const AgentPair& pair, const ObjectObservation& object, EpisodeMode mode,
                           const CompositionalLanguage* expert, RngStream& rng, EpisodeGrads grads,
                           const EpisodeOptions& options) {
  if (pair.arch.game != GameKind::object_reconstruction)
    throw Error(ErrorKind::contract, "object reconstruction episode needs object game agents");
  const OrGameConfig& cfg = pair.arch.object_game;
  if (!valid_object(object, cfg.language())) throw Error(ErrorKind::invalid_input, "invalid object");
  EpisodeResult result;

  if (mode == EpisodeMode::expert_speaker) {
    if (!expert) throw Error(ErrorKind::contract, "expert mode requires an expert language");
    const auto& lc = expert->config();
    if (lc.properties != cfg.properties || lc.types != cfg.types || lc.vocab > cfg.vocab)
      throw Error(ErrorKind::contract, "expert language does not fit the game config");
    result.message = speak(*expert, object);
    OrListenerTrace lt;
    const Vec logits = or_listener_logits(pair.listener, cfg, hot_tokens(result.message), &lt);
    const Vec dlogits = property_losses(cfg, logits, object, &result);
    if (grads.listener) or_listener_backward(pair.listener, cfg, lt, dlogits, grads.listener, nullptr);
    return result;
  }

  OrSpeakerTrace st;
  const Vec spk_logits = or_speaker_logits(pair.speaker, cfg, object_active_inputs(object, cfg), &st);
  const auto V = static_cast<std::size_t>(cfg.vocab);
  std::vector<GumbelSample> samples;
  std::vector<TokenInput> tokens;
  for (int pos = 0; pos < cfg.message_length; ++pos) {
    std::span<const double> l(spk_logits.data() + static_cast<std::size_t>(pos) * V, V);
    GumbelSample s = options.noise ? gumbel_softmax_st(l, cfg.temperature, (*options.noise)[static_cast<std::size_t>(pos)])
                                   : gumbel_softmax_st(l, cfg.temperature, rng);
    result.message.tokens.push_back(static_cast<int>(s.index));
    tokens.push_back(options.straight_through ? TokenInput::hot(static_cast<int>(s.index)) : TokenInput{-1, s.soft});
    samples.push_back(std::move(s));
  }
  OrListenerTrace lt;
  const Vec logits = or_listener_logits(pair.listener, cfg, tokens, &lt);
  const Vec dlogits = property_losses(cfg, logits, object, &result);
  if (grads.listener || grads.speaker) {
    std::vector<Vec> dtokens;
    or_listener_backward(pair.listener, cfg, lt, dlogits, grads.listener, grads.speaker ? &dtokens : nullptr);
    if (grads.speaker) {
      Vec dspk(spk_logits.size(), 0.0);
      for (std::size_t pos = 0; pos < samples.size(); ++pos) {
        const Vec d = gumbel_softmax_st_backward(samples[pos], cfg.temperature, dtokens[pos]);
        std::copy(d.begin(), d.end(), dspk.begin() + static_cast<std::ptrdiff_t>(pos * V));
      }
      or_speaker_backward(pair.speaker, cfg, st, dspk, *grads.speaker);
    }
  }
  return result;
}

double or_listener_loss(const ParameterSet& listener, const OrGameConfig& cfg, const Message& message,
                        const ObjectObservation& object, Gradients* grads) {
  OrListenerTrace lt;
  const Vec logits = or_listener_logits(listener, cfg, hot_tokens(message), &lt);
  EpisodeResult r;
  const Vec dlogits = property_losses(cfg, logits, object, &r);
  if (grads) or_listener_backward(listener, cfg, lt, dlogits, grads, nullptr);
  return r.loss();
}

double or_speaker_loss(const ParameterSet& speaker, const OrGameConfig& cfg, const ObjectObservation& object,
                       const Message& target, Gradients* grads) {
  if (static_cast<int>(target.tokens.size()) != cfg.message_length)
    throw Error(ErrorKind::shape, "target message has wrong length");
  OrSpeakerTrace st;
  const Vec logits = or_speaker_logits(speaker, cfg, object_active_inputs(object, cfg), &st);
  const auto V = static_cast<std::size_t>(cfg.vocab);
  Vec dlogits(logits.size());
  double loss = 0.0;
  for (std::size_t pos = 0; pos < target.tokens.size(); ++pos) {
    LossGrad lg = cross_entropy(std::span<const double>(logits.data() + pos * V, V),
                                static_cast<std::size_t>(target.tokens[pos]));
    loss += lg.loss;
    std::copy(lg.grad.begin(), lg.grad.end(), dlogits.begin() + static_cast<std::ptrdiff_t>(pos * V));
  }
  if (grads) or_speaker_backward(speaker, cfg, st, dlogits, *grads);
  return loss;
}

namespace {

// Sum of soft cross-entropies over consecutive blocks of the logits.
double blockwise_soft_ce(const Vec& logits, const std::vector<Vec>& targets, std::size_t width, Vec& dlogits) {
  if (targets.size() * width != logits.size()) throw Error(ErrorKind::shape, "target distributions do not match logits");
  dlogits.assign(logits.size(), 0.0);
  double loss = 0.0;
  for (std::size_t b = 0; b < targets.size(); ++b) {
    LossGrad lg = soft_cross_entropy(std::span<const double>(logits.data() + b * width, width), targets[b]);
    loss += lg.loss;
    std::copy(lg.grad.begin(), lg.grad.end(), dlogits.begin() + static_cast<std::ptrdiff_t>(b * width));
  }
  return loss;
}

}  // namespace

double or_listener_soft_loss(const ParameterSet& listener, const OrGameConfig& cfg, const Message& message,
                             const std::vector<Vec>& targets, Gradients* grads) {
  OrListenerTrace lt;
  const Vec logits = or_listener_logits(listener, cfg, hot_tokens(message), &lt);
  Vec dlogits;
  const double loss = blockwise_soft_ce(logits, targets, static_cast<std::size_t>(cfg.types), dlogits);
  if (grads) or_listener_backward(listener, cfg, lt, dlogits, grads, nullptr);
  return loss;
}

double or_speaker_soft_loss(const ParameterSet& speaker, const OrGameConfig& cfg, const ObjectObservation& object,
                            const std::vector<Vec>& targets, Gradients* grads) {
  OrSpeakerTrace st;
  const Vec logits = or_speaker_logits(speaker, cfg, object_active_inputs(object, cfg), &st);
  Vec dlogits;
  const double loss = blockwise_soft_ce(logits, targets, static_cast<std::size_t>(cfg.vocab), dlogits);
  if (grads) or_speaker_backward(speaker, cfg, st, dlogits, *grads);
  return loss;
}

ObjectObservation listener_reconstruct(const ParameterSet& listener, const OrGameConfig& cfg,
                                       const Message& message) {
  const Vec logits = or_listener_logits(listener, cfg, hot_tokens(message));
  ObjectObservation o;
  const auto t = static_cast<std::size_t>(cfg.types);
  for (int j = 0; j < cfg.properties; ++j)
    o.types.push_back(static_cast<int>(argmax(std::span<const double>(logits.data() + static_cast<std::size_t>(j) * t, t))));
  return o;
}

std::vector<Vec> listener_distributions(const ParameterSet& listener, const OrGameConfig& cfg,
                                        const Message& message) {
  const Vec logits = or_listener_logits(listener, cfg, hot_tokens(message));
  std::vector<Vec> out;
  const auto t = static_cast<std::size_t>(cfg.types);
  for (int j = 0; j < cfg.properties; ++j)
    out.push_back(softmax(std::span<const double>(logits.data() + static_cast<std::size_t>(j) * t, t)));
  return out;
}

Message speaker_greedy(const ParameterSet& speaker, const OrGameConfig& cfg, const ObjectObservation& object) {
  const Vec logits = or_speaker_logits(speaker, cfg, object_active_inputs(object, cfg));
  Message m;
  const auto V = static_cast<std::size_t>(cfg.vocab);
  for (int pos = 0; pos < cfg.message_length; ++pos)
    m.tokens.push_back(static_cast<int>(argmax(std::span<const double>(logits.data() + static_cast<std::size_t>(pos) * V, V))));
  return m;
}

std::vector<Vec> speaker_distributions(const ParameterSet& speaker, const OrGameConfig& cfg,
                                       const ObjectObservation& object) {
  const Vec logits = or_speaker_logits(speaker, cfg, object_active_inputs(object, cfg));
  std::vector<Vec> out;
  const auto V = static_cast<std::size_t>(cfg.vocab);
  for (int pos = 0; pos < cfg.message_length; ++pos)
    out.push_back(softmax(std::span<const double>(logits.data() + static_cast<std::size_t>(pos) * V, V)));
  return out;
}

namespace {

OrAccuracy score(const std::vector<ObjectObservation>& objects,
                 const std::function<ObjectObservation(const ObjectObservation&)>& predict) {
  if (objects.empty()) throw Error(ErrorKind::invalid_input, "empty evaluation set");
  double props = 0, exact = 0, total = 0;
  for (const auto& o : objects) {
    const ObjectObservation p = predict(o);
    int hits = 0;
    for (std::size_t j = 0; j < o.types.size(); ++j) hits += p.types[j] == o.types[j];
    props += hits;
    total += static_cast<double>(o.types.size());
    exact += hits == static_cast<int>(o.types.size());
  }
  return {props / total, exact / static_cast<double>(objects.size())};
}

}  // namespace

OrAccuracy evaluate_accuracy(const ParameterSet& listener, const OrGameConfig& cfg,
                             const CompositionalLanguage& language,
                             const std::vector<ObjectObservation>& objects) {
  return score(objects, [&](const ObjectObservation& o) {
    return listener_reconstruct(listener, cfg, speak(language, o));
  });
}

OrAccuracy evaluate_self_play(const AgentPair& pair, const std::vector<ObjectObservation>& objects) {
  const OrGameConfig& cfg = pair.arch.object_game;
  return score(objects, [&](const ObjectObservation& o) {
    return listener_reconstruct(pair.listener, cfg, speaker_greedy(pair.speaker, cfg, o));
  });
}

std::vector<ObjectObservation> unseen_objects(const OrGameConfig& cfg,
                                              const std::vector<ObjectObservation>& exclude,
                                              std::size_t limit, RngStream& rng) {
  const LanguageConfig lc = cfg.language();
  const std::uint64_t space = input_space_size(lc);
  std::unordered_set<std::uint64_t> seen;
  for (const auto& o : exclude) seen.insert(object_index(o, lc));
  std::vector<ObjectObservation> out;
  if (space - seen.size() <= limit) {
    for (std::uint64_t i = 0; i < space; ++i)
      if (!seen.count(i)) out.push_back(object_from_index(i, lc));
    return out;
  }
  while (out.size() < limit) {
    ObjectObservation o = random_object(lc, rng);
    if (seen.insert(object_index(o, lc)).second) out.push_back(std::move(o));
  }
  return out;
}

std::vector<std::size_t> minibatch_indices(std::size_t n, std::size_t batch, RngStream& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (n <= batch) return idx;
  for (std::size_t i = 0; i < batch; ++i) std::swap(idx[i], idx[i + rng.uniform_index(n - i)]);
  idx.resize(batch);
  return idx;
}

OrEnvironment::OrEnvironment(OrGameConfig cfg, CompositionalLanguage target, Dataset data,
                             OrTrainingConfig training, RngStream eval_rng)
    : cfg_(cfg), target_(std::move(target)), data_(std::move(data)), training_(training) {
  cfg_.validate();
  train_ = data_.train();
  for (const auto& e : data_.val()) val_.push_back(e.object);
  for (const auto& e : train_) train_objects_.push_back(e.object);
  std::vector<ObjectObservation> all;
  for (const auto& e : data_.pairs) all.push_back(e.object);
  RngStream test_rng = eval_rng.derive(1);
  test_ = unseen_objects(cfg_, all, static_cast<std::size_t>(training_.test_objects), test_rng);
  // Exhaustive data leaves nothing unseen; the whole input space is tested instead.
  if (test_.empty()) test_ = unseen_objects(cfg_, {}, static_cast<std::size_t>(training_.test_objects), test_rng);
  RngStream sp_rng = eval_rng.derive(2);
  for (int i = 0; i < training_.self_play_eval_objects; ++i)
    self_play_eval_.push_back(random_object(cfg_.language(), sp_rng));
}

double OrEnvironment::supervised_step(AgentPair& pair, RngStream& rng) const {
  if (train_.empty()) throw Error(ErrorKind::contract, "supervised step with empty D_train");
  const auto batch = minibatch_indices(train_.size(), static_cast<std::size_t>(training_.sup_batch), rng);
  Gradients gl = Gradients::zeros_like(pair.listener, true);
  Gradients gs = Gradients::zeros_like(pair.speaker, true);
  const bool speaker_learns = gs.size() > 0;
  double loss = 0.0;
  for (std::size_t i : batch) {
    const Example& e = train_[i];
    loss += or_listener_loss(pair.listener, cfg_, e.message, e.object, &gl);
    if (speaker_learns) loss += or_speaker_loss(pair.speaker, cfg_, e.object, e.message, &gs);
  }
  const double scale = 1.0 / static_cast<double>(batch.size());
  gl.scale(scale);
  optimizer_step(pair.listener, gl, training_.optimizer);
  if (speaker_learns) {
    gs.scale(scale);
    optimizer_step(pair.speaker, gs, training_.optimizer);
  }
  return loss * scale;
}

double OrEnvironment::self_play_step(AgentPair& pair, RngStream& rng) const {
  Gradients gl = Gradients::zeros_like(pair.listener, true);
  Gradients gs = Gradients::zeros_like(pair.speaker, true);
  const bool speaker_learns = gs.size() > 0;
  double loss = 0.0;
  const LanguageConfig lc = cfg_.language();
  for (int b = 0; b < training_.sp_batch; ++b) {
    const ObjectObservation o = random_object(lc, rng);
    loss += play_episode(pair, o, EpisodeMode::self_play, nullptr, rng,
                         {speaker_learns ? &gs : nullptr, &gl})
                .loss();
  }
  const double scale = 1.0 / training_.sp_batch;
  gl.scale(scale);
  optimizer_step(pair.listener, gl, training_.optimizer);
  if (speaker_learns) {
    gs.scale(scale);
    optimizer_step(pair.speaker, gs, training_.optimizer);
  }
  return loss * scale;
}

double OrEnvironment::val_accuracy(const AgentPair& pair) const {
  const auto& objs = val_.empty() ? train_objects_ : val_;
  return evaluate_accuracy(pair.listener, cfg_, target_, objs).per_property;
}

double OrEnvironment::self_play_accuracy(const AgentPair& pair) const {
  return evaluate_self_play(pair, self_play_eval_).per_property;
}

double OrEnvironment::test_accuracy(const AgentPair& pair) const { return test_metrics(pair.listener).per_property; }

OrAccuracy OrEnvironment::test_metrics(const ParameterSet& listener) const {
  return evaluate_accuracy(listener, cfg_, target_, test_);
}

}  // namespace s2p

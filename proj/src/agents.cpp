#include "s2p/agents.hpp"

#include <cmath>

#include "s2p/error.hpp"

namespace s2p {

const char* to_string(GameKind kind) {
  return kind == GameKind::object_reconstruction ? "object_reconstruction" : "referential";
}

GameKind parse_game_kind(const std::string& name) {
  if (name == "object_reconstruction" || name == "or") return GameKind::object_reconstruction;
  if (name == "referential" || name == "ibr") return GameKind::referential;
  throw Error(ErrorKind::config, "unknown game kind '" + name + "'");
}

Nonlinearity parse_architecture(const std::string& name) {
  if (name == "nonlinear" || name == "tanh") return Nonlinearity::tanh;
  if (name == "linear") return Nonlinearity::linear;
  if (name == "bilinear") throw Error(ErrorKind::config, "architecture 'bilinear' is not implemented");
  throw Error(ErrorKind::config, "unknown architecture '" + name + "'");
}

const char* to_string(Nonlinearity n) { return n == Nonlinearity::tanh ? "nonlinear" : "linear"; }

void OrGameConfig::validate() const {
  if (properties < 1 || types < 1 || vocab < 1 || message_length < 1 || hidden < 1)
    throw Error(ErrorKind::config, "object game sizes must be positive");
  if (message_length != properties)
    throw Error(ErrorKind::config, "message length must equal the number of properties");
  if (vocab < properties * types)
    throw Error(ErrorKind::config, "vocabulary smaller than p*t");
  if (!(temperature > 0)) throw Error(ErrorKind::config, "temperature must be positive");
}

void IbrConfig::validate() const {
  if (feature_dim < 1 || vocab < 3 || message_length < 1 || embedding < 1 || hidden < 1)
    throw Error(ErrorKind::config, "referential game sizes must be positive (vocab >= 3)");
  if (distractors < 1) throw Error(ErrorKind::config, "need at least one distractor");
  if (!(temperature > 0)) throw Error(ErrorKind::config, "temperature must be positive");
  if (!(mse_epsilon > 0)) throw Error(ErrorKind::config, "mse epsilon must be positive");
  if (dropout < 0 || dropout >= 1) throw Error(ErrorKind::config, "dropout must lie in [0, 1)");
}

void ArchitectureSpec::validate() const {
  if (game == GameKind::object_reconstruction) object_game.validate();
  else referential_game.validate();
}

ArchitectureSpec ArchitectureSpec::object_reconstruction(const OrGameConfig& cfg) {
  ArchitectureSpec s;
  s.game = GameKind::object_reconstruction;
  s.object_game = cfg;
  return s;
}

ArchitectureSpec ArchitectureSpec::referential(const IbrConfig& cfg) {
  ArchitectureSpec s;
  s.game = GameKind::referential;
  s.referential_game = cfg;
  return s;
}

AgentPair init_agent_pair(const ArchitectureSpec& spec, std::uint64_t seed) {
  spec.validate();
  AgentPair pair;
  pair.seed = seed;
  pair.arch = spec;
  RngStream rng = RngStream(seed).derive(stream::init);
  if (spec.game == GameKind::object_reconstruction) {
    const auto& c = spec.object_game;
    const auto in = static_cast<std::size_t>(c.object_size());
    const auto msg = static_cast<std::size_t>(c.message_size());
    const auto h = static_cast<std::size_t>(c.hidden);
    pair.speaker.add("w1", h, in, Init::glorot_uniform, rng);
    pair.speaker.add("b1", h, 1, Init::zeros, rng);
    pair.speaker.add("w2", msg, h, Init::glorot_uniform, rng);
    pair.speaker.add("b2", msg, 1, Init::zeros, rng);
    pair.listener.add("w1", h, msg, Init::glorot_uniform, rng);
    pair.listener.add("b1", h, 1, Init::zeros, rng);
    pair.listener.add("w2", in, h, Init::glorot_uniform, rng);
    pair.listener.add("b2", in, 1, Init::zeros, rng);
  } else {
    const auto& c = spec.referential_game;
    const auto v = static_cast<std::size_t>(c.vocab);
    const auto e = static_cast<std::size_t>(c.embedding);
    const auto h = static_cast<std::size_t>(c.hidden);
    const auto f = static_cast<std::size_t>(c.feature_dim);
    pair.speaker.add("img_w", h, f, Init::glorot_uniform, rng);
    pair.speaker.add("img_b", h, 1, Init::zeros, rng);
    pair.speaker.add("emb", v, e, Init::glorot_uniform, rng);
    add_gru_parameters(pair.speaker, "dec_", e, h, rng);
    pair.speaker.add("out_w", v, h, Init::glorot_uniform, rng);
    pair.speaker.add("out_b", v, 1, Init::zeros, rng);
    pair.listener.add("emb", v, e, Init::glorot_uniform, rng);
    add_gru_parameters(pair.listener, "enc_", e, h, rng);
    pair.listener.add("img_w", h, f, Init::glorot_uniform, rng);
    pair.listener.add("img_b", h, 1, Init::zeros, rng);
  }
  return pair;
}

void set_speaker_frozen(AgentPair& pair, bool frozen) {
  pair.speaker.set_frozen(frozen);
  pair.speaker_frozen = frozen;
}

Checkpoint agent_checkpoint(const AgentPair& pair) {
  Checkpoint ck;
  ck.meta["seed"] = std::to_string(pair.seed);
  ck.meta["speaker_frozen"] = pair.speaker_frozen ? "1" : "0";
  ck.meta["game"] = to_string(pair.arch.game);
  if (pair.arch.game == GameKind::object_reconstruction) {
    const auto& c = pair.arch.object_game;
    ck.meta["properties"] = std::to_string(c.properties);
    ck.meta["types"] = std::to_string(c.types);
    ck.meta["vocab"] = std::to_string(c.vocab);
    ck.meta["message_length"] = std::to_string(c.message_length);
    ck.meta["hidden"] = std::to_string(c.hidden);
    ck.meta["architecture"] = to_string(c.nonlinearity);
    ck.meta["temperature"] = format_double(c.temperature);
  } else {
    const auto& c = pair.arch.referential_game;
    ck.meta["feature_dim"] = std::to_string(c.feature_dim);
    ck.meta["vocab"] = std::to_string(c.vocab);
    ck.meta["message_length"] = std::to_string(c.message_length);
    ck.meta["distractors"] = std::to_string(c.distractors);
    ck.meta["embedding"] = std::to_string(c.embedding);
    ck.meta["hidden"] = std::to_string(c.hidden);
    ck.meta["temperature"] = format_double(c.temperature);
    ck.meta["mse_epsilon"] = format_double(c.mse_epsilon);
    ck.meta["dropout"] = format_double(c.dropout);
  }
  ck.sections.emplace_back("speaker", pair.speaker);
  ck.sections.emplace_back("listener", pair.listener);
  return ck;
}

AgentPair agent_from_checkpoint(const Checkpoint& ck) {
  auto get = [&](const std::string& k) -> const std::string& {
    auto it = ck.meta.find(k);
    if (it == ck.meta.end()) throw Error(ErrorKind::io, "checkpoint lacks meta '" + k + "'");
    return it->second;
  };
  auto geti = [&](const std::string& k) { return std::stoi(get(k)); };
  AgentPair pair;
  pair.seed = std::stoull(get("seed"));
  pair.arch.game = parse_game_kind(get("game"));
  if (pair.arch.game == GameKind::object_reconstruction) {
    auto& c = pair.arch.object_game;
    c.properties = geti("properties");
    c.types = geti("types");
    c.vocab = geti("vocab");
    c.message_length = geti("message_length");
    c.hidden = geti("hidden");
    c.nonlinearity = parse_architecture(get("architecture"));
    c.temperature = parse_double(get("temperature"));
  } else {
    auto& c = pair.arch.referential_game;
    c.feature_dim = geti("feature_dim");
    c.vocab = geti("vocab");
    c.message_length = geti("message_length");
    c.distractors = geti("distractors");
    c.embedding = geti("embedding");
    c.hidden = geti("hidden");
    c.temperature = parse_double(get("temperature"));
    c.mse_epsilon = parse_double(get("mse_epsilon"));
    c.dropout = parse_double(get("dropout"));
  }
  pair.arch.validate();
  pair.speaker = ck.section("speaker");
  pair.listener = ck.section("listener");
  pair.speaker_frozen = get("speaker_frozen") == "1";
  if (pair.speaker_frozen != pair.speaker.all_frozen() && pair.speaker.size() > 0)
    throw Error(ErrorKind::io, "speaker freeze flag disagrees with its arrays");
  return pair;
}

void save_agent_pair(const std::string& path, const AgentPair& pair) {
  save_checkpoint(path, agent_checkpoint(pair));
}

AgentPair load_agent_pair(const std::string& path) { return agent_from_checkpoint(load_checkpoint(path)); }

std::vector<TokenInput> hot_tokens(const Message& m) {
  std::vector<TokenInput> out;
  out.reserve(m.tokens.size());
  for (int w : m.tokens) out.push_back(TokenInput::hot(w));
  return out;
}

namespace {

void activate(Nonlinearity n, Vec& v) {
  if (n == Nonlinearity::tanh)
    for (double& x : v) x = std::tanh(x);
}

// dpre from dhidden given the activated hidden values.
Vec activation_backward(Nonlinearity n, const Vec& hidden, Vec dhidden) {
  if (n == Nonlinearity::tanh)
    for (std::size_t i = 0; i < dhidden.size(); ++i) dhidden[i] *= 1.0 - hidden[i] * hidden[i];
  return dhidden;
}

Array* grad_of(Gradients* g, const char* name) { return g ? g->find(name) : nullptr; }

void check_token(const TokenInput& t, int vocab) {
  if (t.index >= 0) {
    if (t.index >= vocab) throw Error(ErrorKind::index, "token id outside vocabulary");
  } else if (static_cast<int>(t.dense.size()) != vocab) {
    throw Error(ErrorKind::shape, "dense token has wrong length");
  }
}

Vec dropout_mask(std::size_t n, double rate, RngStream* rng) {
  if (rate <= 0 || rng == nullptr) return {};
  Vec m(n);
  for (double& x : m) x = rng->uniform() < rate ? 0.0 : 1.0 / (1.0 - rate);
  return m;
}

// emb^T token, i.e. the embedding row or the probability-weighted mix.
Vec embed(const Array& emb, const TokenInput& t) {
  if (t.index >= 0) {
    auto r = emb.row(static_cast<std::size_t>(t.index));
    return Vec(r.begin(), r.end());
  }
  Vec x(emb.cols(), 0.0);
  for (std::size_t v = 0; v < emb.rows(); ++v)
    if (t.dense[v] != 0.0) blas::axpy(t.dense[v], emb.row(v), x);
  return x;
}

void embed_backward(const Array& emb, const TokenInput& t, const Vec& dx, Array* demb, Vec* dtoken) {
  if (demb) {
    if (t.index >= 0) {
      blas::axpy(1.0, dx, demb->row(static_cast<std::size_t>(t.index)));
    } else {
      for (std::size_t v = 0; v < emb.rows(); ++v)
        if (t.dense[v] != 0.0) blas::axpy(t.dense[v], dx, demb->row(v));
    }
  }
  if (dtoken) {
    dtoken->assign(emb.rows(), 0.0);
    blas::gemv_acc(emb, dx, *dtoken);
  }
}

}  // namespace

Vec or_speaker_logits(const ParameterSet& speaker, const OrGameConfig& cfg,
                      std::span<const int> active_inputs, OrSpeakerTrace* trace) {
  const Array& w1 = speaker.value("w1");
  const Array& b1 = speaker.value("b1");
  Vec hidden(b1.values().begin(), b1.values().end());
  for (int a : active_inputs) {
    if (a < 0 || a >= cfg.object_size()) throw Error(ErrorKind::index, "speaker input index out of range");
    blas::add_column(w1, static_cast<std::size_t>(a), hidden);
  }
  activate(cfg.nonlinearity, hidden);
  Vec logits = affine(speaker.value("w2"), speaker.value("b2"), hidden);
  if (trace) {
    trace->active.assign(active_inputs.begin(), active_inputs.end());
    trace->hidden = hidden;
    trace->logits = logits;
  }
  return logits;
}

void or_speaker_backward(const ParameterSet& speaker, const OrGameConfig& cfg,
                         const OrSpeakerTrace& trace, std::span<const double> dlogits,
                         Gradients& grads) {
  const Array& w2 = speaker.value("w2");
  if (dlogits.size() != w2.rows()) throw Error(ErrorKind::shape, "speaker dlogits size mismatch");
  Vec dhidden(trace.hidden.size(), 0.0);
  affine_backward(w2, trace.hidden, dlogits, grads.find("w2"), grads.find("b2"), &dhidden);
  const Vec dpre = activation_backward(cfg.nonlinearity, trace.hidden, std::move(dhidden));
  if (Array* dw1 = grads.find("w1"))
    for (int a : trace.active) blas::add_to_column(*dw1, static_cast<std::size_t>(a), dpre);
  if (Array* db1 = grads.find("b1")) blas::axpy(1.0, dpre, db1->values());
}

Vec or_listener_logits(const ParameterSet& listener, const OrGameConfig& cfg,
                       const std::vector<TokenInput>& tokens, OrListenerTrace* trace) {
  if (static_cast<int>(tokens.size()) != cfg.message_length)
    throw Error(ErrorKind::shape, "listener expects message_length tokens");
  const Array& w1 = listener.value("w1");
  const Array& b1 = listener.value("b1");
  Vec hidden(b1.values().begin(), b1.values().end());
  const auto V = static_cast<std::size_t>(cfg.vocab);
  for (std::size_t pos = 0; pos < tokens.size(); ++pos) {
    const TokenInput& t = tokens[pos];
    check_token(t, cfg.vocab);
    if (t.index >= 0) {
      blas::add_column(w1, pos * V + static_cast<std::size_t>(t.index), hidden);
    } else {
      for (std::size_t v = 0; v < V; ++v)
        if (t.dense[v] != 0.0)
          for (std::size_t h = 0; h < hidden.size(); ++h) hidden[h] += w1(h, pos * V + v) * t.dense[v];
    }
  }
  activate(cfg.nonlinearity, hidden);
  Vec logits = affine(listener.value("w2"), listener.value("b2"), hidden);
  if (trace) {
    trace->tokens = tokens;
    trace->hidden = hidden;
    trace->logits = logits;
  }
  return logits;
}

void or_listener_backward(const ParameterSet& listener, const OrGameConfig& cfg,
                          const OrListenerTrace& trace, std::span<const double> dlogits,
                          Gradients* grads, std::vector<Vec>* dtokens) {
  const Array& w1 = listener.value("w1");
  const Array& w2 = listener.value("w2");
  if (dlogits.size() != w2.rows()) throw Error(ErrorKind::shape, "listener dlogits size mismatch");
  Vec dhidden(trace.hidden.size(), 0.0);
  affine_backward(w2, trace.hidden, dlogits, grad_of(grads, "w2"), grad_of(grads, "b2"), &dhidden);
  const Vec dpre = activation_backward(cfg.nonlinearity, trace.hidden, std::move(dhidden));
  const auto V = static_cast<std::size_t>(cfg.vocab);
  Array* dw1 = grad_of(grads, "w1");
  if (Array* db1 = grad_of(grads, "b1")) blas::axpy(1.0, dpre, db1->values());
  if (dtokens) dtokens->assign(trace.tokens.size(), Vec(V, 0.0));
  for (std::size_t pos = 0; pos < trace.tokens.size(); ++pos) {
    const TokenInput& t = trace.tokens[pos];
    if (dw1) {
      if (t.index >= 0) {
        blas::add_to_column(*dw1, pos * V + static_cast<std::size_t>(t.index), dpre);
      } else {
        for (std::size_t v = 0; v < V; ++v)
          if (t.dense[v] != 0.0)
            for (std::size_t h = 0; h < dpre.size(); ++h) (*dw1)(h, pos * V + v) += dpre[h] * t.dense[v];
      }
    }
    if (dtokens) {
      Vec& d = (*dtokens)[pos];
      for (std::size_t h = 0; h < dpre.size(); ++h) {
        const double g = dpre[h];
        if (g == 0.0) continue;
        auto row = w1.row(h).subspan(pos * V, V);
        for (std::size_t v = 0; v < V; ++v) d[v] += row[v] * g;
      }
    }
  }
}

Vec ibr_encode_message(const ParameterSet& listener, const IbrConfig& cfg,
                       const std::vector<TokenInput>& tokens, IbrEncoderTrace* trace,
                       RngStream* dropout_rng) {
  const Array& emb = listener.value("emb");
  const GruWeights w = GruWeights::bind(listener, "enc_");
  Vec h(static_cast<std::size_t>(cfg.hidden), 0.0);
  if (trace) {
    trace->tokens = tokens;
    trace->steps.assign(tokens.size(), {});
    trace->masks.assign(tokens.size(), {});
  }
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    check_token(tokens[i], cfg.vocab);
    Vec x = embed(emb, tokens[i]);
    Vec mask = dropout_mask(x.size(), cfg.dropout, dropout_rng);
    if (!mask.empty())
      for (std::size_t k = 0; k < x.size(); ++k) x[k] *= mask[k];
    h = gru_step(h, x, w, trace ? &trace->steps[i] : nullptr);
    if (trace) trace->masks[i] = std::move(mask);
  }
  if (trace) trace->state = h;
  return h;
}

void ibr_encode_backward(const ParameterSet& listener, const IbrEncoderTrace& trace,
                         std::span<const double> dstate, Gradients* grads,
                         std::vector<Vec>* dtokens) {
  const Array& emb = listener.value("emb");
  const GruWeights w = GruWeights::bind(listener, "enc_");
  GruGrads gg{};
  GruGrads* ggp = nullptr;
  if (grads) {
    gg = GruGrads::bind(*grads, "enc_");
    ggp = &gg;
  }
  Array* demb = grad_of(grads, "emb");
  if (dtokens) dtokens->assign(trace.tokens.size(), {});
  Vec dh(dstate.begin(), dstate.end()), dh_prev, dx;
  for (std::size_t i = trace.tokens.size(); i-- > 0;) {
    gru_step_backward(trace.steps[i], w, dh, ggp, dh_prev, dx);
    if (!trace.masks[i].empty())
      for (std::size_t k = 0; k < dx.size(); ++k) dx[k] *= trace.masks[i][k];
    embed_backward(emb, trace.tokens[i], dx, demb, dtokens ? &(*dtokens)[i] : nullptr);
    dh.swap(dh_prev);
  }
}

Vec ibr_encode_candidate(const ParameterSet& listener, std::span<const double> features) {
  return affine(listener.value("img_w"), listener.value("img_b"), features);
}

void ibr_candidate_backward(const ParameterSet& listener, std::span<const double> features,
                            std::span<const double> drepr, Gradients* grads) {
  if (!grads) return;
  affine_backward(listener.value("img_w"), features, drepr, grads->find("img_w"), grads->find("img_b"),
                  nullptr);
}

namespace {

void decoder_start(const ParameterSet& speaker, const IbrConfig& cfg, std::span<const double> features,
                   IbrSpeakerTrace& trace) {
  if (static_cast<int>(features.size()) != cfg.feature_dim)
    throw Error(ErrorKind::shape, "feature vector has wrong dimension");
  trace = {};
  trace.features.assign(features.begin(), features.end());
  trace.initial_state = affine(speaker.value("img_w"), speaker.value("img_b"), features);
}

// One decoder step from `prev` state on `input`; appends to the trace.
const Vec& decoder_step(const ParameterSet& speaker, const IbrConfig& cfg, const GruWeights& w,
                        const Vec& prev, TokenInput input, IbrSpeakerTrace& trace,
                        RngStream* dropout_rng) {
  Vec x = embed(speaker.value("emb"), input);
  Vec mask = dropout_mask(x.size(), cfg.dropout, dropout_rng);
  if (!mask.empty())
    for (std::size_t k = 0; k < x.size(); ++k) x[k] *= mask[k];
  trace.inputs.push_back(std::move(input));
  trace.masks.push_back(std::move(mask));
  trace.steps.emplace_back();
  gru_step(prev, x, w, &trace.steps.back());
  trace.logits.push_back(affine(speaker.value("out_w"), speaker.value("out_b"), trace.steps.back().out));
  return trace.logits.back();
}

}  // namespace

void ibr_speaker_teacher_forced(const ParameterSet& speaker, const IbrConfig& cfg,
                                std::span<const double> features, const Message& target,
                                IbrSpeakerTrace& trace, RngStream* dropout_rng) {
  decoder_start(speaker, cfg, features, trace);
  const GruWeights w = GruWeights::bind(speaker, "dec_");
  for (std::size_t i = 0; i < target.tokens.size(); ++i) {
    const int in = i == 0 ? kBosToken : target.tokens[i - 1];
    if (in < 0 || in >= cfg.vocab) throw Error(ErrorKind::index, "caption token outside vocabulary");
    const Vec& prev = i == 0 ? trace.initial_state : trace.steps.back().out;
    decoder_step(speaker, cfg, w, Vec(prev), TokenInput::hot(in), trace, dropout_rng);
  }
}

void ibr_speaker_rollout(const ParameterSet& speaker, const IbrConfig& cfg,
                         std::span<const double> features, const RolloutOptions& options,
                         RngStream* rng, IbrSpeakerTrace& trace, RngStream* dropout_rng) {
  decoder_start(speaker, cfg, features, trace);
  const GruWeights w = GruWeights::bind(speaker, "dec_");
  TokenInput next = TokenInput::hot(kBosToken);
  for (int i = 0; i < cfg.message_length; ++i) {
    const Vec prev = i == 0 ? trace.initial_state : trace.steps.back().out;
    const Vec& logits = decoder_step(speaker, cfg, w, prev, std::move(next), trace, dropout_rng);
    if (options.mode == SpeakMode::greedy) {
      next = TokenInput::hot(static_cast<int>(argmax(logits)));
      GumbelSample s;
      s.index = static_cast<std::size_t>(next.index);
      trace.samples.push_back(std::move(s));
      continue;
    }
    GumbelSample s;
    if (options.noise) {
      s = gumbel_softmax_st(logits, options.temperature, (*options.noise)[static_cast<std::size_t>(i)]);
    } else {
      if (!rng) throw Error(ErrorKind::contract, "sampled rollout needs an rng");
      s = gumbel_softmax_st(logits, options.temperature, *rng);
    }
    next = options.straight_through ? TokenInput::hot(static_cast<int>(s.index)) : TokenInput{-1, s.soft};
    trace.samples.push_back(std::move(s));
  }
}

void ibr_speaker_backward(const ParameterSet& speaker, const IbrConfig& cfg,
                          const IbrSpeakerTrace& trace, const std::vector<Vec>& dlogits,
                          const std::vector<Vec>& demitted, double temperature, Gradients& grads) {
  (void)cfg;
  const std::size_t n = trace.steps.size();
  const Array& emb = speaker.value("emb");
  const GruWeights w = GruWeights::bind(speaker, "dec_");
  GruGrads gg = GruGrads::bind(grads, "dec_");
  Array* demb = grads.find("emb");
  Vec dh(static_cast<std::size_t>(w.state_size()), 0.0);
  Vec dnext_token;  // gradient w.r.t. the token emitted at the current step, via the next input
  Vec dh_prev, dx, dtoken;
  for (std::size_t i = n; i-- > 0;) {
    Vec dl(trace.logits[i].size(), 0.0);
    if (i < dlogits.size() && !dlogits[i].empty()) blas::axpy(1.0, dlogits[i], dl);
    if (i < trace.samples.size() && !trace.samples[i].soft.empty()) {
      Vec demit(dl.size(), 0.0);
      bool any = false;
      if (i < demitted.size() && !demitted[i].empty()) {
        blas::axpy(1.0, demitted[i], demit);
        any = true;
      }
      if (!dnext_token.empty()) {
        blas::axpy(1.0, dnext_token, demit);
        any = true;
      }
      if (any) blas::axpy(1.0, gumbel_softmax_st_backward(trace.samples[i], temperature, demit), dl);
    }
    Vec dh_out;
    affine_backward(speaker.value("out_w"), trace.steps[i].out, dl, grads.find("out_w"),
                    grads.find("out_b"), &dh_out);
    blas::axpy(1.0, dh_out, dh);
    gru_step_backward(trace.steps[i], w, dh, &gg, dh_prev, dx);
    if (!trace.masks[i].empty())
      for (std::size_t k = 0; k < dx.size(); ++k) dx[k] *= trace.masks[i][k];
    const bool feedback = i > 0 && i - 1 < trace.samples.size() && !trace.samples[i - 1].soft.empty();
    embed_backward(emb, trace.inputs[i], dx, demb, feedback ? &dtoken : nullptr);
    dnext_token = feedback ? dtoken : Vec{};
    dh.swap(dh_prev);
  }
  affine_backward(speaker.value("img_w"), trace.features, dh, grads.find("img_w"), grads.find("img_b"),
                  nullptr);
}

SpeakerOutput speaker_forward(const AgentPair& pair, std::span<const double> input,
                              const RolloutOptions& options, RngStream* rng) {
  SpeakerOutput out;
  if (pair.arch.game == GameKind::object_reconstruction) {
    const auto& c = pair.arch.object_game;
    if (static_cast<int>(input.size()) != c.object_size())
      throw Error(ErrorKind::shape, "encoded object has wrong length");
    std::vector<int> active;
    for (std::size_t i = 0; i < input.size(); ++i)
      if (input[i] != 0.0) active.push_back(static_cast<int>(i));
    const Vec logits = or_speaker_logits(pair.speaker, c, active);
    const auto V = static_cast<std::size_t>(c.vocab);
    for (int pos = 0; pos < c.message_length; ++pos) {
      std::span<const double> l(logits.data() + static_cast<std::size_t>(pos) * V, V);
      if (options.mode == SpeakMode::greedy) {
        out.message.tokens.push_back(static_cast<int>(argmax(l)));
      } else {
        GumbelSample s = options.noise
                             ? gumbel_softmax_st(l, options.temperature, (*options.noise)[static_cast<std::size_t>(pos)])
                             : gumbel_softmax_st(l, options.temperature, *rng);
        out.message.tokens.push_back(static_cast<int>(s.index));
        out.samples.push_back(std::move(s));
      }
    }
    return out;
  }
  IbrSpeakerTrace trace;
  ibr_speaker_rollout(pair.speaker, pair.arch.referential_game, input, options, rng, trace);
  for (auto& s : trace.samples) out.message.tokens.push_back(static_cast<int>(s.index));
  if (options.mode == SpeakMode::gumbel_st) out.samples = std::move(trace.samples);
  return out;
}

}  // namespace s2p

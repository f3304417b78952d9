#include "s2p/population.hpp"

#include <algorithm>
#include <ostream>
#include <set>

#include "s2p/error.hpp"
#include "s2p/parallel.hpp"

namespace s2p {

Aggregation parse_aggregation(const std::string& name) {
  if (name == "distill") return Aggregation::distill;
  if (name == "ensemble") return Aggregation::ensemble;
  throw Error(ErrorKind::config, "unknown aggregation '" + name + "'");
}

const char* to_string(Aggregation a) { return a == Aggregation::distill ? "distill" : "ensemble"; }

std::vector<std::uint64_t> PopulationSpec::member_seeds() const {
  std::vector<std::uint64_t> out = seeds;
  if (out.empty()) {
    if (size < 1) throw Error(ErrorKind::config, "population size must be at least 1");
    for (int i = 0; i < size; ++i) out.push_back(base_seed + static_cast<std::uint64_t>(i));
  }
  if (std::set<std::uint64_t>(out.begin(), out.end()).size() != out.size())
    throw Error(ErrorKind::config, "population seeds must be distinct");
  return out;
}

std::vector<PopulationMember> train_population(const PopulationSpec& spec, const ArchitectureSpec& arch,
                                               const Environment& env, const RunOptions& options) {
  const auto seeds = spec.member_seeds();
  std::vector<PopulationMember> members(seeds.size());
  parallel_for(seeds.size(), spec.threads, [&](std::size_t i) {
    members[i].seed = seeds[i];
    members[i].run = run_s2p(init_agent_pair(arch, seeds[i]), env, spec.schedule, RngStream(seeds[i]), options);
  });
  return members;
}

std::vector<AgentPair> member_pairs(const std::vector<PopulationMember>& members) {
  std::vector<AgentPair> out;
  out.reserve(members.size());
  for (const auto& m : members) out.push_back(m.run.pair);
  return out;
}

// ---- cross-play ----

Array crossplay_matrix(std::span<const AgentPair> agents, const PairScore& score, int threads) {
  const std::size_t n = agents.size();
  Array m(n, n);
  parallel_for(n * n, threads, [&](std::size_t k) {
    const std::size_t i = k / n, j = k % n;
    AgentPair combo = agents[j];
    combo.speaker = agents[i].speaker;
    m(i, j) = score(combo);
  });
  return m;
}

Array or_crossplay_matrix(std::span<const AgentPair> agents, int n_episodes, RngStream& rng, int threads) {
  if (agents.empty()) throw Error(ErrorKind::invalid_input, "empty population");
  if (n_episodes < 1) throw Error(ErrorKind::invalid_input, "need at least one episode per cell");
  const OrGameConfig& cfg = agents.front().arch.object_game;
  std::vector<ObjectObservation> objects;
  for (int e = 0; e < n_episodes; ++e) objects.push_back(random_object(cfg.language(), rng));
  return crossplay_matrix(agents, [&](const AgentPair& p) { return evaluate_self_play(p, objects).per_property; },
                          threads);
}

Array ibr_crossplay_matrix(std::span<const AgentPair> agents, const std::vector<WorldItem>& pool, int n_episodes,
                           RngStream& rng, int threads) {
  if (agents.empty()) throw Error(ErrorKind::invalid_input, "empty population");
  if (n_episodes < 1) throw Error(ErrorKind::invalid_input, "need at least one episode per cell");
  const IbrConfig& cfg = agents.front().arch.referential_game;
  const auto trials = make_trials(pool, pool, cfg.distractors, static_cast<std::size_t>(n_episodes), rng);
  return crossplay_matrix(agents, [&](const AgentPair& p) { return evaluate_self_play_accuracy(p, trials); },
                          threads);
}

CrossplaySummary summarize_crossplay(const Array& m) {
  CrossplaySummary s;
  const std::size_t n = m.rows();
  double off = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) (i == j ? s.diagonal_mean : off) += m(i, j);
  if (n > 0) s.diagonal_mean /= static_cast<double>(n);
  if (n > 1) s.off_diagonal_mean = off / static_cast<double>(n * (n - 1));
  return s;
}

void write_crossplay_csv(std::ostream& out, const Array& m, const std::vector<std::uint64_t>& ids) {
  if (ids.size() != m.rows()) throw Error(ErrorKind::shape, "one id per agent");
  out << "speaker";
  for (auto id : ids) out << ',' << id;
  out << '\n';
  for (std::size_t i = 0; i < m.rows(); ++i) {
    out << ids[i];
    for (std::size_t j = 0; j < m.cols(); ++j) out << ',' << format_double(m(i, j));
    out << '\n';
  }
}

// ---- prediction diversity ----

std::vector<PredictionHistogram> prediction_histograms(const std::vector<std::vector<long>>& predictions) {
  if (predictions.empty()) return {};
  const std::size_t inputs = predictions.front().size();
  std::vector<PredictionHistogram> h(inputs);
  for (const auto& agent : predictions) {
    if (agent.size() != inputs) throw Error(ErrorKind::shape, "agents predicted different input counts");
    for (std::size_t k = 0; k < inputs; ++k) ++h[k][agent[k]];
  }
  return h;
}

std::vector<PredictionHistogram> or_prediction_diversity(std::span<const AgentPair> agents,
                                                         const CompositionalLanguage& language,
                                                         const std::vector<ObjectObservation>& inputs) {
  if (inputs.empty()) throw Error(ErrorKind::invalid_input, "no inputs");
  std::vector<std::vector<long>> preds;
  for (const auto& a : agents) {
    const OrGameConfig& cfg = a.arch.object_game;
    auto& row = preds.emplace_back();
    for (const auto& o : inputs)
      row.push_back(static_cast<long>(
          object_index(listener_reconstruct(a.listener, cfg, speak(language, o)), cfg.language())));
  }
  return prediction_histograms(preds);
}

std::vector<PredictionHistogram> ibr_prediction_diversity(std::span<const AgentPair> agents,
                                                          const std::vector<ReferentialTrial>& trials) {
  if (trials.empty()) throw Error(ErrorKind::invalid_input, "no inputs");
  std::vector<std::vector<long>> preds;
  for (const auto& a : agents) {
    auto& row = preds.emplace_back();
    for (const auto& t : trials)
      row.push_back(static_cast<long>(
          listener_choice(a.listener, a.arch.referential_game, t.candidates[t.target]->caption, t)));
  }
  return prediction_histograms(preds);
}

double fraction_with_disagreement(const std::vector<PredictionHistogram>& histograms) {
  if (histograms.empty()) return 0.0;
  std::size_t multi = 0;
  for (const auto& h : histograms) multi += h.size() > 1;
  return static_cast<double>(multi) / static_cast<double>(histograms.size());
}

void write_diversity_csv(std::ostream& out, const std::vector<PredictionHistogram>& histograms) {
  out << "input,label,count\n";
  for (std::size_t k = 0; k < histograms.size(); ++k)
    for (const auto& [label, count] : histograms[k]) out << k << ',' << label << ',' << count << '\n';
}

// ---- ensembling ----

int majority_vote(std::span<const int> votes) {
  if (votes.empty()) throw Error(ErrorKind::invalid_input, "no votes");
  std::map<int, int> counts;
  for (int v : votes) ++counts[v];
  int best = counts.begin()->first, best_count = 0;
  for (const auto& [label, c] : counts)
    if (c > best_count) {
      best = label;
      best_count = c;
    }
  return best;
}

ObjectObservation ensemble_reconstruct(std::span<const AgentPair> agents, const Message& message) {
  if (agents.empty()) throw Error(ErrorKind::invalid_input, "empty ensemble");
  const OrGameConfig& cfg = agents.front().arch.object_game;
  std::vector<ObjectObservation> preds;
  for (const auto& a : agents) preds.push_back(listener_reconstruct(a.listener, cfg, message));
  ObjectObservation out;
  std::vector<int> votes(agents.size());
  for (int j = 0; j < cfg.properties; ++j) {
    for (std::size_t a = 0; a < preds.size(); ++a) votes[a] = preds[a].types[static_cast<std::size_t>(j)];
    out.types.push_back(majority_vote(votes));
  }
  return out;
}

std::size_t ensemble_choice(std::span<const AgentPair> agents, const Message& message, const ReferentialTrial& trial) {
  if (agents.empty()) throw Error(ErrorKind::invalid_input, "empty ensemble");
  std::vector<int> votes;
  for (const auto& a : agents)
    votes.push_back(static_cast<int>(listener_choice(a.listener, a.arch.referential_game, message, trial)));
  return static_cast<std::size_t>(majority_vote(votes));
}

OrAccuracy ensemble_accuracy(std::span<const AgentPair> agents, const CompositionalLanguage& language,
                             const std::vector<ObjectObservation>& objects) {
  if (objects.empty()) throw Error(ErrorKind::invalid_input, "empty evaluation set");
  double props = 0, exact = 0, total = 0;
  for (const auto& o : objects) {
    const ObjectObservation p = ensemble_reconstruct(agents, speak(language, o));
    int hits = 0;
    for (std::size_t j = 0; j < o.types.size(); ++j) hits += p.types[j] == o.types[j];
    props += hits;
    total += static_cast<double>(o.types.size());
    exact += hits == static_cast<int>(o.types.size());
  }
  return {props / total, exact / static_cast<double>(objects.size())};
}

double ensemble_selection_accuracy(std::span<const AgentPair> agents, const std::vector<ReferentialTrial>& trials) {
  if (trials.empty()) throw Error(ErrorKind::invalid_input, "no evaluation trials");
  std::size_t hits = 0;
  for (const auto& t : trials) hits += ensemble_choice(agents, t.candidates[t.target]->caption, t) == t.target;
  return static_cast<double>(hits) / static_cast<double>(trials.size());
}

// ---- distillation ----

Message OrTeacher::utterance(const OrGameConfig& cfg, const ObjectObservation& object) const {
  if (language) return speak(*language, object);
  return speaker_greedy(pair->speaker, cfg, object);
}

std::vector<Vec> OrTeacher::listen(const OrGameConfig& cfg, const Message& message) const {
  if (!language) return listener_distributions(pair->listener, cfg, message);
  const auto t = static_cast<std::size_t>(cfg.types);
  std::vector<Vec> out(static_cast<std::size_t>(cfg.properties), Vec(t, 0.0));
  std::vector<int> named(out.size(), 0);
  for (int w : message.tokens)
    if (auto m = language->meaning_of(w)) {
      out[static_cast<std::size_t>(m->first)][static_cast<std::size_t>(m->second)] += 1.0;
      ++named[static_cast<std::size_t>(m->first)];
    }
  for (std::size_t j = 0; j < out.size(); ++j)
    for (double& v : out[j]) v = named[j] ? v / named[j] : 1.0 / static_cast<double>(t);
  return out;
}

std::vector<Vec> OrTeacher::speak_distribution(const OrGameConfig& cfg, const ObjectObservation& object) const {
  if (!language) return speaker_distributions(pair->speaker, cfg, object);
  std::vector<Vec> out;
  for (int w : speak(*language, object).tokens) {
    Vec v(static_cast<std::size_t>(cfg.vocab), 0.0);
    v[static_cast<std::size_t>(w)] = 1.0;
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<OrTeacher> neural_teachers(std::span<const AgentPair> agents) {
  std::vector<OrTeacher> out;
  for (const auto& a : agents) out.push_back({&a, nullptr});
  return out;
}

std::vector<OrTeacher> expert_teachers(std::span<const CompositionalLanguage> languages) {
  std::vector<OrTeacher> out;
  for (const auto& l : languages) out.push_back({nullptr, &l});
  return out;
}

namespace {

void accumulate_mean(std::vector<Vec>& acc, const std::vector<Vec>& add, double weight) {
  if (acc.empty()) acc.assign(add.size(), Vec(add.front().size(), 0.0));
  for (std::size_t i = 0; i < add.size(); ++i) blas::axpy(weight, add[i], acc[i]);
}

void apply(ParameterSet& params, Gradients& g, double scale, const OptimizerConfig& opt) {
  g.scale(scale);
  optimizer_step(params, g, opt);
}

void check_config(const DistillConfig& c) {
  if (c.steps < 0 || c.batch < 1) throw Error(ErrorKind::config, "invalid distillation budget");
  if (!(c.caption_fraction >= 0.0 && c.caption_fraction <= 1.0))
    throw Error(ErrorKind::config, "caption fraction must lie in [0, 1]");
}

}  // namespace

AgentPair distill_or(std::span<const OrTeacher> teachers, AgentPair student, const DistillConfig& config,
                     RngStream& rng) {
  if (teachers.empty()) throw Error(ErrorKind::contract, "distillation needs at least one teacher");
  check_config(config);
  const OrGameConfig& cfg = student.arch.object_game;
  if (student.arch.game != GameKind::object_reconstruction)
    throw Error(ErrorKind::contract, "student is not an object-game agent");
  for (const auto& t : teachers) {
    if (t.pair && (t.pair->arch.game != GameKind::object_reconstruction ||
                   t.pair->arch.object_game.object_size() != cfg.object_size() ||
                   t.pair->arch.object_game.message_size() != cfg.message_size()))
      throw Error(ErrorKind::contract, "teacher architecture differs from the student");
    if (!t.pair && !t.language) throw Error(ErrorKind::contract, "empty teacher");
  }
  const double w = 1.0 / static_cast<double>(teachers.size());
  const bool speaker = config.distill_speaker && !student.speaker_frozen;
  for (int step = 0; step < config.steps; ++step) {
    Gradients gl = Gradients::zeros_like(student.listener, true);
    Gradients gs = speaker ? Gradients::zeros_like(student.speaker, true) : Gradients{};
    for (int b = 0; b < config.batch; ++b) {
      const ObjectObservation o = random_object(cfg.language(), rng);
      const Message m = teachers[rng.uniform_index(teachers.size())].utterance(cfg, o);
      std::vector<Vec> target;
      for (const auto& t : teachers) accumulate_mean(target, t.listen(cfg, m), w);
      or_listener_soft_loss(student.listener, cfg, m, target, &gl);
      if (speaker) {
        std::vector<Vec> tokens;
        for (const auto& t : teachers) accumulate_mean(tokens, t.speak_distribution(cfg, o), w);
        or_speaker_soft_loss(student.speaker, cfg, o, tokens, &gs);
      }
    }
    apply(student.listener, gl, 1.0 / config.batch, config.optimizer);
    if (speaker) apply(student.speaker, gs, 1.0 / config.batch, config.optimizer);
  }
  return student;
}

AgentPair distill_ibr(std::span<const AgentPair> teachers, AgentPair student, const std::vector<WorldItem>& inputs,
                      const DistillConfig& config, RngStream& rng, const std::vector<WorldItem>& captioned) {
  if (teachers.empty()) throw Error(ErrorKind::contract, "distillation needs at least one teacher");
  check_config(config);
  if (student.arch.game != GameKind::referential) throw Error(ErrorKind::contract, "student is not a referential agent");
  if (inputs.empty()) throw Error(ErrorKind::invalid_input, "no distillation inputs");
  const IbrConfig& cfg = student.arch.referential_game;
  for (const auto& t : teachers)
    if (t.arch.game != GameKind::referential || t.arch.referential_game.vocab != cfg.vocab ||
        t.arch.referential_game.feature_dim != cfg.feature_dim ||
        t.arch.referential_game.message_length != cfg.message_length)
      throw Error(ErrorKind::contract, "teacher architecture differs from the student");
  const double w = 1.0 / static_cast<double>(teachers.size());
  const bool speaker = config.distill_speaker && !student.speaker_frozen;
  for (int step = 0; step < config.steps; ++step) {
    Gradients gl = Gradients::zeros_like(student.listener, true);
    Gradients gs = speaker ? Gradients::zeros_like(student.speaker, true) : Gradients{};
    for (int b = 0; b < config.batch; ++b) {
      const bool use_caption = !captioned.empty() && rng.bernoulli(config.caption_fraction);
      const WorldItem& target = use_caption ? captioned[rng.uniform_index(captioned.size())]
                                            : inputs[rng.uniform_index(inputs.size())];
      const ReferentialTrial trial = make_trial(target, inputs, cfg.distractors, rng);
      const Message m = use_caption ? target.caption
                                    : ibr_speaker_greedy(teachers[rng.uniform_index(teachers.size())].speaker, cfg,
                                                         target.features);
      Vec choice(trial.candidates.size(), 0.0);
      for (const auto& t : teachers)
        blas::axpy(w, listener_choice_distribution(t.listener, t.arch.referential_game, m, trial), choice);
      lsn_soft_loss(student.listener, cfg, m, trial, choice, &gl);
      if (speaker) {
        std::vector<Vec> tokens;
        for (const auto& t : teachers)
          accumulate_mean(tokens, ibr_speaker_distributions(t.speaker, t.arch.referential_game, target.features, m), w);
        spk_soft_loss(student.speaker, cfg, target.features, m, tokens, &gs);
      }
    }
    apply(student.listener, gl, 1.0 / config.batch, config.optimizer);
    if (speaker) apply(student.speaker, gs, 1.0 / config.batch, config.optimizer);
  }
  return student;
}

}  // namespace s2p

// Object-game experiments: seed placement sweep, single-property case study,
// and distillation from programmatic experts versus populations.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "experiment_support.hpp"
#include "s2p/error.hpp"
#include "s2p/parallel.hpp"

namespace s2p::detail {

namespace {

constexpr std::uint64_t kStageOneTag = 11;
constexpr std::uint64_t kStageTwoTag = 12;
constexpr std::uint64_t kFinetuneTag = 13;

ScheduleSpec with_kind(ScheduleSpec s, ScheduleKind kind) {
  s.kind = kind;
  return s;
}

struct ArmRun {
  double test = 0.0;
  long steps = 0;
};

struct SweepArm {
  std::string name;
  bool split = false;
  double fraction = 0.0;
  ScheduleKind kind = ScheduleKind::supervised;
};

std::string split_name(double f) {
  std::ostringstream os;
  os << "split_" << format_double(f);
  return os.str();
}

// First n training pairs plus the whole validation split.
Dataset seed_part(const Dataset& d, std::size_t n) {
  Dataset out;
  std::size_t taken = 0;
  for (const auto& e : d.pairs) {
    if (e.split == Split::val) out.pairs.push_back(e);
    else if (taken < n) {
      out.pairs.push_back(e);
      ++taken;
    }
  }
  return out;
}

ArmRun run_sweep_arm(const SweepArm& arm, const ObjectWorld& w, const ScheduleSpec& base, std::size_t budget) {
  const Dataset d = w.dataset(budget);
  const OrEnvironment env = w.environment(d);
  const ArchitectureSpec arch = ArchitectureSpec::object_reconstruction(w.game);
  AgentPair pair = init_agent_pair(arch, w.seed);
  ArmRun out;
  if (!arm.split) {
    const RunResult r = run_s2p(std::move(pair), env, with_kind(base, arm.kind), RngStream(w.seed));
    out.test = r.test_acc;
    out.steps = r.total_steps;
    return out;
  }
  const auto n_seed = static_cast<std::size_t>(std::llround(arm.fraction * static_cast<double>(d.train_size())));
  if (n_seed > 0) {
    const OrEnvironment seed_env = w.environment(seed_part(d, n_seed));
    RunResult r = run_s2p(std::move(pair), seed_env, with_kind(base, ScheduleKind::supervised),
                          RngStream(w.seed).derive(kStageOneTag));
    pair = std::move(r.pair);
    out.steps += r.total_steps;
  }
  ScheduleSpec rest = with_kind(base, ScheduleKind::sched);
  rest.pretrain_steps = 0;
  const RunResult r = run_s2p(std::move(pair), env, rest, RngStream(w.seed).derive(kStageTwoTag));
  out.test = r.test_acc;
  out.steps += r.total_steps;
  return out;
}

std::vector<std::size_t> budgets_of(const ExperimentConfig& c, const std::string& key) {
  std::vector<std::size_t> out;
  for (long b : c.get_ints(key)) {
    if (b < 1) throw Error(ErrorKind::config, key + " entries must be positive");
    out.push_back(static_cast<std::size_t>(b));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  if (out.empty()) throw Error(ErrorKind::config, key + " is empty");
  return out;
}

void check_budgets(const OrGameConfig& g, const std::vector<std::size_t>& budgets, const std::string& key) {
  if (budgets.back() > input_space_size(g.language()))
    throw Error(ErrorKind::config, key + " exceeds the number of distinct objects");
}

}  // namespace

// ---- seed placement sweep ----

ExperimentResult exp_seed_sweep(const ExperimentConfig& c, OutputDir& out) {
  const auto seeds = c.get_seeds();
  const OrGameConfig game = c.object_game();
  const auto budgets = budgets_of(c, "sweep.budgets");
  check_budgets(game, budgets, "sweep.budgets");
  const double threshold = c.get_double("threshold");
  const bool early_stop = c.get_bool("sweep.early_stop");
  const ScheduleSpec base = c.schedule();

  std::vector<SweepArm> arms;
  const auto splits = c.get_doubles("sweep.splits");
  if (splits.empty()) throw Error(ErrorKind::config, "sweep.splits is empty");
  for (double f : splits) {
    if (f < 0 || f > 1) throw Error(ErrorKind::config, "sweep.splits entries must lie in [0, 1]");
    arms.push_back({split_name(f), true, f, ScheduleKind::sched});
  }
  if (c.get_bool("sweep.endpoints")) {
    arms.push_back({"sp2sup", false, 0.0, ScheduleKind::sp2sup});
    arms.push_back({"sup2sp", false, 0.0, ScheduleKind::sup2sp});
  }
  if (c.get_bool("sweep.baseline")) arms.push_back({"supervised", false, 0.0, ScheduleKind::supervised});

  // runs[seed][arm] -> (budget, result) in budget order
  using ArmLog = std::vector<std::pair<std::size_t, ArmRun>>;
  std::vector<std::vector<ArmLog>> runs(seeds.size(), std::vector<ArmLog>(arms.size()));
  parallel_for(seeds.size() * arms.size(), c.threads(), [&](std::size_t job) {
    const std::size_t si = job / arms.size(), ai = job % arms.size();
    const ObjectWorld w = make_object_world(c, seeds[si], budgets.back());
    for (std::size_t b : budgets) {
      const ArmRun r = run_sweep_arm(arms[ai], w, base, b);
      runs[si][ai].emplace_back(b, r);
      if (early_stop && r.test >= threshold) break;
    }
  });

  {
    auto f = out.open("sweep_runs.csv");
    f << "seed,arm,budget,steps,test_acc\n";
    for (std::size_t si = 0; si < seeds.size(); ++si)
      for (std::size_t ai = 0; ai < arms.size(); ++ai)
        for (const auto& [b, r] : runs[si][ai])
          f << seeds[si] << ',' << arms[ai].name << ',' << b << ',' << r.steps << ',' << format_double(r.test) << '\n';
  }

  auto min_budget = [&](std::size_t si, std::size_t ai) {
    for (const auto& [b, r] : runs[si][ai])
      if (r.test >= threshold) return static_cast<long>(b);
    return kNotReached;
  };

  ExperimentResult result;
  {
    auto f = out.open("summary.csv");
    f << "arm";
    for (auto s : seeds) f << ",seed" << s;
    f << ",reached,mean_min_budget\n";
    for (std::size_t ai = 0; ai < arms.size(); ++ai) {
      f << arms[ai].name;
      std::vector<double> reached;
      for (std::size_t si = 0; si < seeds.size(); ++si) {
        const long b = min_budget(si, ai);
        f << ',' << budget_text(b);
        if (b != kNotReached) reached.push_back(static_cast<double>(b));
      }
      f << ',' << reached.size() << ',' << (reached.empty() ? std::string("none") : format_double(mean_sd(reached).mean))
        << '\n';
    }
    std::string optimal = "n/a";
    const LanguageConfig lc = game.language();
    if (lc.types > lc.properties && lc.vocab == lc.pair_count())
      optimal = std::to_string(optimal_seed_construction(CompositionalLanguage::identity(lc)).size());
    f << "optimal";
    for (std::size_t si = 0; si < seeds.size(); ++si) f << ',' << optimal;
    f << ',' << seeds.size() << ',' << optimal << '\n';
  }

  // Crossover against the supervised baseline: smallest budget at which the
  // all-in-seed arm matches or beats it, over budgets both arms ran.
  const auto full_it = std::find_if(arms.begin(), arms.end(), [](const SweepArm& a) { return a.split && a.fraction == 1.0; });
  const auto base_it = std::find_if(arms.begin(), arms.end(), [](const SweepArm& a) { return a.name == "supervised"; });
  if (full_it != arms.end() && base_it != arms.end()) {
    auto f = out.open("crossover.csv");
    f << "seed,crossover_budget\n";
    const std::size_t fa = static_cast<std::size_t>(full_it - arms.begin());
    const std::size_t ba = static_cast<std::size_t>(base_it - arms.begin());
    for (std::size_t si = 0; si < seeds.size(); ++si) {
      long cross = kNotReached;
      for (const auto& [b, r] : runs[si][fa]) {
        const auto it = std::find_if(runs[si][ba].begin(), runs[si][ba].end(), [b = b](const auto& x) { return x.first == b; });
        if (it != runs[si][ba].end() && r.test >= it->second.test) {
          cross = static_cast<long>(b);
          break;
        }
      }
      f << seeds[si] << ',' << budget_text(cross) << '\n';
    }
  }

  if (full_it != arms.end()) {
    const std::size_t fa = static_cast<std::size_t>(full_it - arms.begin());
    std::vector<bool> wins;
    for (std::size_t si = 0; si < seeds.size(); ++si) {
      const long mine = min_budget(si, fa);
      bool ok = mine != kNotReached;
      for (std::size_t ai = 0; ai < arms.size() && ok; ++ai)
        if (ai != fa && (arms[ai].split || arms[ai].kind == ScheduleKind::sp2sup)) ok = mine <= min_budget(si, ai);
      wins.push_back(ok);
    }
    const bool with_sp2sup = std::any_of(arms.begin(), arms.end(), [](const SweepArm& a) { return a.kind == ScheduleKind::sp2sup && !a.split; });
    result.findings.push_back(majority_finding("all_in_seed_fewest_samples", wins, c.get_double("assert.majority"),
                                               with_sp2sup ? "min budget of split_1 <= every other split arm and sp2sup"
                                                           : "min budget of split_1 <= every other split arm"));
  }
  return result;
}

// ---- single-property case study ----

namespace {

struct SimpleOutcome {
  std::map<Phase, std::vector<int>> mapping;  // word -> listener's type at the end of each phase
  bool consistent = false;
  bool injective = false;
  bool solving = false;
};

std::vector<int> word_mapping(const AgentPair& pair, const OrGameConfig& g) {
  std::vector<int> out;
  for (int w = 0; w < g.vocab; ++w) out.push_back(listener_reconstruct(pair.listener, g, Message{{w}}).types[0]);
  return out;
}

SimpleOutcome run_simple(const OrGameConfig& g, const OrTrainingConfig& training, const ScheduleSpec& spec,
                         const CompositionalLanguage& language, int supervised_words, std::uint64_t seed) {
  std::vector<ObjectObservation> objects;
  for (int w = 0; w < supervised_words; ++w) {
    const auto meaning = language.meaning_of(w);
    if (meaning) objects.push_back(ObjectObservation{{meaning->second}});
  }
  const OrEnvironment env(g, language, make_dataset(language, objects, 0.0), training,
                          seed_stream(seed, stream::evaluation));
  SimpleOutcome out;
  RunOptions options;
  options.select_best = false;
  options.after_step = [&](const UpdateStep& step, const AgentPair& pair) { out.mapping[step.phase] = word_mapping(pair, g); };
  const RunResult r = run_s2p(init_agent_pair(ArchitectureSpec::object_reconstruction(g), seed), env, spec,
                              RngStream(seed), options);
  const std::vector<int> final_map = word_mapping(r.pair, g);
  out.consistent = true;
  for (const auto& o : objects)
    if (final_map[static_cast<std::size_t>(language.word_of(0, o.types[0]))] != o.types[0]) out.consistent = false;
  out.injective = std::set<int>(final_map.begin(), final_map.end()).size() == final_map.size();
  std::vector<ObjectObservation> all;
  for (int t = 0; t < g.types; ++t) all.push_back(ObjectObservation{{t}});
  out.solving = evaluate_self_play(r.pair, all).per_property == 1.0;
  return out;
}

const char* category(const SimpleOutcome& o) {
  if (!o.solving) return "non-solving";
  if (!o.consistent) return "inconsistent";
  return o.injective ? "consistent-solving" : "consistent-solving-non-injective";
}

}  // namespace

ExperimentResult exp_simple_game(const ExperimentConfig& c, OutputDir& out) {
  const auto seeds = c.get_seeds();
  OrGameConfig g = c.object_game();
  g.properties = 1;
  g.message_length = 1;
  g.types = static_cast<int>(c.get_int("simple.types"));
  g.vocab = g.types;
  g.validate();
  const int words = static_cast<int>(c.get_int("simple.words"));
  if (words < 1 || words > g.vocab) throw Error(ErrorKind::config, "simple.words must lie in [1, types]");
  const OrTrainingConfig training = c.object_training();
  const ScheduleSpec base = c.schedule();
  const bool control = c.get_bool("simple.control");

  struct Variant {
    std::string name;
    ScheduleKind kind;
    int words;
  };
  std::vector<Variant> variants{{"sup2sp", ScheduleKind::sup2sp, words}, {"sp2sup", ScheduleKind::sp2sup, words}};
  if (control) {
    variants.push_back({"sup2sp_all_words", ScheduleKind::sup2sp, g.vocab});
    variants.push_back({"sp2sup_all_words", ScheduleKind::sp2sup, g.vocab});
  }

  std::vector<std::vector<SimpleOutcome>> outcomes(variants.size(), std::vector<SimpleOutcome>(seeds.size()));
  parallel_for(variants.size() * seeds.size(), c.threads(), [&](std::size_t job) {
    const std::size_t vi = job / seeds.size(), si = job % seeds.size();
    RngStream lang_rng = seed_stream(seeds[si], stream::language);
    const CompositionalLanguage language = make_target_language(g.language(), lang_rng);
    outcomes[vi][si] = run_simple(g, training, with_kind(base, variants[vi].kind), language, variants[vi].words, seeds[si]);
  });

  {
    auto f = out.open("mappings.csv");
    f << "variant,seed,phase";
    for (int w = 0; w < g.vocab; ++w) f << ",word" << w;
    f << '\n';
    for (std::size_t vi = 0; vi < variants.size(); ++vi)
      for (std::size_t si = 0; si < seeds.size(); ++si)
        for (const auto& [phase, m] : outcomes[vi][si].mapping) {
          f << variants[vi].name << ',' << seeds[si] << ',' << to_string(phase);
          for (int t : m) f << ',' << t;
          f << '\n';
        }
  }
  {
    auto f = out.open("outcomes.csv");
    f << "variant,seed,consistent,injective,solving,category\n";
    for (std::size_t vi = 0; vi < variants.size(); ++vi)
      for (std::size_t si = 0; si < seeds.size(); ++si) {
        const auto& o = outcomes[vi][si];
        f << variants[vi].name << ',' << seeds[si] << ',' << o.consistent << ',' << o.injective << ',' << o.solving << ','
          << category(o) << '\n';
      }
  }

  ExperimentResult result;
  const double majority = c.get_double("assert.majority");
  std::vector<bool> good, bad;
  for (const auto& o : outcomes[0]) good.push_back(o.consistent && o.injective);
  for (const auto& o : outcomes[1]) bad.push_back(!(o.consistent && o.injective));
  result.findings.push_back(majority_finding("sup2sp_consistent_injective", good, majority));
  result.findings.push_back(majority_finding("sp2sup_inconsistent_or_not_injective", bad, majority));
  if (control) {
    std::vector<bool> both;
    for (std::size_t si = 0; si < seeds.size(); ++si) both.push_back(outcomes[2][si].solving && outcomes[3][si].solving);
    result.findings.push_back(majority_finding("all_words_both_orders_solve", both, majority));
  }
  return result;
}

// ---- distillation from programmatic experts versus populations ----

ExperimentResult exp_perfect_emcomm(const ExperimentConfig& c, OutputDir& out) {
  const auto seeds = c.get_seeds();
  const OrGameConfig game = c.object_game();
  const auto grid = budgets_of(c, "emcomm.x_grid");
  check_budgets(game, grid, "emcomm.x_grid");
  const double threshold = c.get_double("threshold");
  const bool early_stop = c.get_bool("emcomm.early_stop");
  const int size = static_cast<int>(c.get_int("population.size"));
  const ScheduleSpec base = c.schedule();
  const ScheduleSpec member_spec = with_kind(base, parse_schedule_kind(c.get("emcomm.schedule")));
  const DistillConfig distill = c.distillation();
  const ArchitectureSpec arch = ArchitectureSpec::object_reconstruction(game);

  struct Point {
    std::size_t x;
    double test;
  };
  std::vector<std::vector<Point>> expert(seeds.size()), pop(seeds.size());

  for (std::size_t si = 0; si < seeds.size(); ++si) {
    const std::uint64_t s = seeds[si];
    const ObjectWorld w = make_object_world(c, s, grid.back());

    // Expert arm: one student distilled from independently sampled languages.
    std::vector<CompositionalLanguage> languages;
    RngStream lc_rng = seed_stream(s, stream::language).derive(2);
    for (int i = 0; i < size; ++i) languages.push_back(sample_compositional_language(game.language(), lc_rng));
    const auto experts = expert_teachers(languages);
    RngStream distill_rng = seed_stream(s, stream::distill);
    const AgentPair prior = distill_or(experts, init_agent_pair(arch, s * 1000), distill, distill_rng);

    for (std::size_t x : grid) {
      const OrEnvironment env = w.environment(w.dataset(x));
      const RunResult r = run_s2p(prior, env, with_kind(base, ScheduleKind::supervised), RngStream(s).derive(kFinetuneTag));
      expert[si].push_back({x, r.test_acc});
      if (early_stop && r.test_acc >= threshold) break;
    }
    for (std::size_t x : grid) {
      const OrEnvironment env = w.environment(w.dataset(x));
      PopulationSpec spec;
      spec.seeds = population_seeds(s, size);
      spec.schedule = member_spec;
      spec.threads = c.threads();
      const auto pairs = member_pairs(train_population(spec, arch, env));
      const auto teachers = neural_teachers(pairs);
      RngStream rng = seed_stream(s, stream::distill).derive(x);
      const AgentPair student = distill_or(teachers, init_agent_pair(arch, s * 1000), distill, rng);
      const double acc = env.test_accuracy(student);
      pop[si].push_back({x, acc});
      if (early_stop && acc >= threshold) break;
    }
  }

  auto min_x = [&](const std::vector<Point>& pts) {
    for (const auto& p : pts)
      if (p.test >= threshold) return static_cast<long>(p.x);
    return kNotReached;
  };
  {
    auto f = out.open("emcomm_runs.csv");
    f << "seed,arm,x,test_acc\n";
    for (std::size_t si = 0; si < seeds.size(); ++si) {
      for (const auto& p : expert[si]) f << seeds[si] << ",expert_distill_finetune," << p.x << ',' << format_double(p.test) << '\n';
      for (const auto& p : pop[si]) f << seeds[si] << ",population," << p.x << ',' << format_double(p.test) << '\n';
    }
  }
  std::vector<bool> wins;
  {
    auto f = out.open("summary.csv");
    f << "seed,expert_min_x,population_min_x,ratio\n";
    for (std::size_t si = 0; si < seeds.size(); ++si) {
      const long e = min_x(expert[si]), p = min_x(pop[si]);
      std::string ratio = "n/a";
      if (e != kNotReached && p != kNotReached) ratio = format_double(static_cast<double>(e) / static_cast<double>(p));
      f << seeds[si] << ',' << budget_text(e) << ',' << budget_text(p) << ',' << ratio << '\n';
      wins.push_back(p != kNotReached && e > p);
    }
  }
  ExperimentResult result;
  result.findings.push_back(majority_finding("expert_arm_needs_more_samples", wins, c.get_double("assert.majority"),
                                             "population min X < expert min X (never reached counts as infinite)"));
  return result;
}

}  // namespace s2p::detail

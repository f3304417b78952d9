// Referential-game experiments on the synthetic world: schedule comparison
// with block trajectories, and population aggregation.

#include <algorithm>
#include <cmath>
#include <sstream>

#include "experiment_support.hpp"
#include "s2p/error.hpp"
#include "s2p/parallel.hpp"

namespace s2p::detail {

namespace {

struct ZigZag {
  int sp_blocks = 0;
  int sp_drops = 0;
  bool best_monotone = true;
  double drop_fraction() const { return sp_blocks ? static_cast<double>(sp_drops) / sp_blocks : 0.0; }
};

// A self-play block "drops" when D_val accuracy at its end is below the value
// recorded at the end of the preceding block (or pretraining). Best-so-far is
// tracked over supervised block ends.
ZigZag zigzag(const std::vector<BlockRecord>& blocks) {
  ZigZag z;
  double best = -1.0;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto& b = blocks[i];
    if (b.phase != Phase::main) continue;
    if (b.kind == StepKind::sp && i > 0) {
      ++z.sp_blocks;
      if (b.val_acc < blocks[i - 1].val_acc) ++z.sp_drops;
    } else if (b.kind == StepKind::sup) {
      const double running = std::max(best, b.val_acc);
      if (running < best) z.best_monotone = false;
      best = running;
    }
  }
  return z;
}

bool interleaved(ScheduleKind k) {
  return k == ScheduleKind::rand || k == ScheduleKind::sched || k == ScheduleKind::sched_frz ||
         k == ScheduleKind::sched_rand_frz;
}

std::size_t budget_of(const ExperimentConfig& c, const std::string& key) {
  const long b = c.get_int(key);
  if (b < 1) throw Error(ErrorKind::config, key + " must be positive");
  return static_cast<std::size_t>(b);
}

}  // namespace

ExperimentResult exp_schedules(const ExperimentConfig& c, OutputDir& out) {
  const auto seeds = c.get_seeds();
  const std::size_t budget = budget_of(c, "schedules.budget");
  std::vector<ScheduleKind> kinds;
  for (const auto& k : c.get_strings("schedules.kinds")) kinds.push_back(parse_schedule_kind(k));
  if (kinds.empty()) throw Error(ErrorKind::config, "schedules.kinds is empty");
  const ScheduleSpec base = c.schedule();

  std::vector<std::vector<RunResult>> runs(seeds.size(), std::vector<RunResult>(kinds.size()));
  std::vector<ReferentialWorld> worlds;
  for (auto s : seeds) worlds.push_back(make_referential_world(c, s));
  parallel_for(seeds.size() * kinds.size(), c.threads(), [&](std::size_t job) {
    const std::size_t si = job / kinds.size(), ki = job % kinds.size();
    const ReferentialWorld& w = worlds[si];
    const IbrEnvironment env(w.game, w.data(budget), w.training, seed_stream(seeds[si], stream::evaluation));
    ScheduleSpec spec = base;
    spec.kind = kinds[ki];
    RunOptions options;
    options.record_blocks = true;
    RunResult r = run_s2p(init_agent_pair(ArchitectureSpec::referential(w.game), seeds[si]), env, spec,
                          RngStream(seeds[si]), options);
    r.pair = AgentPair{};  // parameters are not needed past this point
    runs[si][ki] = std::move(r);
  });

  {
    auto f = out.open("schedule_test.csv");
    f << "schedule";
    for (auto s : seeds) f << ",seed" << s;
    f << ",mean,sd\n";
    for (std::size_t ki = 0; ki < kinds.size(); ++ki) {
      std::vector<double> xs;
      f << to_string(kinds[ki]);
      for (std::size_t si = 0; si < seeds.size(); ++si) {
        xs.push_back(runs[si][ki].test_acc);
        f << ',' << format_double(runs[si][ki].test_acc);
      }
      const auto ms = mean_sd(xs);
      f << ',' << format_double(ms.mean) << ',' << format_double(ms.sd) << '\n';
    }
  }
  for (std::size_t si = 0; si < seeds.size(); ++si)
    for (std::size_t ki = 0; ki < kinds.size(); ++ki) {
      auto f = out.open("trajectories/" + std::string(to_string(kinds[ki])) + "_seed" + std::to_string(seeds[si]) + ".csv");
      write_block_csv(f, runs[si][ki].blocks);
    }

  ExperimentResult result;
  const double majority = c.get_double("assert.majority");
  {
    auto f = out.open("zigzag.csv");
    f << "schedule,seed,sp_blocks,sp_drops,drop_fraction,best_so_far_monotone\n";
    std::vector<bool> sched_wins;
    for (std::size_t ki = 0; ki < kinds.size(); ++ki) {
      if (!interleaved(kinds[ki])) continue;
      for (std::size_t si = 0; si < seeds.size(); ++si) {
        const ZigZag z = zigzag(runs[si][ki].blocks);
        f << to_string(kinds[ki]) << ',' << seeds[si] << ',' << z.sp_blocks << ',' << z.sp_drops << ','
          << format_double(z.drop_fraction()) << ',' << z.best_monotone << '\n';
        if (kinds[ki] == ScheduleKind::sched) sched_wins.push_back(z.sp_blocks > 0 && z.drop_fraction() > 0.5 && z.best_monotone);
      }
    }
    if (!sched_wins.empty())
      result.findings.push_back(majority_finding("sched_zigzag", sched_wins, majority,
                                                 "more than half of self-play blocks end below the previous block"));
  }

  const auto sup2sp = std::find(kinds.begin(), kinds.end(), ScheduleKind::sup2sp);
  if (sup2sp != kinds.end()) {
    std::vector<bool> wins;
    bool any = false;
    for (std::size_t si = 0; si < seeds.size(); ++si) {
      std::vector<double> others;
      for (std::size_t ki = 0; ki < kinds.size(); ++ki)
        if (interleaved(kinds[ki])) others.push_back(runs[si][ki].test_acc);
      if (others.empty()) continue;
      any = true;
      wins.push_back(runs[si][static_cast<std::size_t>(sup2sp - kinds.begin())].test_acc < mean_sd(others).mean);
    }
    if (any)
      result.findings.push_back(majority_finding("sup2sp_underperforms_interleaved", wins, majority,
                                                 "sup2sp test accuracy below the mean of the interleaved schedules"));
  }
  return result;
}

ExperimentResult exp_population(const ExperimentConfig& c, OutputDir& out) {
  const auto seeds = c.get_seeds();
  const int size = static_cast<int>(c.get_int("population.size"));
  std::vector<std::size_t> budgets;
  for (long b : c.get_ints("population.budgets")) {
    if (b < 1) throw Error(ErrorKind::config, "population.budgets entries must be positive");
    budgets.push_back(static_cast<std::size_t>(b));
  }
  if (budgets.empty()) throw Error(ErrorKind::config, "population.budgets is empty");
  const ScheduleSpec base = c.schedule();
  const DistillConfig distill = c.distillation();

  struct Arms {
    double baseline = 0, single = 0, distilled = 0, ensemble = 0;
  };
  std::vector<std::vector<Arms>> table(seeds.size(), std::vector<Arms>(budgets.size()));
  std::vector<std::vector<std::vector<double>>> member_tests(seeds.size(),
                                                             std::vector<std::vector<double>>(budgets.size()));

  for (std::size_t si = 0; si < seeds.size(); ++si) {
    const std::uint64_t s = seeds[si];
    const ReferentialWorld w = make_referential_world(c, s);
    const ArchitectureSpec arch = ArchitectureSpec::referential(w.game);
    for (std::size_t bi = 0; bi < budgets.size(); ++bi) {
      const IbrEnvironment env(w.game, w.data(budgets[bi]), w.training, seed_stream(s, stream::evaluation));
      Arms& a = table[si][bi];
      ScheduleSpec sup = base;
      sup.kind = ScheduleKind::supervised;
      a.baseline = run_s2p(init_agent_pair(arch, s), env, sup, RngStream(s)).test_acc;

      PopulationSpec spec;
      spec.seeds = population_seeds(s, size);
      spec.schedule = base;
      spec.threads = c.threads();
      const auto members = train_population(spec, arch, env);
      for (const auto& m : members) member_tests[si][bi].push_back(m.run.test_acc);
      a.single = mean_sd(member_tests[si][bi]).mean;
      const auto pairs = member_pairs(members);
      a.ensemble = ensemble_selection_accuracy(pairs, env.test_trials());
      RngStream rng = seed_stream(s, stream::distill).derive(budgets[bi]);
      const AgentPair student = distill_ibr(pairs, init_agent_pair(arch, s * 1000), env.data().pool, distill, rng, env.data().train);
      a.distilled = env.test_accuracy(student);
    }
  }

  {
    auto f = out.open("population_runs.csv");
    f << "seed,budget,baseline,single_mean,distilled,ensemble\n";
    for (std::size_t si = 0; si < seeds.size(); ++si)
      for (std::size_t bi = 0; bi < budgets.size(); ++bi) {
        const Arms& a = table[si][bi];
        f << seeds[si] << ',' << budgets[bi] << ',' << format_double(a.baseline) << ',' << format_double(a.single) << ','
          << format_double(a.distilled) << ',' << format_double(a.ensemble) << '\n';
      }
  }
  {
    auto f = out.open("members.csv");
    f << "seed,budget,member_seed,test_acc\n";
    for (std::size_t si = 0; si < seeds.size(); ++si)
      for (std::size_t bi = 0; bi < budgets.size(); ++bi) {
        const auto ids = population_seeds(seeds[si], size);
        for (std::size_t m = 0; m < ids.size(); ++m)
          f << seeds[si] << ',' << budgets[bi] << ',' << ids[m] << ',' << format_double(member_tests[si][bi][m]) << '\n';
      }
  }
  {
    auto f = out.open("summary.csv");
    f << "budget,arm,mean,sd\n";
    for (std::size_t bi = 0; bi < budgets.size(); ++bi) {
      const char* names[] = {"baseline", "single", "distilled", "ensemble"};
      for (int k = 0; k < 4; ++k) {
        std::vector<double> xs;
        for (std::size_t si = 0; si < seeds.size(); ++si) {
          const Arms& a = table[si][bi];
          xs.push_back(k == 0 ? a.baseline : k == 1 ? a.single : k == 2 ? a.distilled : a.ensemble);
        }
        const auto ms = mean_sd(xs);
        f << budgets[bi] << ',' << names[k] << ',' << format_double(ms.mean) << ',' << format_double(ms.sd) << '\n';
      }
    }
  }

  ExperimentResult result;
  const double majority = c.get_double("assert.majority");
  for (std::size_t bi = 0; bi < budgets.size(); ++bi) {
    std::vector<bool> order, ens_dist, dist_single, single_base;
    for (std::size_t si = 0; si < seeds.size(); ++si) {
      const Arms& a = table[si][bi];
      ens_dist.push_back(a.ensemble >= a.distilled);
      dist_single.push_back(a.distilled >= a.single);
      single_base.push_back(a.single >= a.baseline);
      order.push_back(a.ensemble >= a.distilled && a.distilled >= a.single && a.single >= a.baseline);
    }
    const std::string suffix = "_at_" + std::to_string(budgets[bi]);
    result.findings.push_back(majority_finding("ensemble_ge_distilled" + suffix, ens_dist, majority));
    result.findings.push_back(majority_finding("distilled_ge_single" + suffix, dist_single, majority));
    result.findings.push_back(majority_finding("single_ge_baseline" + suffix, single_base, majority));
    result.findings.push_back(majority_finding("full_ordering" + suffix, order, majority));
  }
  if (budgets.size() > 1) {
    std::vector<bool> grows;
    for (std::size_t si = 0; si < seeds.size(); ++si) {
      const auto lo = std::min_element(budgets.begin(), budgets.end()) - budgets.begin();
      const auto hi = std::max_element(budgets.begin(), budgets.end()) - budgets.begin();
      grows.push_back(table[si][static_cast<std::size_t>(hi)].distilled > table[si][static_cast<std::size_t>(lo)].distilled);
    }
    result.findings.push_back(majority_finding("distilled_improves_with_budget", grows, majority));
  }
  return result;
}

}  // namespace s2p::detail

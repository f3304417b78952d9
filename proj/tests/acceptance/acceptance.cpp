// Acceptance runner: one PASS/FAIL line per criterion. With no arguments every
// criterion runs; otherwise only the numbered ones given on the command line.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gradient_suite.hpp"
#include "s2p/experiments.hpp"
#include "s2p/ibr_game.hpp"
#include "s2p/language.hpp"
#include "s2p/or_game.hpp"
#include "s2p/schedule.hpp"

#ifndef S2P_ACCEPTANCE_CONFIGS
#define S2P_ACCEPTANCE_CONFIGS "configs/acceptance"
#endif
#ifndef S2P_ACCEPTANCE_OUT
#define S2P_ACCEPTANCE_OUT "acceptance_runs"
#endif

namespace fs = std::filesystem;
using namespace s2p;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* title;
  double time_limit_s;
  std::function<Outcome()> run;
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

ExperimentConfig load(const std::string& name) {
  return ExperimentConfig::load(std::string(S2P_ACCEPTANCE_CONFIGS) + "/" + name + ".cfg");
}

std::string out_dir(const std::string& name) {
  const fs::path p = fs::path(S2P_ACCEPTANCE_OUT) / name;
  fs::remove_all(p);
  return p.string();
}

const Finding* find(const ExperimentResult& r, const std::string& name) {
  for (const auto& f : r.findings)
    if (f.name == name) return &f;
  return nullptr;
}

std::string describe(const Finding* f, const std::string& name) {
  if (!f) return name + " missing";
  return name + " " + std::to_string(f->wins) + "/" + std::to_string(f->seeds);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// ---- criteria ----

Outcome optimal_seed() {
  const LanguageConfig lc{6, 10, 60};
  const Dataset seed = optimal_seed_construction(CompositionalLanguage::identity(lc));
  const LanguageCount count = consistent_language_count(seed, lc, 1000);
  Outcome o;
  o.passed = seed.size() == 14 && count.count == 1 && !count.capped;
  o.detail = "samples=" + std::to_string(seed.size()) + " consistent_languages=" + std::to_string(count.count);
  return o;
}

Outcome gradients() {
  Outcome o;
  o.passed = true;
  int checked = 0;
  double worst_primitive = 0, worst_game = 0;
  for (const auto& c : testing::run_gradient_suite()) {
    ++checked;
    if (!c.passed()) {
      o.passed = false;
      o.detail += c.name + " failed (" + fmt("%.3g", c.worst_relative_error) + ") ";
    }
    double& w = c.tolerance < 5e-4 ? worst_primitive : worst_game;
    w = std::max(w, c.worst_relative_error);
  }
  o.detail += std::to_string(checked) + " cases, worst primitive " + fmt("%.2g", worst_primitive) + " (< 1e-4), worst loss " +
              fmt("%.2g", worst_game) + " (< 1e-3)";
  return o;
}

Outcome chance() {
  const ExperimentConfig c = load("chance");
  const OrGameConfig g = c.object_game();
  RngStream rng(11);
  const CompositionalLanguage lang = make_target_language(g.language(), rng);
  std::vector<ObjectObservation> objects;
  for (int i = 0; i < 4000; ++i) objects.push_back(random_object(g.language(), rng));
  const AgentPair or_pair = init_agent_pair(ArchitectureSpec::object_reconstruction(g), 1);
  const double or_acc = evaluate_accuracy(or_pair.listener, g, lang, objects).per_property;

  const IbrConfig ig = c.referential_game();
  RngStream wrng(12);
  const auto items = synth_world(ig, c.world(), 2000, wrng);
  const AgentPair ibr_pair = init_agent_pair(ArchitectureSpec::referential(ig), 1);
  RngStream trng(13);
  const double ibr_acc = evaluate_selection_accuracy(ibr_pair.listener, ig, items, items, 4000, trng);
  Outcome o;
  o.passed = std::abs(or_acc - 0.1) <= 0.03 && std::abs(ibr_acc - 0.1) <= 0.03 && g.types == 10 && ig.distractors == 9;
  o.detail = "object listener " + fmt("%.4f", or_acc) + " over 4000 objects, referential listener " + fmt("%.4f", ibr_acc) +
             " over 4000 trials (0.1 +- 0.03)";
  return o;
}

Outcome run_findings(const std::string& cfg, const std::vector<std::string>& names) {
  const ExperimentResult r = run_experiment(load(cfg), out_dir(cfg));
  Outcome o;
  o.passed = true;
  for (const auto& n : names) {
    const Finding* f = find(r, n);
    o.passed = o.passed && f && f->passed;
    o.detail += describe(f, n) + "; ";
  }
  return o;
}

Outcome schedule_degeneracy() {
  const ExperimentConfig c = load("degeneracy");
  const OrGameConfig g = c.object_game();
  RngStream lrng(21), drng(22);
  const CompositionalLanguage lang = make_target_language(g.language(), lrng);
  const Dataset d = make_dataset(lang, sample_distinct_objects(g.language(), 120, drng), 0.1);
  const OrEnvironment env(g, lang, d, c.object_training(), RngStream(23));
  const ArchitectureSpec arch = ArchitectureSpec::object_reconstruction(g);

  ScheduleSpec base = c.schedule();
  auto run = [&](ScheduleKind k, bool select_best, double q, int l) {
    ScheduleSpec s = base;
    s.kind = k;
    s.q = q;
    s.l = l;
    RunOptions opt;
    opt.select_best = select_best;
    return run_s2p(init_agent_pair(arch, 5), env, s, RngStream(5), opt);
  };
  auto same_steps = [](const RunResult& a, const RunResult& b) {
    if (a.steps.size() != b.steps.size()) return false;
    for (std::size_t i = 0; i < a.steps.size(); ++i)
      if (a.steps[i].kind != b.steps[i].kind || a.steps[i].speaker_frozen != b.steps[i].speaker_frozen) return false;
    return true;
  };
  auto same_params = [](const RunResult& a, const RunResult& b) {
    return a.pair.speaker.same_values(b.pair.speaker) && a.pair.listener.same_values(b.pair.listener);
  };
  Outcome o;
  o.passed = true;
  for (bool select_best : {false, true}) {
    const RunResult sup = run(ScheduleKind::supervised, select_best, base.q, base.l);
    const RunResult rnd = run(ScheduleKind::rand, select_best, 1.0, base.l);
    const RunResult sch = run(ScheduleKind::sched, select_best, base.q, 0);
    const bool ok = sup.total_steps > 0 && same_steps(sup, rnd) && same_steps(sup, sch) && same_params(sup, rnd) &&
                    same_params(sup, sch);
    o.passed = o.passed && ok;
    o.detail += std::string(select_best ? "best-val" : "final") + " parameters: " + std::to_string(sup.total_steps) +
                " steps, " + (ok ? "identical" : "DIFFERENT") + "; ";
  }
  return o;
}

Outcome reproducibility() {
  Outcome o;
  o.passed = true;
  for (const auto& name : experiment_names()) {
    const std::string cfg = "repro_" + name;
    const std::string a = out_dir(cfg + "_first"), b = out_dir(cfg + "_rerun");
    const ExperimentResult first = run_experiment(load(cfg), a);
    const ExperimentResult second = rerun_from_manifest((fs::path(a) / "manifest.json").string(), b);
    std::vector<std::string> files = first.outputs;
    files.push_back("manifest.json");
    int differing = 0;
    for (const auto& f : files)
      if (!fs::exists(fs::path(b) / f) || slurp(fs::path(a) / f) != slurp(fs::path(b) / f)) ++differing;
    const bool ok = differing == 0 && first.outputs == second.outputs && !first.outputs.empty();
    o.passed = o.passed && ok;
    o.detail += name + " " + std::to_string(files.size()) + " files" + (ok ? "" : " (" + std::to_string(differing) + " differ)") + "; ";
  }
  return o;
}

Outcome freeze_contract() {
  const ExperimentConfig c = load("degeneracy");
  const OrGameConfig g = c.object_game();
  RngStream lrng(31), drng(32);
  const CompositionalLanguage lang = make_target_language(g.language(), lrng);
  const Dataset d = make_dataset(lang, sample_distinct_objects(g.language(), 120, drng), 0.1);
  const OrEnvironment env(g, lang, d, c.object_training(), RngStream(33));
  const AgentPair init = init_agent_pair(ArchitectureSpec::object_reconstruction(g), 9);

  ScheduleSpec s = c.schedule();
  s.kind = ScheduleKind::sched_frz;
  ParameterSet after_pretrain;
  bool have_snapshot = false;
  long main_steps = 0, changed = 0;
  RunOptions opt;
  opt.select_best = false;
  opt.after_step = [&](const UpdateStep& step, const AgentPair& pair) {
    if (step.phase == Phase::pretrain) {
      after_pretrain = pair.speaker;
      have_snapshot = true;
      return;
    }
    ++main_steps;
    if (!have_snapshot || !pair.speaker.same_values(after_pretrain)) ++changed;
  };
  const RunResult r = run_s2p(init, env, s, RngStream(9), opt);
  const bool trained = have_snapshot && !after_pretrain.same_values(init.speaker);
  const bool frozen_ok = trained && main_steps > 0 && changed == 0 && r.pair.speaker.same_values(after_pretrain);

  ScheduleSpec rf;
  rf.kind = ScheduleKind::sched_rand_frz;
  rf.r = 0.5;
  rf.pretrain_steps = 0;
  rf.max_steps = 1000000;
  ScheduleState st;
  RngStream srng(41);
  long steps = 0, frozen = 0;
  while (auto step = next_step(rf, st, srng)) {
    ++steps;
    frozen += step->speaker_frozen;
  }
  const double rate = static_cast<double>(frozen) / static_cast<double>(steps);
  Outcome o;
  o.passed = frozen_ok && steps >= 10000 && std::abs(rate - 0.5) <= 0.02;
  o.detail = "sched_frz: " + std::to_string(main_steps) + " post-pretraining steps, " + std::to_string(changed) +
             " changed the speaker" + (trained ? "" : " (pretraining did not train the speaker)") +
             "; sched_rand_frz: freeze rate " + fmt("%.4f", rate) + " over " + std::to_string(steps) + " steps";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {1, "hand-built seed: 14 samples, one consistent language", 10, optimal_seed},
      {2, "finite-difference gradient checks", 60, gradients},
      {3, "untrained listeners at chance", 60, chance},
      {4, "single-property case study", 300,
       [] { return run_findings("simple_game", {"sup2sp_consistent_injective", "sp2sup_inconsistent_or_not_injective"}); }},
      {5, "all samples in the seed need the fewest samples", 1800,
       [] { return run_findings("seed_sweep", {"all_in_seed_fewest_samples"}); }},
      {6, "distilled experts need more samples than populations", 3600,
       [] { return run_findings("perfect_emcomm", {"expert_arm_needs_more_samples"}); }},
      {7, "rand(q=1) and sched(l=0) equal supervised training", 60, schedule_degeneracy},
      {8, "zig-zag validation trajectory under sched", 1800, [] { return run_findings("schedules", {"sched_zigzag"}); }},
      {9, "ensemble >= distilled >= single >= supervised", 3600, [] {
         const ExperimentConfig c = load("population");
         const std::string budget = c.get("population.budgets");
         return run_findings("population", {"full_ordering_at_" + budget});
       }},
      {10, "rerun from manifest reproduces every output", 1800, reproducibility},
      {11, "speaker freezing contract", 300, freeze_contract},
  };

  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  bool all_passed = true;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.passed = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= c.time_limit_s;
    const bool passed = o.passed && in_time;
    all_passed = all_passed && passed;
    std::printf("AC%-2d %s  %s | %s| %.1f s (limit %.0f s)%s\n", c.id, passed ? "PASS" : "FAIL", c.title, o.detail.c_str(),
                secs, c.time_limit_s, in_time ? "" : " TOO SLOW");
    std::fflush(stdout);
  }
  return all_passed ? 0 : 1;
}

#include <vector>

#include "doctest.h"
#include "s2p/error.hpp"
#include "s2p/schedule.hpp"

using namespace s2p;

namespace {

std::vector<UpdateStep> drive(const ScheduleSpec& spec, long n, long converge_pretrain_at = -1,
                              std::uint64_t seed = 1) {
  ScheduleState st;
  RngStream rng(seed);
  std::vector<UpdateStep> out;
  while (static_cast<long>(out.size()) < n) {
    if (st.phase == Phase::pretrain && converge_pretrain_at >= 0 && st.phase_steps >= converge_pretrain_at)
      st.phase_converged = true;
    auto s = next_step(spec, st, rng);
    if (!s) break;
    out.push_back(*s);
  }
  return out;
}

// Fixed val trajectory; updates only count calls.
class ScriptedEnvironment : public Environment {
 public:
  explicit ScriptedEnvironment(std::vector<double> vals) : vals_(std::move(vals)) {}
  bool has_supervised_data() const override { return true; }
  double supervised_step(AgentPair&, RngStream&) const override { return 0.0; }
  double self_play_step(AgentPair&, RngStream&) const override { return 0.0; }
  double val_accuracy(const AgentPair&) const override {
    const double v = vals_[std::min(calls_, vals_.size() - 1)];
    ++calls_;
    return v;
  }
  double self_play_accuracy(const AgentPair&) const override { return 0.5; }
  double test_accuracy(const AgentPair&) const override { return 0.0; }

 private:
  std::vector<double> vals_;
  mutable std::size_t calls_ = 0;
};

AgentPair tiny_pair() {
  OrGameConfig cfg;
  cfg.properties = 2;
  cfg.types = 2;
  cfg.vocab = 4;
  cfg.message_length = 2;
  cfg.hidden = 3;
  return init_agent_pair(ArchitectureSpec::object_reconstruction(cfg), 1);
}

}  // namespace

TEST_CASE("schedule names parse and unknown names are config errors") {
  for (auto k : {ScheduleKind::sp2sup, ScheduleKind::sup2sp, ScheduleKind::rand, ScheduleKind::sched,
                 ScheduleKind::sched_frz, ScheduleKind::sched_rand_frz})
    CHECK(parse_schedule_kind(to_string(k)) == k);
  try {
    parse_schedule_kind("zigzag");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::config);
  }
}

TEST_CASE("schedule parameters are validated") {
  ScheduleSpec s;
  s.q = 1.5;
  CHECK_THROWS_AS(s.validate(), Error);
  s = {};
  s.l = 0;
  s.m = 0;
  CHECK_THROWS_AS(s.validate(), Error);
}

TEST_CASE("rand with q = 1 emits only supervised steps") {
  ScheduleSpec s;
  s.kind = ScheduleKind::rand;
  s.q = 1.0;
  for (const auto& st : drive(s, 500)) CHECK(st.kind == StepKind::sup);
}

TEST_CASE("rand with q = 0 and no pretraining emits only self-play steps") {
  ScheduleSpec s;
  s.kind = ScheduleKind::rand;
  s.q = 0.0;
  const auto steps = drive(s, 500);
  CHECK(steps.size() == 500);
  for (const auto& st : steps) CHECK(st.kind == StepKind::sp);
}

TEST_CASE("rand draws supervised steps at rate q") {
  ScheduleSpec s;
  s.kind = ScheduleKind::rand;
  const auto steps = drive(s, 20000);
  long sup = 0;
  for (const auto& st : steps) sup += st.kind == StepKind::sup;
  CHECK(static_cast<double>(sup) / 20000.0 == doctest::Approx(0.75).epsilon(0.02));
}

TEST_CASE("sched with l = 0 stops once pretraining converges") {
  ScheduleSpec s;
  s.kind = ScheduleKind::sched;
  s.l = 0;
  const auto steps = drive(s, 1000, 40);
  CHECK(steps.size() == 40);
  for (const auto& st : steps) CHECK(st.kind == StepKind::sup);
}

TEST_CASE("sched alternates l self-play and m supervised steps after pretraining") {
  ScheduleSpec s;
  s.kind = ScheduleKind::sched;
  s.l = 30;
  s.m = 1;
  const auto steps = drive(s, 5 + 31 * 3, 5);
  for (long i = 0; i < 5; ++i) CHECK(steps[i].phase == Phase::pretrain);
  for (long b = 0; b < 3; ++b) {
    for (long i = 0; i < 30; ++i) CHECK(steps[5 + b * 31 + i].kind == StepKind::sp);
    CHECK(steps[5 + b * 31 + 30].kind == StepKind::sup);
    CHECK(steps[5 + b * 31 + 29].closes_block);
    CHECK(steps[5 + b * 31 + 30].closes_block);
  }
}

TEST_CASE("sched_frz freezes every step after pretraining") {
  ScheduleSpec s;
  s.kind = ScheduleKind::sched_frz;
  const auto steps = drive(s, 2000, 100);
  for (const auto& st : steps) CHECK(st.speaker_frozen == (st.phase == Phase::main));
}

TEST_CASE("sched_rand_frz draws one freeze flag per block at rate r") {
  ScheduleSpec s;
  s.kind = ScheduleKind::sched_rand_frz;
  s.pretrain_steps = 0;
  s.max_steps = 600000;
  const auto steps = drive(s, 600000);
  long frozen = 0;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    frozen += steps[i].speaker_frozen;
    if (i > 0 && !steps[i - 1].closes_block) CHECK(steps[i].speaker_frozen == steps[i - 1].speaker_frozen);
  }
  CHECK(static_cast<double>(frozen) / steps.size() == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("sp2sup and sup2sp switch phase on convergence") {
  ScheduleSpec s;
  s.kind = ScheduleKind::sup2sp;
  ScheduleState st;
  RngStream rng(1);
  for (int i = 0; i < 10; ++i) CHECK(next_step(s, st, rng)->kind == StepKind::sup);
  st.phase_converged = true;
  auto x = next_step(s, st, rng);
  CHECK(st.phase_changed);
  CHECK(x->kind == StepKind::sp);
  CHECK(phase_monitors_self_play(s, Phase::second));
  st.phase_converged = true;
  CHECK_FALSE(next_step(s, st, rng).has_value());
}

TEST_CASE("max_steps bounds every schedule") {
  ScheduleSpec s;
  s.kind = ScheduleKind::sched;
  s.max_steps = 77;
  CHECK(drive(s, 1000).size() == 77);
}

TEST_CASE("strictly improving sequence never converges") {
  ConvergenceTracker t;
  t.patience = 3;
  for (int i = 0; i < 50; ++i) CHECK_FALSE(check_convergence(t, i * 0.01));
}

TEST_CASE("constant sequence with patience 5 converges at the sixth evaluation") {
  ConvergenceTracker t;
  t.patience = 5;
  for (int i = 1; i <= 5; ++i) CHECK_FALSE(check_convergence(t, 0.3));
  CHECK(check_convergence(t, 0.3));
}

TEST_CASE("oscillation without net improvement converges after the patience window") {
  ConvergenceTracker t;
  t.patience = 4;
  t.min_delta = 0.01;
  CHECK_FALSE(check_convergence(t, 0.5));
  const double seq[] = {0.45, 0.505, 0.40, 0.509};
  for (int i = 0; i < 3; ++i) CHECK_FALSE(check_convergence(t, seq[i]));
  CHECK(check_convergence(t, seq[3]));
}

TEST_CASE("loss-like trackers improve downwards") {
  ConvergenceTracker t;
  t.patience = 1;
  t.higher_is_better = false;
  CHECK_FALSE(check_convergence(t, 1.0));
  CHECK_FALSE(check_convergence(t, 0.5));
  CHECK(check_convergence(t, 0.6));
}

TEST_CASE("run_s2p stops supervised training when val accuracy plateaus") {
  ScheduleSpec s;
  s.kind = ScheduleKind::supervised;
  s.convergence.patience = 2;
  s.convergence.eval_interval = 10;
  ScriptedEnvironment env({0.1, 0.2, 0.3, 0.3, 0.3, 0.3});
  const RunResult r = run_s2p(tiny_pair(), env, s, RngStream(1));
  CHECK(r.total_steps == 50);
  CHECK(r.best_val == doctest::Approx(0.3));
  CHECK(r.best_step == 30);
}

TEST_CASE("run_s2p rejects supervised steps without data") {
  class Empty : public ScriptedEnvironment {
   public:
    Empty() : ScriptedEnvironment({0.0}) {}
    bool has_supervised_data() const override { return false; }
  } env;
  ScheduleSpec s;
  s.kind = ScheduleKind::supervised;
  try {
    run_s2p(tiny_pair(), env, s, RngStream(1));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::contract);
  }
}

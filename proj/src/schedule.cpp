#include "s2p/schedule.hpp"

#include <limits>
#include <ostream>

#include "s2p/error.hpp"

namespace s2p {

ScheduleKind parse_schedule_kind(const std::string& name) {
  if (name == "supervised") return ScheduleKind::supervised;
  if (name == "selfplay" || name == "self_play") return ScheduleKind::self_play;
  if (name == "sp2sup") return ScheduleKind::sp2sup;
  if (name == "sup2sp") return ScheduleKind::sup2sp;
  if (name == "rand") return ScheduleKind::rand;
  if (name == "sched") return ScheduleKind::sched;
  if (name == "sched_frz") return ScheduleKind::sched_frz;
  if (name == "sched_rand_frz") return ScheduleKind::sched_rand_frz;
  throw Error(ErrorKind::config, "unknown schedule '" + name + "'");
}

const char* to_string(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::supervised: return "supervised";
    case ScheduleKind::self_play: return "selfplay";
    case ScheduleKind::sp2sup: return "sp2sup";
    case ScheduleKind::sup2sp: return "sup2sp";
    case ScheduleKind::rand: return "rand";
    case ScheduleKind::sched: return "sched";
    case ScheduleKind::sched_frz: return "sched_frz";
    case ScheduleKind::sched_rand_frz: return "sched_rand_frz";
  }
  return "?";
}

const char* to_string(StepKind kind) { return kind == StepKind::sup ? "SUP" : "SP"; }

const char* to_string(Phase phase) {
  switch (phase) {
    case Phase::pretrain: return "pretrain";
    case Phase::first: return "first";
    case Phase::second: return "second";
    case Phase::main: return "main";
  }
  return "?";
}

namespace {

bool is_sched_family(ScheduleKind k) {
  return k == ScheduleKind::sched || k == ScheduleKind::sched_frz || k == ScheduleKind::sched_rand_frz;
}

// Effective pretraining budget: 0 none, negative until convergence.
long pretrain_budget(const ScheduleSpec& spec) {
  if (spec.pretrain_steps) return *spec.pretrain_steps;
  return is_sched_family(spec.kind) ? -1 : 0;
}

bool main_has_self_play(const ScheduleSpec& spec) {
  if (is_sched_family(spec.kind)) return spec.l > 0;
  if (spec.kind == ScheduleKind::rand) return spec.q < 1.0;
  return spec.kind == ScheduleKind::self_play;
}

void enter(ScheduleState& st, Phase phase) {
  st.phase = phase;
  st.phase_steps = 0;
  st.phase_converged = false;
  st.phase_changed = true;
  st.block_remaining = 0;
}

}  // namespace

void ScheduleSpec::validate() const {
  if (q < 0 || q > 1) throw Error(ErrorKind::config, "q must lie in [0, 1]");
  if (r < 0 || r > 1) throw Error(ErrorKind::config, "r must lie in [0, 1]");
  if (l < 0 || m < 0) throw Error(ErrorKind::config, "block lengths must be non-negative");
  if (is_sched_family(kind) && l == 0 && m == 0)
    throw Error(ErrorKind::config, "scheduled updates need l + m > 0");
  if (convergence.patience < 1 || convergence.eval_interval < 1 || convergence.min_delta < 0)
    throw Error(ErrorKind::config, "invalid convergence criteria");
  if (max_steps < 1) throw Error(ErrorKind::config, "max_steps must be positive");
}

bool phase_monitors_self_play(const ScheduleSpec& spec, Phase phase) {
  switch (spec.kind) {
    case ScheduleKind::self_play: return true;
    case ScheduleKind::sp2sup: return phase == Phase::first;
    case ScheduleKind::sup2sp: return phase == Phase::second;
    // With q = 0 the main phase is pure self-play and stops like the self-play baseline.
    case ScheduleKind::rand: return phase == Phase::main && spec.q == 0.0;
    default: return false;
  }
}

std::optional<UpdateStep> next_step(const ScheduleSpec& spec, ScheduleState& st, RngStream& rng) {
  st.phase_changed = false;
  if (!st.started) {
    st.started = true;
    switch (spec.kind) {
      case ScheduleKind::sp2sup:
      case ScheduleKind::sup2sp: enter(st, Phase::first); break;
      case ScheduleKind::rand:
      case ScheduleKind::sched:
      case ScheduleKind::sched_frz:
      case ScheduleKind::sched_rand_frz:
        enter(st, pretrain_budget(spec) != 0 ? Phase::pretrain : Phase::main);
        break;
      default: enter(st, Phase::main);
    }
  }
  if (st.done) return std::nullopt;
  if (st.total_steps >= spec.max_steps) {
    st.done = true;
    return std::nullopt;
  }

  // Phase transitions.
  if (st.phase == Phase::pretrain) {
    const long budget = pretrain_budget(spec);
    const bool finished = budget < 0 ? st.phase_converged : st.phase_steps >= budget;
    if (finished) {
      // Without self-play the main phase would only continue pretraining.
      if (!main_has_self_play(spec)) {
        st.done = true;
        return std::nullopt;
      }
      enter(st, Phase::main);
    }
  } else if (st.phase_converged) {
    if (st.phase == Phase::first) {
      enter(st, Phase::second);
    } else {
      st.done = true;
      return std::nullopt;
    }
  }

  UpdateStep step;
  step.phase = st.phase;
  switch (st.phase) {
    case Phase::pretrain: step.kind = StepKind::sup; break;
    case Phase::first: step.kind = spec.kind == ScheduleKind::sp2sup ? StepKind::sp : StepKind::sup; break;
    case Phase::second: step.kind = spec.kind == ScheduleKind::sp2sup ? StepKind::sup : StepKind::sp; break;
    case Phase::main:
      if (spec.kind == ScheduleKind::supervised) {
        step.kind = StepKind::sup;
      } else if (spec.kind == ScheduleKind::self_play) {
        step.kind = StepKind::sp;
      } else if (spec.kind == ScheduleKind::rand) {
        step.kind = rng.bernoulli(spec.q) ? StepKind::sup : StepKind::sp;
      } else {
        if (st.block_remaining == 0) {
          bool sp;
          if (st.phase_steps == 0) sp = spec.l > 0;
          else sp = st.block_is_sp ? spec.m == 0 : spec.l > 0;
          st.block_is_sp = sp;
          st.block_remaining = sp ? spec.l : spec.m;
          if (spec.kind == ScheduleKind::sched_frz) st.block_frozen = true;
          else if (spec.kind == ScheduleKind::sched_rand_frz && !spec.freeze_per_step)
            st.block_frozen = rng.bernoulli(spec.r);
          else st.block_frozen = false;
        }
        step.kind = st.block_is_sp ? StepKind::sp : StepKind::sup;
        step.speaker_frozen = st.block_frozen;
        if (spec.kind == ScheduleKind::sched_rand_frz && spec.freeze_per_step)
          step.speaker_frozen = rng.bernoulli(spec.r);
        step.closes_block = --st.block_remaining == 0;
      }
      break;
  }
  ++st.phase_steps;
  ++st.total_steps;
  return step;
}

ConvergenceTracker ConvergenceTracker::from(const ConvergenceCriteria& c) {
  ConvergenceTracker t;
  t.patience = c.patience;
  t.min_delta = c.min_delta;
  return t;
}

void ConvergenceTracker::reset() {
  history.clear();
  best.reset();
  since_improvement = 0;
  converged = false;
}

bool check_convergence(ConvergenceTracker& t, double value) {
  t.history.push_back(value);
  const bool improved = !t.best || (t.higher_is_better ? value > *t.best + t.min_delta
                                                        : value < *t.best - t.min_delta);
  if (improved) {
    t.best = value;
    t.since_improvement = 0;
  } else {
    ++t.since_improvement;
  }
  t.converged = t.since_improvement >= t.patience;
  return t.converged;
}

RunResult run_s2p(AgentPair pair, const Environment& env, const ScheduleSpec& spec, const RngStream& rng,
                  const RunOptions& options) {
  spec.validate();
  RngStream schedule_rng = rng.derive(stream::schedule);
  RngStream sup_rng = rng.derive(stream::supervised);
  RngStream sp_rng = rng.derive(stream::self_play);

  RunResult result;
  ScheduleState st;
  ConvergenceTracker tracker = ConvergenceTracker::from(spec.convergence);
  std::optional<AgentPair> best;
  double best_val = -std::numeric_limits<double>::infinity();
  long best_step = 0;
  long last_eval_step = -1;
  double last_val = 0.0;

  auto consider = [&](double val, long step) {
    if (val > best_val) {
      best_val = val;
      best_step = step;
      if (options.select_best) best = pair;
    }
  };

  auto record_block = [&](const UpdateStep& s, long t) {
    BlockRecord b;
    b.step = t;
    b.kind = s.kind;
    b.frozen = s.speaker_frozen;
    b.phase = s.phase;
    if (last_eval_step != t) {
      last_val = env.val_accuracy(pair);
      last_eval_step = t;
      if (!result.log.empty() && result.log.back().step == t) result.log.back().val_acc = last_val;
      consider(last_val, t);
    }
    b.val_acc = last_val;
    b.self_play_acc = env.self_play_accuracy(pair);
    result.blocks.push_back(b);
  };

  while (auto step = next_step(spec, st, schedule_rng)) {
    if (st.phase_changed) {
      tracker.reset();
      // The last step of a finished phase also ends a block.
      if (options.record_blocks && !result.steps.empty() && !result.steps.back().closes_block)
        record_block(result.steps.back(), st.total_steps - 1);
    }
    if (step->kind == StepKind::sup && !env.has_supervised_data())
      throw Error(ErrorKind::contract, "supervised step requested without training data");
    if (pair.speaker_frozen != step->speaker_frozen) set_speaker_frozen(pair, step->speaker_frozen);

    MetricRow row;
    row.step = st.total_steps;
    row.kind = step->kind;
    row.frozen = step->speaker_frozen;
    if (step->kind == StepKind::sup) row.sup_loss = env.supervised_step(pair, sup_rng);
    else row.sp_loss = env.self_play_step(pair, sp_rng);
    result.steps.push_back(*step);
    if (options.after_step) options.after_step(*step, pair);

    const long t = st.total_steps;
    if (t % spec.convergence.eval_interval == 0) {
      last_val = env.val_accuracy(pair);
      last_eval_step = t;
      row.val_acc = last_val;
      consider(last_val, t);
      const double monitored =
          phase_monitors_self_play(spec, step->phase) ? env.self_play_accuracy(pair) : last_val;
      st.phase_converged = check_convergence(tracker, monitored);
      if (options.test_at_evaluations) row.test_acc = env.test_accuracy(pair);
    }
    result.log.push_back(row);
    if (options.record_blocks && step->closes_block) record_block(*step, t);
  }

  if (options.record_blocks && !result.steps.empty() && !result.steps.back().closes_block)
    record_block(result.steps.back(), st.total_steps);
  result.total_steps = st.total_steps;
  if (last_eval_step != st.total_steps) {
    last_val = env.val_accuracy(pair);
    consider(last_val, st.total_steps);
    if (!result.log.empty()) result.log.back().val_acc = last_val;
  }
  result.final_val = last_val;
  result.best_val = best_val;
  result.best_step = best_step;
  result.pair = (options.select_best && best) ? std::move(*best) : std::move(pair);
  result.test_acc = env.test_accuracy(result.pair);
  if (!result.log.empty()) result.log.back().test_acc = result.test_acc;
  return result;
}

namespace {

void write_opt(std::ostream& out, const std::optional<double>& v) {
  if (v) out << format_double(*v);
}

}  // namespace

void write_metric_csv(std::ostream& out, const std::vector<MetricRow>& log) {
  out << "step,kind,frozen,sup_loss,sp_loss,val_acc,test_acc\n";
  for (const auto& r : log) {
    out << r.step << ',' << to_string(r.kind) << ',' << (r.frozen ? 1 : 0) << ',';
    write_opt(out, r.sup_loss);
    out << ',';
    write_opt(out, r.sp_loss);
    out << ',';
    write_opt(out, r.val_acc);
    out << ',';
    write_opt(out, r.test_acc);
    out << '\n';
  }
}

void write_block_csv(std::ostream& out, const std::vector<BlockRecord>& blocks) {
  out << "step,phase,block_kind,frozen,val_acc,self_play_acc\n";
  for (const auto& b : blocks)
    out << b.step << ',' << to_string(b.phase) << ',' << to_string(b.kind) << ',' << (b.frozen ? 1 : 0) << ',' << format_double(b.val_acc)
        << ',' << format_double(b.self_play_acc) << '\n';
}

}  // namespace s2p

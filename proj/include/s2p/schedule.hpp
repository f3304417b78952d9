#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "s2p/agents.hpp"
#include "s2p/rng.hpp"

namespace s2p {

// supervised and self_play are the pure baselines; the other six combine both.
enum class ScheduleKind { supervised, self_play, sp2sup, sup2sp, rand, sched, sched_frz, sched_rand_frz };

ScheduleKind parse_schedule_kind(const std::string& name);
const char* to_string(ScheduleKind kind);

struct ConvergenceCriteria {
  int patience = 10;       // evaluations without improvement
  int eval_interval = 50;  // update steps between evaluations
  double min_delta = 1e-4;
};

struct ScheduleSpec {
  ScheduleKind kind = ScheduleKind::sched;
  double q = 0.75;  // rand: probability of a supervised step
  int l = 30;       // self-play block length
  int m = 30;       // supervised block length
  double r = 0.5;   // sched_rand_frz: probability a block runs with the speaker frozen
  bool freeze_per_step = false;  // sched_rand_frz draws per step instead of per block
  // Supervised pretraining before the main phase of rand and the sched family.
  // nullopt: kind default (rand: none, sched family: until convergence);
  // negative: until convergence; otherwise a fixed step count.
  std::optional<long> pretrain_steps;
  ConvergenceCriteria convergence;
  long max_steps = 20000;

  void validate() const;
};

enum class StepKind { sup, sp };
const char* to_string(StepKind kind);

enum class Phase { pretrain, first, second, main };
const char* to_string(Phase phase);

struct UpdateStep {
  StepKind kind = StepKind::sup;
  bool speaker_frozen = false;
  Phase phase = Phase::main;
  bool closes_block = false;  // last step of a self-play or supervised block
};

struct ScheduleState {
  bool started = false;
  bool done = false;
  Phase phase = Phase::main;
  bool phase_converged = false;  // set by the driver from its tracker
  bool phase_changed = false;    // set by next_step when a new phase begins
  long phase_steps = 0;
  long total_steps = 0;
  int block_remaining = 0;
  bool block_is_sp = false;
  bool block_frozen = false;
};

// Next step of the schedule, or nullopt once the schedule is finished.
// `rng` is the schedule's own stream (Bernoulli draws only).
std::optional<UpdateStep> next_step(const ScheduleSpec& spec, ScheduleState& state, RngStream& rng);

// Metric monitored during a phase: D_val accuracy or held-out self-play accuracy.
bool phase_monitors_self_play(const ScheduleSpec& spec, Phase phase);

struct ConvergenceTracker {
  int patience = 10;
  double min_delta = 1e-4;
  bool higher_is_better = true;
  std::vector<double> history;
  std::optional<double> best;
  int since_improvement = 0;
  bool converged = false;

  static ConvergenceTracker from(const ConvergenceCriteria& c);
  void reset();
};

bool check_convergence(ConvergenceTracker& tracker, double value);

// A game as seen by the schedule engine. Implementations hold immutable data
// only; every mutable quantity lives in the AgentPair or the passed rng.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual bool has_supervised_data() const = 0;
  // One supervised minibatch update; returns the mean loss.
  virtual double supervised_step(AgentPair& pair, RngStream& rng) const = 0;
  // One self-play minibatch update; returns the mean loss.
  virtual double self_play_step(AgentPair& pair, RngStream& rng) const = 0;
  // Listener accuracy on D_val hearing expert messages.
  virtual double val_accuracy(const AgentPair& pair) const = 0;
  // Task accuracy of the pair playing together on held-out inputs.
  virtual double self_play_accuracy(const AgentPair& pair) const = 0;
  // Listener accuracy on held-out inputs hearing expert messages.
  virtual double test_accuracy(const AgentPair& pair) const = 0;
};

struct MetricRow {
  long step = 0;
  StepKind kind = StepKind::sup;
  bool frozen = false;
  std::optional<double> sup_loss;
  std::optional<double> sp_loss;
  std::optional<double> val_acc;
  std::optional<double> test_acc;
};

// Accuracies measured at block boundaries of interleaved schedules and at the
// end of every phase.
struct BlockRecord {
  long step = 0;        // step index of the block's last update
  StepKind kind = StepKind::sup;
  bool frozen = false;
  Phase phase = Phase::main;
  double val_acc = 0.0;
  double self_play_acc = 0.0;
};

struct RunOptions {
  bool select_best = true;        // return the best-D_val parameters instead of the final ones
  bool record_blocks = false;     // evaluate at every block boundary
  bool test_at_evaluations = false;
  std::function<void(const UpdateStep&, const AgentPair&)> after_step;  // observer
};

struct RunResult {
  AgentPair pair;  // selected parameters
  std::vector<MetricRow> log;
  std::vector<UpdateStep> steps;
  std::vector<BlockRecord> blocks;
  long total_steps = 0;
  double best_val = 0.0;
  long best_step = 0;
  double final_val = 0.0;
  double test_acc = 0.0;
};

// Runs the schedule to completion. rng is the run's root stream: schedule,
// supervised and self-play draws use separate derived streams.
RunResult run_s2p(AgentPair pair, const Environment& env, const ScheduleSpec& spec, const RngStream& rng,
                  const RunOptions& options = {});

void write_metric_csv(std::ostream& out, const std::vector<MetricRow>& log);
void write_block_csv(std::ostream& out, const std::vector<BlockRecord>& blocks);

}  // namespace s2p

#include "s2p/config.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "s2p/checkpoint.hpp"
#include "s2p/error.hpp"

namespace s2p {

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys{
      {"experiment", "", "experiment name (set by the CLI subcommand)"},
      {"seeds", "1,2,3,4,5", "experiment seeds"},
      {"threads", "1", "worker threads for independent runs"},
      {"threshold", "0.95", "test accuracy a sample budget must reach"},
      {"assert.majority", "0.8", "fraction of seeds an ordering must hold in"},
      {"save_checkpoints", "0", "write agent checkpoints next to the CSVs"},

      {"or.properties", "6", "object properties"},
      {"or.types", "10", "types per property"},
      {"or.vocab", "60", "vocabulary size"},
      {"or.hidden", "100", "hidden units of both agents"},
      {"or.architecture", "nonlinear", "nonlinear (tanh) or linear"},
      {"or.temperature", "1", "Gumbel-softmax temperature"},
      {"or.optimizer", "adam", "adam or sgd"},
      {"or.lr", "0.003", "learning rate"},
      {"or.sup_batch", "64", "supervised minibatch cap"},
      {"or.sp_batch", "32", "self-play minibatch"},
      {"or.test_objects", "5000", "held-out test objects"},
      {"or.sp_eval_objects", "500", "objects for self-play accuracy"},
      {"or.val_fraction", "0.1", "share of each dataset held out as D_val"},

      {"ibr.feature_dim", "32", "image feature dimension"},
      {"ibr.vocab", "40", "vocabulary size including pad and unk"},
      {"ibr.message_length", "4", "message length"},
      {"ibr.distractors", "9", "distractors per trial"},
      {"ibr.embedding", "16", "word embedding size"},
      {"ibr.hidden", "32", "recurrent state size"},
      {"ibr.temperature", "1", "Gumbel-softmax temperature"},
      {"ibr.dropout", "0", "dropout on embedding outputs"},
      {"ibr.optimizer", "adam", "adam or sgd"},
      {"ibr.lr", "0.001", "learning rate"},
      {"ibr.batch", "32", "minibatch for both update kinds"},
      {"ibr.val_trials", "400", "validation trials"},
      {"ibr.test_trials", "1000", "test trials"},
      {"ibr.sp_eval_trials", "400", "trials for self-play accuracy"},

      {"world.properties", "4", "latent attributes of synthetic images"},
      {"world.types", "8", "values per attribute"},
      {"world.noise", "0.1", "feature noise standard deviation"},
      {"world.size", "2000", "synthetic images in total"},
      {"world.test", "500", "held-out test images"},
      {"world.val", "100", "captioned validation images"},

      {"schedule.kind", "sched", "supervised, selfplay, sp2sup, sup2sp, rand, sched, sched_frz, sched_rand_frz"},
      {"schedule.q", "0.75", "rand: supervised step probability"},
      {"schedule.l", "30", "self-play block length"},
      {"schedule.m", "30", "supervised block length"},
      {"schedule.r", "0.5", "sched_rand_frz: freeze probability"},
      {"schedule.freeze_per_step", "0", "sched_rand_frz: draw per step instead of per block"},
      {"schedule.pretrain_steps", "default", "default, converge, or a step count"},
      {"schedule.patience", "10", "evaluations without improvement"},
      {"schedule.eval_interval", "50", "steps between evaluations"},
      {"schedule.min_delta", "0.0001", "minimum improvement"},
      {"schedule.max_steps", "20000", "hard step cap per run"},

      {"population.size", "10", "agents per population"},
      {"population.budgets", "100,1000", "captioned samples per population arm"},
      {"distill.steps", "2000", "distillation updates"},
      {"distill.batch", "32", "distillation minibatch"},
      {"distill.lr", "0.001", "distillation learning rate"},
      {"distill.speaker", "0", "also distill the speaker"},
      {"distill.caption_fraction", "0.5", "referential game: share of distillation examples heard as D captions"},

      {"sweep.budgets", "14,20,30,60,120,250,500,1000", "dataset sizes |D|"},
      {"sweep.splits", "0,0.25,0.5,0.75,1", "share of D placed in the seed"},
      {"sweep.endpoints", "1", "also run sp2sup and sup2sp"},
      {"sweep.baseline", "1", "also run the supervised baseline"},
      {"sweep.early_stop", "1", "skip larger budgets once an arm reaches the threshold"},

      {"simple.types", "10", "types (= words) of the one-property game"},
      {"simple.words", "4", "words covered by supervised data"},
      {"simple.control", "0", "also run with every word supervised"},

      {"emcomm.x_grid", "14,20,30,60,120,250,500,1000", "sample counts X"},
      {"emcomm.schedule", "sup2sp", "schedule of the population arm"},
      {"emcomm.early_stop", "1", "skip larger X once an arm reaches the threshold"},

      {"schedules.kinds", "supervised,sp2sup,sup2sp,rand,sched,sched_frz,sched_rand_frz", "schedules to compare"},
      {"schedules.budget", "1000", "captioned samples"},

      {"crossplay.game", "object", "object or referential"},
      {"crossplay.samples", "60", "dataset size per member"},
      {"crossplay.episodes", "500", "shared episodes per matrix cell"},
  };
  return keys;
}

ExperimentConfig::ExperimentConfig() {
  for (const auto& k : config_keys()) values_[k.key] = k.default_value;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* what) {
  throw Error(ErrorKind::config, key + ": '" + value + "' is not " + what);
}

long to_long(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long x = std::stol(v, &used);
    if (used == v.size()) return x;
  } catch (const std::exception&) {
  }
  bad_value(key, v, "an integer");
}

double to_double(const std::string& key, const std::string& v) {
  try {
    return parse_double(v);
  } catch (const std::exception&) {
    bad_value(key, v, "a number");
  }
}

}  // namespace

ExperimentConfig ExperimentConfig::parse(std::istream& in) {
  ExperimentConfig c;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::config, "line " + std::to_string(n) + ": expected key = value");
    c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::config, "cannot open config " + path);
  return parse(in);
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  if (!values_.count(key)) throw Error(ErrorKind::config, "unknown config key '" + key + "'");
  values_[key] = value;
  overridden_[key] = value;
}

bool ExperimentConfig::is_default(const std::string& key) const { return !overridden_.count(key); }

void ExperimentConfig::write(std::ostream& out) const {
  for (const auto& [k, v] : values_) out << k << " = " << v << '\n';
}

std::string ExperimentConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw Error(ErrorKind::config, "unknown config key '" + key + "'");
  return it->second;
}

long ExperimentConfig::get_int(const std::string& key) const { return to_long(key, get(key)); }
double ExperimentConfig::get_double(const std::string& key) const { return to_double(key, get(key)); }

bool ExperimentConfig::get_bool(const std::string& key) const {
  const std::string v = get(key);
  if (v == "1" || v == "true" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "no") return false;
  bad_value(key, v, "a boolean");
}

std::vector<double> ExperimentConfig::get_doubles(const std::string& key) const {
  std::vector<double> out;
  for (const auto& s : split_list(get(key))) out.push_back(to_double(key, s));
  return out;
}

std::vector<long> ExperimentConfig::get_ints(const std::string& key) const {
  std::vector<long> out;
  for (const auto& s : split_list(get(key))) out.push_back(to_long(key, s));
  return out;
}

std::vector<std::uint64_t> ExperimentConfig::get_seeds(const std::string& key) const {
  std::vector<std::uint64_t> out;
  for (long v : get_ints(key)) {
    if (v < 0) bad_value(key, std::to_string(v), "a non-negative seed");
    if (std::find(out.begin(), out.end(), static_cast<std::uint64_t>(v)) != out.end())
      throw Error(ErrorKind::config, key + ": duplicate seed " + std::to_string(v));
    out.push_back(static_cast<std::uint64_t>(v));
  }
  if (out.empty()) throw Error(ErrorKind::config, key + ": no seeds");
  return out;
}

std::vector<std::string> ExperimentConfig::get_strings(const std::string& key) const { return split_list(get(key)); }

namespace {

int positive(const ExperimentConfig& c, const std::string& key) {
  const long v = c.get_int(key);
  if (v < 1) throw Error(ErrorKind::config, key + " must be positive");
  return static_cast<int>(v);
}

OptimizerConfig optimizer(const ExperimentConfig& c, const std::string& rule, const std::string& lr) {
  OptimizerConfig o;
  o.rule = parse_update_rule(c.get(rule));
  o.learning_rate = c.get_double(lr);
  if (!(o.learning_rate > 0)) throw Error(ErrorKind::config, lr + " must be positive");
  return o;
}

}  // namespace

OrGameConfig ExperimentConfig::object_game() const {
  OrGameConfig g;
  g.properties = positive(*this, "or.properties");
  g.types = positive(*this, "or.types");
  g.vocab = positive(*this, "or.vocab");
  g.message_length = g.properties;
  g.hidden = positive(*this, "or.hidden");
  g.nonlinearity = parse_architecture(get("or.architecture"));
  g.temperature = get_double("or.temperature");
  g.validate();
  return g;
}

OrTrainingConfig ExperimentConfig::object_training() const {
  OrTrainingConfig t;
  t.optimizer = optimizer(*this, "or.optimizer", "or.lr");
  t.sup_batch = positive(*this, "or.sup_batch");
  t.sp_batch = positive(*this, "or.sp_batch");
  t.test_objects = positive(*this, "or.test_objects");
  t.self_play_eval_objects = positive(*this, "or.sp_eval_objects");
  return t;
}

IbrConfig ExperimentConfig::referential_game() const {
  IbrConfig g;
  g.feature_dim = positive(*this, "ibr.feature_dim");
  g.vocab = positive(*this, "ibr.vocab");
  g.message_length = positive(*this, "ibr.message_length");
  g.distractors = positive(*this, "ibr.distractors");
  g.embedding = positive(*this, "ibr.embedding");
  g.hidden = positive(*this, "ibr.hidden");
  g.temperature = get_double("ibr.temperature");
  g.dropout = get_double("ibr.dropout");
  g.validate();
  return g;
}

IbrTrainingConfig ExperimentConfig::referential_training() const {
  IbrTrainingConfig t;
  t.optimizer = optimizer(*this, "ibr.optimizer", "ibr.lr");
  t.batch = positive(*this, "ibr.batch");
  t.val_trials = positive(*this, "ibr.val_trials");
  t.test_trials = positive(*this, "ibr.test_trials");
  t.self_play_eval_trials = positive(*this, "ibr.sp_eval_trials");
  return t;
}

SyntheticWorldConfig ExperimentConfig::world() const {
  SyntheticWorldConfig w;
  w.properties = positive(*this, "world.properties");
  w.types = positive(*this, "world.types");
  w.noise = get_double("world.noise");
  return w;
}

ScheduleSpec ExperimentConfig::schedule() const {
  ScheduleSpec s;
  s.kind = parse_schedule_kind(get("schedule.kind"));
  s.q = get_double("schedule.q");
  s.l = static_cast<int>(get_int("schedule.l"));
  s.m = static_cast<int>(get_int("schedule.m"));
  s.r = get_double("schedule.r");
  s.freeze_per_step = get_bool("schedule.freeze_per_step");
  const std::string pre = get("schedule.pretrain_steps");
  if (pre == "converge") s.pretrain_steps = -1;
  else if (pre != "default") s.pretrain_steps = to_long("schedule.pretrain_steps", pre);
  s.convergence.patience = static_cast<int>(get_int("schedule.patience"));
  s.convergence.eval_interval = static_cast<int>(get_int("schedule.eval_interval"));
  s.convergence.min_delta = get_double("schedule.min_delta");
  s.max_steps = get_int("schedule.max_steps");
  s.validate();
  return s;
}

DistillConfig ExperimentConfig::distillation() const {
  DistillConfig d;
  d.steps = static_cast<int>(get_int("distill.steps"));
  if (d.steps < 0) throw Error(ErrorKind::config, "distill.steps must be non-negative");
  d.batch = positive(*this, "distill.batch");
  d.optimizer.learning_rate = get_double("distill.lr");
  d.distill_speaker = get_bool("distill.speaker");
  d.caption_fraction = get_double("distill.caption_fraction");
  if (!(d.caption_fraction >= 0.0 && d.caption_fraction <= 1.0))
    throw Error(ErrorKind::config, "distill.caption_fraction must lie in [0, 1]");
  return d;
}

int ExperimentConfig::threads() const { return positive(*this, "threads"); }

}  // namespace s2p

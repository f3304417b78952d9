#include "s2p/experiments.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "experiment_support.hpp"
#include "json.hpp"
#include "s2p/error.hpp"

#ifndef S2P_VERSION
#define S2P_VERSION "unversioned"
#endif

namespace s2p {

namespace fs = std::filesystem;

const char* code_version() { return S2P_VERSION; }

bool majority_holds(int wins, int seeds, double fraction) {
  if (seeds <= 0) return false;
  return wins >= static_cast<int>(std::ceil(fraction * seeds - 1e-9));
}

namespace detail {

OutputDir::OutputDir(std::string root) : root_(std::move(root)) { fs::create_directories(root_); }

std::string OutputDir::path(const std::string& relative) const { return (fs::path(root_) / relative).string(); }

std::ofstream OutputDir::open(const std::string& relative) {
  const fs::path p = fs::path(root_) / relative;
  fs::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw Error(ErrorKind::io, "cannot write " + p.string());
  if (std::find(files_.begin(), files_.end(), relative) == files_.end()) files_.push_back(relative);
  return out;
}

MeanSd mean_sd(const std::vector<double>& xs) {
  MeanSd r;
  if (xs.empty()) return r;
  for (double x : xs) r.mean += x;
  r.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0;
    for (double x : xs) ss += (x - r.mean) * (x - r.mean);
    r.sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return r;
}

std::string budget_text(long b) { return b == kNotReached ? "none" : std::to_string(b); }

Finding majority_finding(const std::string& name, const std::vector<bool>& per_seed, double fraction,
                         const std::string& detail) {
  Finding f;
  f.name = name;
  f.seeds = static_cast<int>(per_seed.size());
  f.wins = static_cast<int>(std::count(per_seed.begin(), per_seed.end(), true));
  f.passed = majority_holds(f.wins, f.seeds, fraction);
  f.detail = detail;
  return f;
}

std::vector<std::uint64_t> population_seeds(std::uint64_t s, int size) {
  std::vector<std::uint64_t> out;
  for (int i = 0; i < size; ++i) out.push_back(s * 1000 + static_cast<std::uint64_t>(i) + 1);
  return out;
}

Dataset ObjectWorld::dataset(std::size_t n) const {
  if (n > objects.size()) throw Error(ErrorKind::invalid_input, "dataset larger than the sampled objects");
  return make_dataset(language, std::vector<ObjectObservation>(objects.begin(), objects.begin() + static_cast<long>(n)),
                      val_fraction);
}

OrEnvironment ObjectWorld::environment(const Dataset& d) const {
  return OrEnvironment(game, language, d, training, seed_stream(seed, stream::evaluation));
}

ObjectWorld make_object_world(const ExperimentConfig& c, std::uint64_t seed, std::size_t max_objects) {
  ObjectWorld w{c.object_game(), c.object_training(), CompositionalLanguage::identity(c.object_game().language()),
                {}, c.get_double("or.val_fraction"), seed};
  RngStream lang_rng = seed_stream(seed, stream::language);
  w.language = make_target_language(w.game.language(), lang_rng);
  RngStream data_rng = seed_stream(seed, stream::dataset);
  w.objects = sample_distinct_objects(w.game.language(), max_objects, data_rng);
  return w;
}

IbrData ReferentialWorld::data(std::size_t budget) const {
  if (budget + val_size > pool.size()) throw Error(ErrorKind::config, "caption budget exceeds the image pool");
  IbrData d;
  d.train.assign(pool.begin(), pool.begin() + static_cast<long>(budget));
  d.val.assign(pool.begin() + static_cast<long>(budget), pool.begin() + static_cast<long>(budget + val_size));
  d.pool.assign(pool.begin(), pool.begin() + static_cast<long>(budget));
  d.pool.insert(d.pool.end(), pool.begin() + static_cast<long>(budget + val_size), pool.end());
  d.test = test;
  return d;
}

ReferentialWorld make_referential_world(const ExperimentConfig& c, std::uint64_t seed) {
  ReferentialWorld w;
  w.game = c.referential_game();
  w.training = c.referential_training();
  w.seed = seed;
  const long size = c.get_int("world.size"), n_test = c.get_int("world.test"), n_val = c.get_int("world.val");
  if (n_test < 1 || n_val < 0 || size <= n_test + n_val)
    throw Error(ErrorKind::config, "world.size must exceed world.test + world.val");
  RngStream rng = seed_stream(seed, stream::world);
  auto items = synth_world(w.game, c.world(), static_cast<std::size_t>(size), rng);
  w.test.assign(items.end() - n_test, items.end());
  items.resize(static_cast<std::size_t>(size - n_test));
  w.pool = std::move(items);
  w.val_size = static_cast<std::size_t>(n_val);
  return w;
}

void write_finding_csv(OutputDir& out, const std::vector<Finding>& findings) {
  auto f = out.open("findings.csv");
  f << "finding,passed,wins,seeds,detail\n";
  for (const auto& x : findings)
    f << x.name << ',' << (x.passed ? 1 : 0) << ',' << x.wins << ',' << x.seeds << ",\"" << x.detail << "\"\n";
}

// ---- crossplay ----

ExperimentResult exp_crossplay(const ExperimentConfig& c, OutputDir& out) {
  ExperimentResult result;
  const auto seeds = c.get_seeds();
  const std::string game = c.get("crossplay.game");
  if (game != "object" && game != "referential") throw Error(ErrorKind::config, "crossplay.game must be object or referential");
  const long samples = c.get_int("crossplay.samples");
  const int episodes = static_cast<int>(c.get_int("crossplay.episodes"));
  const int size = static_cast<int>(c.get_int("population.size"));
  if (samples < 1 || episodes < 1) throw Error(ErrorKind::config, "crossplay.samples and crossplay.episodes must be positive");
  auto summary = out.open("crossplay_summary.csv");
  summary << "seed,diagonal_mean,off_diagonal_mean,disagreement_fraction\n";
  std::vector<bool> own_partner;
  for (std::uint64_t s : seeds) {
    PopulationSpec spec;
    spec.seeds = population_seeds(s, size);
    spec.schedule = c.schedule();
    spec.threads = c.threads();
    Array matrix;
    std::vector<PredictionHistogram> hist;
    RngStream rng = seed_stream(s, stream::evaluation).derive(7);
    if (game == "object") {
      const ObjectWorld w = make_object_world(c, s, static_cast<std::size_t>(samples));
      const OrEnvironment env = w.environment(w.dataset(static_cast<std::size_t>(samples)));
      const auto pairs = member_pairs(train_population(spec, ArchitectureSpec::object_reconstruction(w.game), env));
      matrix = or_crossplay_matrix(pairs, episodes, rng, spec.threads);
      const auto& test = env.test_set();
      const std::vector<ObjectObservation> inputs(test.begin(), test.begin() + std::min<long>(static_cast<long>(test.size()), episodes));
      hist = or_prediction_diversity(pairs, w.language, inputs);
    } else {
      const ReferentialWorld w = make_referential_world(c, s);
      const IbrEnvironment env(w.game, w.data(static_cast<std::size_t>(samples)), w.training, seed_stream(s, stream::evaluation));
      const auto pairs = member_pairs(train_population(spec, ArchitectureSpec::referential(w.game), env));
      matrix = ibr_crossplay_matrix(pairs, env.data().pool, episodes, rng, spec.threads);
      hist = ibr_prediction_diversity(pairs, env.test_trials());
    }
    const auto cs = summarize_crossplay(matrix);
    const double dis = fraction_with_disagreement(hist);
    {
      auto f = out.open("crossplay_seed" + std::to_string(s) + ".csv");
      write_crossplay_csv(f, matrix, spec.seeds);
    }
    {
      auto f = out.open("diversity_seed" + std::to_string(s) + ".csv");
      write_diversity_csv(f, hist);
    }
    summary << s << ',' << format_double(cs.diagonal_mean) << ',' << format_double(cs.off_diagonal_mean) << ','
            << format_double(dis) << '\n';
    own_partner.push_back(cs.diagonal_mean >= cs.off_diagonal_mean);
  }
  result.findings.push_back(majority_finding("diagonal_ge_off_diagonal", own_partner, c.get_double("assert.majority")));
  return result;
}

}  // namespace detail

// ---- manifest ----

void write_manifest(const std::string& path, const RunManifest& m) {
  nlohmann::ordered_json j;
  j["experiment"] = m.experiment;
  j["version"] = m.version;
  j["seeds"] = m.seeds;
  nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
  for (const auto& [k, v] : m.config.values()) cfg[k] = v;
  j["config"] = cfg;
  j["outputs"] = m.outputs;
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io, "cannot write manifest " + path);
  out << j.dump(2) << '\n';
}

RunManifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open manifest " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::unparseable, std::string("manifest: ") + e.what());
  }
  RunManifest m;
  try {
    m.experiment = j.at("experiment").get<std::string>();
    m.version = j.at("version").get<std::string>();
    m.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    m.outputs = j.at("outputs").get<std::vector<std::string>>();
    for (const auto& [k, v] : j.at("config").items()) m.config.set(k, v.get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::unparseable, std::string("manifest: ") + e.what());
  }
  return m;
}

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"seed-sweep", "simple-game", "perfect-emcomm",
                                              "schedules",  "population",  "crossplay"};
  return names;
}

ExperimentResult run_experiment(const ExperimentConfig& config, const std::string& out_dir) {
  const std::string name = config.get("experiment");
  using Runner = ExperimentResult (*)(const ExperimentConfig&, detail::OutputDir&);
  Runner runner = nullptr;
  if (name == "seed-sweep") runner = detail::exp_seed_sweep;
  else if (name == "simple-game") runner = detail::exp_simple_game;
  else if (name == "perfect-emcomm") runner = detail::exp_perfect_emcomm;
  else if (name == "schedules") runner = detail::exp_schedules;
  else if (name == "population") runner = detail::exp_population;
  else if (name == "crossplay") runner = detail::exp_crossplay;
  else throw Error(ErrorKind::config, "unknown experiment '" + name + "'");

  // Resolve typed groups up front so bad values fail before any work.
  config.schedule();
  config.threads();
  RunManifest manifest{name, code_version(), config, config.get_seeds(), {}};
  detail::OutputDir out(out_dir);
  const std::string manifest_path = out.path("manifest.json");
  write_manifest(manifest_path, manifest);
  {
    auto f = out.open("config.txt");
    config.write(f);
  }
  ExperimentResult result = runner(config, out);
  result.experiment = name;
  detail::write_finding_csv(out, result.findings);
  result.outputs = out.files();
  manifest.outputs = result.outputs;
  write_manifest(manifest_path, manifest);
  return result;
}

ExperimentResult rerun_from_manifest(const std::string& manifest_path, const std::string& out_dir) {
  const RunManifest m = read_manifest(manifest_path);
  if (m.config.get("experiment") != m.experiment)
    throw Error(ErrorKind::config, "manifest experiment does not match its config");
  return run_experiment(m.config, out_dir);
}

}  // namespace s2p

#include <filesystem>
#include <functional>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "s2p/error.hpp"
#include "s2p/experiments.hpp"

using namespace s2p;
namespace fs = std::filesystem;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::contract;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("s2p_test_config_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("every key has a default and parses") {
  const ExperimentConfig c;
  for (const auto& k : config_keys()) CHECK(c.get(k.key) == k.default_value);
  CHECK(c.object_game().properties == 6);
  CHECK(c.schedule().kind == ScheduleKind::sched);
  CHECK(c.get_seeds() == std::vector<std::uint64_t>{1, 2, 3, 4, 5});
  CHECK(c.threads() == 1);
}

TEST_CASE("parse handles comments, whitespace and overrides") {
  std::istringstream in("# comment\n  or.types = 8  # trailing\n\nschedule.kind=sup2sp\n");
  const ExperimentConfig c = ExperimentConfig::parse(in);
  CHECK(c.get_int("or.types") == 8);
  CHECK(c.schedule().kind == ScheduleKind::sup2sp);
  CHECK_FALSE(c.is_default("or.types"));
  CHECK(c.is_default("or.vocab"));
}

TEST_CASE("bad configs are config errors") {
  auto parse = [](const std::string& text) {
    std::istringstream in(text);
    return ExperimentConfig::parse(in);
  };
  CHECK(kind_of([&] { parse("no.such.key = 1\n"); }) == ErrorKind::config);
  CHECK(kind_of([&] { parse("or.types 10\n"); }) == ErrorKind::config);
  CHECK(kind_of([&] { parse("or.types = ten\n").object_game(); }) == ErrorKind::config);
  CHECK(kind_of([&] { parse("schedule.kind = zigzag\n").schedule(); }) == ErrorKind::config);
  CHECK(kind_of([&] { parse("seeds = 1,2,1\n").get_seeds(); }) == ErrorKind::config);
  CHECK(kind_of([&] { parse("or.lr = -1\n").object_training(); }) == ErrorKind::config);
  CHECK(kind_of([&] { parse("threads = 0\n").threads(); }) == ErrorKind::config);
  CHECK(kind_of([&] { ExperimentConfig::load("/nonexistent/config.cfg"); }) == ErrorKind::config);
}

TEST_CASE("pretraining keyword") {
  ExperimentConfig c;
  CHECK_FALSE(c.schedule().pretrain_steps.has_value());
  c.set("schedule.pretrain_steps", "converge");
  CHECK(*c.schedule().pretrain_steps < 0);
  c.set("schedule.pretrain_steps", "250");
  CHECK(*c.schedule().pretrain_steps == 250);
}

TEST_CASE("written config parses back to the same values") {
  ExperimentConfig c;
  c.set("or.hidden", "64");
  c.set("seeds", "3,9");
  std::stringstream s;
  c.write(s);
  CHECK(ExperimentConfig::parse(s).values() == c.values());
}

TEST_CASE("manifest round trip") {
  const fs::path dir = scratch("manifest");
  fs::create_directories(dir);
  RunManifest m;
  m.experiment = "crossplay";
  m.version = code_version();
  m.config.set("experiment", "crossplay");
  m.config.set("or.hidden", "32");
  m.seeds = {4, 5};
  m.outputs = {"a.csv", "sub/b.csv"};
  const std::string path = (dir / "manifest.json").string();
  write_manifest(path, m);
  const RunManifest r = read_manifest(path);
  CHECK(r.experiment == m.experiment);
  CHECK(r.version == m.version);
  CHECK(r.config.values() == m.config.values());
  CHECK(r.seeds == m.seeds);
  CHECK(r.outputs == m.outputs);

  std::ofstream(dir / "broken.json") << "{\"experiment\": 3";
  CHECK(kind_of([&] { read_manifest((dir / "broken.json").string()); }) == ErrorKind::unparseable);
  CHECK(kind_of([&] { read_manifest((dir / "missing.json").string()); }) == ErrorKind::io);
}

TEST_CASE("majority rule") {
  CHECK(majority_holds(4, 5, 0.8));
  CHECK_FALSE(majority_holds(3, 5, 0.8));
  CHECK(majority_holds(7, 10, 0.7));
  CHECK_FALSE(majority_holds(6, 10, 0.7));
  CHECK_FALSE(majority_holds(0, 0, 0.5));
}

TEST_CASE("unknown experiment is a config error") {
  ExperimentConfig c;
  c.set("experiment", "nothing");
  CHECK(kind_of([&] { run_experiment(c, scratch("unknown").string()); }) == ErrorKind::config);
}

TEST_CASE("a tiny simple-game run writes its manifest and reruns identically") {
  ExperimentConfig c;
  c.set("experiment", "simple-game");
  c.set("seeds", "1,2");
  c.set("simple.types", "4");
  c.set("simple.words", "2");
  c.set("or.hidden", "16");
  c.set("schedule.patience", "2");
  c.set("schedule.eval_interval", "20");
  const fs::path a = scratch("run_a"), b = scratch("run_b");
  const ExperimentResult r = run_experiment(c, a.string());
  CHECK(r.experiment == "simple-game");
  CHECK(fs::exists(a / "manifest.json"));
  CHECK(fs::exists(a / "config.txt"));
  REQUIRE_FALSE(r.outputs.empty());
  CHECK(read_manifest((a / "manifest.json").string()).outputs == r.outputs);
  const ExperimentResult again = rerun_from_manifest((a / "manifest.json").string(), b.string());
  for (const auto& f : r.outputs) {
    std::ifstream x(a / f), y(b / f);
    std::stringstream sx, sy;
    sx << x.rdbuf();
    sy << y.rdbuf();
    CHECK_MESSAGE(sx.str() == sy.str(), f);
  }
  CHECK(again.findings.size() == r.findings.size());
}

// Command-line front end: one subcommand per experiment plus rerun and keys.
// Exit codes: 0 done, 1 runtime failure, 2 config error, 3 failed assertion.

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "s2p/error.hpp"
#include "s2p/experiments.hpp"

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;
constexpr int kExitAssert = 3;

struct Common {
  std::string config;
  std::string out = "out";
  std::string seeds;
  std::vector<std::string> overrides;
  int threads = 0;
  bool assert_findings = false;
};

void add_common(CLI::App* sub, Common& o) {
  sub->add_option("--config", o.config, "key = value config file");
  sub->add_option("--out", o.out, "output directory")->capture_default_str();
  sub->add_option("--seeds", o.seeds, "comma-separated seed list (overrides the config)");
  sub->add_option("--set", o.overrides, "extra key=value override, repeatable");
  sub->add_option("--threads", o.threads, "worker threads (overrides the config)");
  sub->add_flag("--assert", o.assert_findings, "exit with 3 when a finding fails");
}

s2p::ExperimentConfig resolve(const std::string& experiment, const Common& o) {
  s2p::ExperimentConfig c = o.config.empty() ? s2p::ExperimentConfig() : s2p::ExperimentConfig::load(o.config);
  if (!c.is_default("experiment") && c.get("experiment") != experiment)
    throw s2p::Error(s2p::ErrorKind::config,
                     "config names experiment '" + c.get("experiment") + "' but the command is " + experiment);
  c.set("experiment", experiment);
  for (const auto& kv : o.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw s2p::Error(s2p::ErrorKind::config, "--set expects key=value, got " + kv);
    c.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!o.seeds.empty()) c.set("seeds", o.seeds);
  if (o.threads > 0) c.set("threads", std::to_string(o.threads));
  return c;
}

int report(const s2p::ExperimentResult& r, const std::string& out, bool assert_findings) {
  bool all = true;
  std::cout << r.experiment << ": outputs in " << out << '\n';
  for (const auto& f : r.findings) {
    std::cout << (f.passed ? "  PASS " : "  FAIL ") << f.name << " (" << f.wins << '/' << f.seeds << ')';
    if (!f.detail.empty()) std::cout << "  " << f.detail;
    std::cout << '\n';
    all = all && f.passed;
  }
  return (assert_findings && !all) ? kExitAssert : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Supervised self-play experiments for emergent communication agents"};
  app.require_subcommand(1);

  Common common;
  std::vector<std::pair<std::string, CLI::App*>> experiments;
  for (const auto& name : s2p::experiment_names()) {
    CLI::App* sub = app.add_subcommand(name, "run the " + name + " experiment");
    add_common(sub, common);
    experiments.emplace_back(name, sub);
  }

  std::string manifest;
  std::string rerun_out = "rerun";
  CLI::App* rerun = app.add_subcommand("rerun-from-manifest", "rerun an experiment from its manifest.json");
  rerun->add_option("--manifest", manifest, "path to manifest.json")->required();
  rerun->add_option("--out", rerun_out, "output directory")->capture_default_str();
  bool rerun_assert = false;
  rerun->add_flag("--assert", rerun_assert, "exit with 3 when a finding fails");

  CLI::App* keys = app.add_subcommand("keys", "list every config key with its default");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (keys->parsed()) {
      for (const auto& k : s2p::config_keys()) std::cout << k.key << " = " << k.default_value << "    # " << k.help << '\n';
      return 0;
    }
    if (rerun->parsed()) return report(s2p::rerun_from_manifest(manifest, rerun_out), rerun_out, rerun_assert);
    for (const auto& [name, sub] : experiments)
      if (sub->parsed()) return report(s2p::run_experiment(resolve(name, common), common.out), common.out, common.assert_findings);
  } catch (const s2p::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.kind() == s2p::ErrorKind::config || e.kind() == s2p::ErrorKind::invalid_parameter ? kExitConfig
                                                                                               : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitRuntime;
}

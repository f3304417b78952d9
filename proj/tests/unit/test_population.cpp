#include <sstream>

#include "doctest.h"
#include "s2p/error.hpp"
#include "s2p/population.hpp"

using namespace s2p;

namespace {

OrGameConfig small_or() {
  OrGameConfig cfg;
  cfg.properties = 2;
  cfg.types = 4;
  cfg.vocab = 8;
  cfg.message_length = 2;
  cfg.hidden = 24;
  return cfg;
}

struct SmallOrWorld {
  OrGameConfig cfg = small_or();
  CompositionalLanguage lang;
  OrEnvironment env;

  SmallOrWorld()
      : lang([] {
          RngStream r(1);
          return make_target_language(small_or().language(), r);
        }()),
        env(cfg, lang,
            [&] {
              RngStream r(2);
              return build_dataset(lang, 8, r);
            }(),
            [] {
              OrTrainingConfig t;
              t.optimizer.learning_rate = 1e-2;
              return t;
            }(),
            RngStream(3)) {}
};

ScheduleSpec short_schedule() {
  ScheduleSpec s;
  s.kind = ScheduleKind::sup2sp;
  s.convergence.eval_interval = 10;
  s.convergence.patience = 3;
  s.max_steps = 200;
  return s;
}

}  // namespace

TEST_CASE("duplicate seeds are a config error") {
  PopulationSpec spec;
  spec.seeds = {1, 2, 1};
  try {
    spec.member_seeds();
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::config);
  }
  spec.seeds.clear();
  spec.size = 3;
  spec.base_seed = 10;
  CHECK(spec.member_seeds() == std::vector<std::uint64_t>{10, 11, 12});
}

TEST_CASE("a population of one reproduces a single run") {
  SmallOrWorld w;
  PopulationSpec spec;
  spec.seeds = {42};
  spec.schedule = short_schedule();
  const auto arch = ArchitectureSpec::object_reconstruction(w.cfg);
  const auto members = train_population(spec, arch, w.env);
  const RunResult single = run_s2p(init_agent_pair(arch, 42), w.env, spec.schedule, RngStream(42));
  REQUIRE(members.size() == 1);
  CHECK(members[0].run.pair.listener == single.pair.listener);
  CHECK(members[0].run.pair.speaker == single.pair.speaker);
  std::ostringstream a, b;
  write_metric_csv(a, members[0].run.log);
  write_metric_csv(b, single.log);
  CHECK(a.str() == b.str());
}

TEST_CASE("population training is order-independent and thread-count independent") {
  SmallOrWorld w;
  const auto arch = ArchitectureSpec::object_reconstruction(w.cfg);
  PopulationSpec a;
  a.seeds = {5, 6, 7};
  a.schedule = short_schedule();
  PopulationSpec b = a;
  b.seeds = {7, 5, 6};
  b.threads = 3;
  const auto ma = train_population(a, arch, w.env);
  const auto mb = train_population(b, arch, w.env);
  CHECK(ma[0].run.pair.listener == mb[1].run.pair.listener);
  CHECK(ma[1].run.pair.listener == mb[2].run.pair.listener);
  CHECK(ma[2].run.pair.speaker == mb[0].run.pair.speaker);
}

TEST_CASE("identical agents give a constant cross-play matrix and single-bin histograms") {
  const OrGameConfig cfg = small_or();
  const AgentPair p = init_agent_pair(ArchitectureSpec::object_reconstruction(cfg), 3);
  const std::vector<AgentPair> agents(4, p);
  RngStream rng(1);
  const Array m = or_crossplay_matrix(agents, 50, rng);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) CHECK(m(i, j) == m(0, 0));
  const auto lang = CompositionalLanguage::identity(cfg.language());
  std::vector<ObjectObservation> inputs;
  for (int i = 0; i < 16; ++i) inputs.push_back(object_from_index(static_cast<std::uint64_t>(i), cfg.language()));
  for (const auto& h : or_prediction_diversity(agents, lang, inputs)) CHECK(h.size() == 1);
}

TEST_CASE("cross-play entries pair speaker i with listener j") {
  std::vector<AgentPair> agents(3, init_agent_pair(ArchitectureSpec::object_reconstruction(small_or()), 1));
  for (std::size_t i = 0; i < 3; ++i) {
    agents[i].speaker.mutable_value("b1")[0] = static_cast<double>(i);
    agents[i].listener.mutable_value("b1")[0] = 10.0 * static_cast<double>(i);
  }
  const Array m = crossplay_matrix(agents, [](const AgentPair& p) {
    return p.speaker.value("b1")[0] + p.listener.value("b1")[0];
  });
  CHECK(m(2, 1) == 12.0);
  CHECK(m(0, 2) == 20.0);
  const auto s = summarize_crossplay(m);
  CHECK(s.diagonal_mean == doctest::Approx(11.0));
  std::ostringstream out;
  write_crossplay_csv(out, m, {7, 8, 9});
  CHECK(out.str().substr(0, 14) == "speaker,7,8,9\n");
}

TEST_CASE("a disagreeing pair produces a two-bin histogram") {
  const auto h = prediction_histograms({{1, 4, 2}, {1, 3, 2}});
  CHECK(h[0].size() == 1);
  CHECK(h[1].size() == 2);
  CHECK(fraction_with_disagreement(h) == doctest::Approx(1.0 / 3.0));
  std::ostringstream out;
  write_diversity_csv(out, h);
  CHECK(out.str() == "input,label,count\n0,1,2\n1,3,1\n1,4,1\n2,2,2\n");
}

TEST_CASE("majority vote") {
  CHECK(majority_vote(std::vector<int>{0, 0, 1}) == 0);
  CHECK(majority_vote(std::vector<int>{2, 1, 2}) == 2);
  CHECK(majority_vote(std::vector<int>{3, 1, 1, 3}) == 1);
  CHECK(majority_vote(std::vector<int>{5}) == 5);
  CHECK_THROWS_AS(majority_vote(std::vector<int>{}), Error);
}

TEST_CASE("an ensemble of one equals that agent") {
  const OrGameConfig cfg = small_or();
  const AgentPair p = init_agent_pair(ArchitectureSpec::object_reconstruction(cfg), 9);
  const std::vector<AgentPair> one{p};
  for (int i = 0; i < 16; ++i) {
    const Message m{{i % 8, (i * 3) % 8}};
    CHECK(ensemble_reconstruct(one, m) == listener_reconstruct(p.listener, cfg, m));
  }
}

TEST_CASE("expert teacher targets are probability vectors") {
  const OrGameConfig cfg = small_or();
  RngStream rng(4);
  const std::vector<CompositionalLanguage> langs{make_target_language(cfg.language(), rng),
                                                 make_target_language(cfg.language(), rng)};
  const auto teachers = expert_teachers(langs);
  for (int k = 0; k < 20; ++k) {
    const ObjectObservation o = random_object(cfg.language(), rng);
    const Message m = teachers[0].utterance(cfg, o);
    for (const auto& t : teachers)
      for (const Vec& d : t.listen(cfg, m)) {
        double s = 0;
        for (double v : d) {
          CHECK(v >= 0.0);
          s += v;
        }
        CHECK(s == doctest::Approx(1.0));
      }
    const auto own = teachers[0].listen(cfg, m);
    for (int j = 0; j < cfg.properties; ++j) CHECK(own[static_cast<std::size_t>(j)][static_cast<std::size_t>(o.types[static_cast<std::size_t>(j)])] == 1.0);
  }
}

TEST_CASE("distilling from one teacher reproduces its predictions") {
  SmallOrWorld w;
  const auto arch = ArchitectureSpec::object_reconstruction(w.cfg);
  const RunResult teacher = run_s2p(init_agent_pair(arch, 1), w.env, short_schedule(), RngStream(1));
  const std::vector<AgentPair> pop{teacher.pair};
  DistillConfig dc;
  dc.steps = 2000;
  dc.optimizer.learning_rate = 1e-2;
  dc.distill_speaker = true;
  RngStream rng(5);
  const AgentPair student = distill_or(neural_teachers(pop), init_agent_pair(arch, 99), dc, rng);
  int agree = 0, total = 0;
  for (std::uint64_t i = 0; i < input_space_size(w.cfg.language()); ++i) {
    const ObjectObservation o = object_from_index(i, w.cfg.language());
    const Message m = speaker_greedy(teacher.pair.speaker, w.cfg, o);
    agree += listener_reconstruct(student.listener, w.cfg, m) == listener_reconstruct(teacher.pair.listener, w.cfg, m);
    agree += speaker_greedy(student.speaker, w.cfg, o) == m;
    total += 2;
  }
  CHECK(static_cast<double>(agree) / total >= 0.99);
}

TEST_CASE("distillation needs teachers") {
  const auto arch = ArchitectureSpec::object_reconstruction(small_or());
  RngStream rng(1);
  try {
    distill_or({}, init_agent_pair(arch, 1), {}, rng);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::contract);
  }
}

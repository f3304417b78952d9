#include <set>
#include <sstream>

#include "doctest.h"
#include "s2p/error.hpp"
#include "s2p/ibr_game.hpp"
#include "s2p/or_game.hpp"

using namespace s2p;

namespace {

OrGameConfig small_or() {
  OrGameConfig cfg;
  cfg.properties = 2;
  cfg.types = 4;
  cfg.vocab = 8;
  cfg.message_length = 2;
  cfg.hidden = 32;
  return cfg;
}

IbrConfig small_ibr() {
  IbrConfig cfg;
  cfg.feature_dim = 16;
  cfg.vocab = 20;
  cfg.message_length = 4;
  cfg.distractors = 4;
  cfg.embedding = 8;
  cfg.hidden = 12;
  return cfg;
}

}  // namespace

TEST_CASE("object encoding round trips") {
  const OrGameConfig cfg = small_or();
  const ObjectObservation o{{3, 1}};
  const Vec x = encode_object(o, cfg);
  CHECK(x.size() == 8);
  CHECK(decode_object(x, cfg) == o);
  CHECK(object_active_inputs(o, cfg) == std::vector<int>{3, 5});
}

TEST_CASE("expert episodes never produce speaker gradients") {
  const OrGameConfig cfg = small_or();
  const AgentPair pair = init_agent_pair(ArchitectureSpec::object_reconstruction(cfg), 1);
  const auto lang = CompositionalLanguage::identity(cfg.language());
  Gradients gs = Gradients::zeros_like(pair.speaker);
  Gradients gl = Gradients::zeros_like(pair.listener);
  RngStream rng(2);
  const auto r = play_episode(pair, ObjectObservation{{1, 2}}, EpisodeMode::expert_speaker, &lang, rng, {&gs, &gl});
  CHECK(r.message == speak(lang, ObjectObservation{{1, 2}}));
  CHECK(gs.squared_norm() == 0.0);
  CHECK(gl.squared_norm() > 0.0);
  CHECK_THROWS_AS(play_episode(pair, ObjectObservation{{1, 2}}, EpisodeMode::expert_speaker, nullptr, rng), Error);
}

TEST_CASE("unseen objects exclude the training objects") {
  const OrGameConfig cfg = small_or();
  RngStream rng(3);
  const std::vector<ObjectObservation> seen{{{0, 0}}, {{1, 1}}, {{2, 3}}};
  const auto all = unseen_objects(cfg, seen, 5000, rng);
  CHECK(all.size() == 13);
  for (const auto& o : all) CHECK(std::find(seen.begin(), seen.end(), o) == seen.end());
  CHECK(unseen_objects(cfg, seen, 5, rng).size() == 5);
}

TEST_CASE("minibatches use the whole set when it is small") {
  RngStream rng(1);
  CHECK(minibatch_indices(5, 64, rng) == std::vector<std::size_t>{0, 1, 2, 3, 4});
  const auto b = minibatch_indices(100, 10, rng);
  CHECK(std::set<std::size_t>(b.begin(), b.end()).size() == 10);
}

TEST_CASE("untrained object-game listener is near chance") {
  OrGameConfig cfg;  // 6 properties, 10 types
  const AgentPair pair = init_agent_pair(ArchitectureSpec::object_reconstruction(cfg), 11);
  RngStream rng(12);
  const auto lang = make_target_language(cfg.language(), rng);
  const auto objs = sample_distinct_objects(cfg.language(), 1000, rng);
  const OrAccuracy acc = evaluate_accuracy(pair.listener, cfg, lang, objs);
  CHECK(acc.per_property == doctest::Approx(0.1).epsilon(0.3));
}

TEST_CASE("supervised training on exhaustive data solves a small object game") {
  const OrGameConfig cfg = small_or();
  RngStream rng(5);
  const auto lang = make_target_language(cfg.language(), rng);
  const Dataset d = build_dataset(lang, 16, rng, 0.0);
  OrTrainingConfig training;
  training.optimizer.learning_rate = 1e-2;
  const OrEnvironment env(cfg, lang, d, training, RngStream(6));
  ScheduleSpec spec;
  spec.kind = ScheduleKind::supervised;
  spec.max_steps = 600;
  const RunResult r = run_s2p(init_agent_pair(ArchitectureSpec::object_reconstruction(cfg), 7), env, spec, RngStream(8));
  CHECK(env.val_accuracy(r.pair) >= 0.99);
  std::vector<ObjectObservation> objects;
  for (const auto& e : d.pairs) objects.push_back(e.object);
  CHECK(evaluate_accuracy(r.pair.listener, cfg, lang, objects).exact_match >= 0.99);
}

TEST_CASE("synthetic captions parse back to their attributes") {
  const IbrConfig cfg = small_ibr();
  RngStream rng(1);
  const SyntheticWorld world(cfg, SyntheticWorldConfig{3, 4, 0.1}, rng);
  for (int i = 0; i < 20; ++i) {
    const ObjectObservation a = random_object(world.language().config(), rng);
    const Message c = world.caption(a);
    CHECK(c.tokens.size() == 4);
    CHECK(c.tokens[3] == kPadToken);
    for (int k = 0; k < 3; ++k) CHECK(c.tokens[k] >= kCaptionWordOffset);
    CHECK(world.parse_caption(c) == a);
  }
}

TEST_CASE("trials draw distinct distractors and never the target") {
  const IbrConfig cfg = small_ibr();
  RngStream rng(2);
  const auto items = synth_world(cfg, SyntheticWorldConfig{3, 4, 0.1}, 30, rng);
  for (int i = 0; i < 50; ++i) {
    const ReferentialTrial t = make_trial(items[0], items, 4, rng);
    CHECK(t.candidates.size() == 5);
    CHECK(t.candidates[t.target] == &items[0]);
    std::set<const WorldItem*> distinct(t.candidates.begin(), t.candidates.end());
    CHECK(distinct.size() == 5);
  }
  const std::vector<WorldItem> tiny(items.begin(), items.begin() + 3);
  CHECK_THROWS_AS(make_trial(tiny[0], tiny, 4, rng), Error);
}

TEST_CASE("the target slot is uniform over candidates") {
  const IbrConfig cfg = small_ibr();
  RngStream rng(3);
  const auto items = synth_world(cfg, SyntheticWorldConfig{3, 4, 0.1}, 30, rng);
  std::vector<int> counts(5, 0);
  for (int i = 0; i < 5000; ++i) ++counts[make_trial(items[1], items, 4, rng).target];
  for (int c : counts) CHECK(c == doctest::Approx(1000).epsilon(0.1));
}

TEST_CASE("reciprocal distance ranks the closest candidate first") {
  const Vec m{1.0, 2.0};
  const std::vector<Vec> c{{0.0, 0.0}, {1.0, 2.1}, {5.0, 5.0}};
  const Vec l = reciprocal_mse_logits(m, c, 1e-6);
  CHECK(l[1] > l[0]);
  CHECK(l[0] > l[2]);
  CHECK(l[1] == doctest::Approx(1.0 / (0.01 / 2 + 1e-6)));
}

TEST_CASE("untrained referential listener is near chance") {
  IbrConfig cfg = small_ibr();
  cfg.distractors = 9;
  RngStream rng(4);
  const auto items = synth_world(cfg, SyntheticWorldConfig{3, 4, 0.1}, 300, rng);
  const AgentPair pair = init_agent_pair(ArchitectureSpec::referential(cfg), 5);
  const double acc = evaluate_selection_accuracy(pair.listener, cfg, items, items, 2000, rng);
  CHECK(acc == doctest::Approx(0.1).epsilon(0.3));
}

TEST_CASE("ingestion drops unknown-heavy captions and truncates long ones") {
  IbrConfig cfg = small_ibr();
  cfg.feature_dim = 2;
  std::istringstream in(
      "a\t0.5 1\t3 4 5\n"
      "b\t0 0\t1 1 4\n"
      "c\t1 2\t3 4 5 6 7 8\n"
      "d\t1 2\t3 99 5 6\n");
  IngestStats stats;
  const auto items = read_ingested_items(in, cfg, &stats);
  CHECK(stats.read == 4);
  CHECK(stats.dropped_unknown == 1);
  CHECK(stats.truncated == 1);
  REQUIRE(items.size() == 3);
  CHECK(items[0].caption.tokens == std::vector<int>{3, 4, 5, kPadToken});
  CHECK(items[1].caption.tokens == std::vector<int>{3, 4, 5, 6});
  CHECK(items[2].caption.tokens == std::vector<int>{3, kUnknownToken, 5, 6});
  std::istringstream bad("x\t1 2 3\t4\n");
  CHECK_THROWS_AS(read_ingested_items(bad, cfg), Error);
}

TEST_CASE("supervised training lifts referential accuracy above chance") {
  const IbrConfig cfg = small_ibr();
  RngStream rng(6);
  const auto world = synth_world(cfg, SyntheticWorldConfig{3, 4, 0.1}, 400, rng);
  IbrData data;
  data.train.assign(world.begin(), world.begin() + 200);
  data.val.assign(world.begin() + 200, world.begin() + 250);
  data.pool.assign(world.begin(), world.begin() + 250);
  data.test.assign(world.begin() + 250, world.end());
  IbrTrainingConfig training;
  training.optimizer.learning_rate = 3e-3;
  training.val_trials = 200;
  training.test_trials = 300;
  training.self_play_eval_trials = 100;
  const IbrEnvironment env(cfg, data, training, RngStream(7));
  ScheduleSpec spec;
  spec.kind = ScheduleKind::supervised;
  spec.max_steps = 400;
  const RunResult r = run_s2p(init_agent_pair(ArchitectureSpec::referential(cfg), 8), env, spec, RngStream(9));
  CHECK(r.test_acc > 0.5);
}

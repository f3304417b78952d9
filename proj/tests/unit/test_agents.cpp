#include <filesystem>

#include "doctest.h"
#include "s2p/agents.hpp"
#include "s2p/error.hpp"

using namespace s2p;

TEST_CASE("default object-game agents have the documented parameter counts") {
  const AgentPair pair = init_agent_pair(ArchitectureSpec::object_reconstruction(OrGameConfig{}), 1);
  CHECK(pair.listener.scalar_count() == 84260);
  CHECK(pair.speaker.scalar_count() == 84560);
  CHECK(pair.listener.value("w1").rows() == 200);
  CHECK(pair.listener.value("w1").cols() == 360);
  CHECK(pair.speaker.value("w2").rows() == 360);
}

TEST_CASE("referential agents have embedding, recurrent and output arrays") {
  IbrConfig cfg;
  cfg.feature_dim = 8;
  cfg.vocab = 12;
  cfg.embedding = 5;
  cfg.hidden = 6;
  const AgentPair pair = init_agent_pair(ArchitectureSpec::referential(cfg), 2);
  CHECK(pair.speaker.value("emb").rows() == 12);
  CHECK(pair.speaker.value("out_w").rows() == 12);
  CHECK(pair.listener.value("img_w").rows() == 6);
  CHECK(pair.listener.value("img_w").cols() == 8);
}

TEST_CASE("initialization is a pure function of the seed") {
  const auto spec = ArchitectureSpec::object_reconstruction(OrGameConfig{});
  CHECK(init_agent_pair(spec, 5).listener == init_agent_pair(spec, 5).listener);
  CHECK_FALSE(init_agent_pair(spec, 5).speaker.same_values(init_agent_pair(spec, 6).speaker));
}

TEST_CASE("architecture names") {
  CHECK(parse_architecture("nonlinear") == Nonlinearity::tanh);
  CHECK(parse_architecture("linear") == Nonlinearity::linear);
  try {
    parse_architecture("bilinear");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::config);
  }
}

TEST_CASE("object game config requires one position per property") {
  OrGameConfig cfg;
  cfg.message_length = 5;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("freezing flips every speaker array and nothing in the listener") {
  AgentPair pair = init_agent_pair(ArchitectureSpec::object_reconstruction(OrGameConfig{}), 3);
  set_speaker_frozen(pair, true);
  CHECK(pair.speaker.all_frozen());
  CHECK_FALSE(pair.listener.any_frozen());
  set_speaker_frozen(pair, false);
  CHECK_FALSE(pair.speaker.any_frozen());
}

TEST_CASE("agent checkpoints round trip bitwise") {
  IbrConfig cfg;
  cfg.feature_dim = 6;
  cfg.vocab = 9;
  cfg.embedding = 4;
  cfg.hidden = 5;
  cfg.message_length = 3;
  AgentPair pair = init_agent_pair(ArchitectureSpec::referential(cfg), 4);
  set_speaker_frozen(pair, true);
  const auto path = std::filesystem::temp_directory_path() / "s2p_agent_roundtrip.ckpt";
  save_agent_pair(path.string(), pair);
  const AgentPair back = load_agent_pair(path.string());
  std::filesystem::remove(path);
  CHECK(back.speaker == pair.speaker);
  CHECK(back.listener == pair.listener);
  CHECK(back.seed == 4);
  CHECK(back.speaker_frozen);
  CHECK(back.arch.game == GameKind::referential);
  CHECK(back.arch.referential_game.message_length == 3);
}

TEST_CASE("greedy speaking is deterministic") {
  OrGameConfig cfg;
  cfg.properties = 2;
  cfg.types = 3;
  cfg.vocab = 6;
  cfg.message_length = 2;
  cfg.hidden = 4;
  const AgentPair pair = init_agent_pair(ArchitectureSpec::object_reconstruction(cfg), 7);
  const Vec input{1, 0, 0, 0, 1, 0};
  const auto a = speaker_forward(pair, input, {}, nullptr);
  const auto b = speaker_forward(pair, input, {}, nullptr);
  CHECK(a.message == b.message);
  CHECK(a.message.tokens.size() == 2);
  CHECK(a.samples.empty());
}

#include <sstream>

#include "doctest.h"
#include "s2p/checkpoint.hpp"
#include "s2p/error.hpp"
#include "s2p/ops.hpp"
#include "s2p/optimizer.hpp"
#include "s2p/rng.hpp"

using namespace s2p;

TEST_CASE("rng streams are deterministic and derived streams independent") {
  RngStream a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  RngStream root(5);
  const RngStream before = root;
  RngStream c1 = root.derive(stream::schedule);
  CHECK(root == before);
  RngStream c2 = root.derive(stream::supervised);
  CHECK(c1.next_u64() != c2.next_u64());
  CHECK(root.derive(3) == RngStream(5).derive(3));
}

TEST_CASE("rng serialization resumes the exact sequence") {
  RngStream a(9);
  for (int i = 0; i < 17; ++i) a.uniform();
  RngStream b = RngStream::deserialize(a.serialize());
  for (int i = 0; i < 50; ++i) CHECK(a.normal() == b.normal());
}

TEST_CASE("bernoulli and uniform_index edge cases") {
  RngStream r(1);
  for (int i = 0; i < 200; ++i) {
    CHECK_FALSE(r.bernoulli(0.0));
    CHECK(r.bernoulli(1.0));
    CHECK(r.uniform_index(3) < 3);
  }
}

TEST_CASE("softmax sums to one and survives large logits") {
  const Vec s = softmax(Vec{1000.0, 1001.0, -5.0});
  double sum = 0;
  for (double v : s) sum += v;
  CHECK(sum == doctest::Approx(1.0));
  CHECK(s[1] > s[0]);
}

TEST_CASE("optimizer leaves frozen arrays and their state untouched") {
  RngStream rng(3);
  ParameterSet p;
  p.add("a", 2, 2, Init::glorot_uniform, rng);
  p.add("b", 2, 1, Init::glorot_uniform, rng);
  p.at("a").frozen = true;
  const ParameterSet before = p;
  Gradients g = Gradients::zeros_like(p);
  for (const char* name : {"a", "b"})
    for (double& v : g[name].values()) v = 0.5;
  optimizer_step(p, g, {});
  CHECK(p.value("a") == before.value("a"));
  CHECK(p.at("a").step == 0);
  CHECK_FALSE(p.value("b") == before.value("b"));
}

TEST_CASE("optimizer requires gradients for unfrozen arrays") {
  RngStream rng(3);
  ParameterSet p;
  p.add("a", 2, 2, Init::glorot_uniform, rng);
  Gradients g;
  CHECK_THROWS_AS(optimizer_step(p, g, {}), Error);
}

TEST_CASE("checkpoint text round trip is bitwise") {
  RngStream rng(11);
  ParameterSet p;
  p.add("w", 3, 4, Init::glorot_uniform, rng);
  p.mutable_value("w")[0] = 1.0 / 3.0;
  p.mutable_value("w")[1] = -1e-300;
  Checkpoint c;
  c.meta["k"] = "v";
  c.rngs.emplace("r", rng);
  c.sections.emplace_back("s", p);
  std::stringstream ss;
  write_checkpoint(ss, c);
  const Checkpoint back = read_checkpoint(ss);
  CHECK(back.section("s") == p);
  CHECK(back.meta.at("k") == "v");
  CHECK(back.rngs.at("r") == rng);
}

TEST_CASE("format_double round trips") {
  for (double v : {0.1, 1.0 / 7.0, 6.02e23, -0.0, 5e-324}) CHECK(parse_double(format_double(v)) == v);
}

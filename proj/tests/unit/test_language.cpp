#include <set>
#include <sstream>

#include "doctest.h"
#include "s2p/error.hpp"
#include "s2p/language.hpp"

using namespace s2p;

namespace {

Dataset dataset_from(const CompositionalLanguage& lang, const std::vector<ObjectObservation>& objs) {
  return make_dataset(lang, objs, 0.0);
}

}  // namespace

TEST_CASE("speak and parse are inverse for sampled languages") {
  const LanguageConfig cfg{3, 4, 15};
  RngStream rng(1);
  for (int s = 0; s < 5; ++s) {
    const CompositionalLanguage lang = make_target_language(cfg, rng);
    for (int i = 0; i < 20; ++i) {
      const ObjectObservation o = random_object(cfg, rng);
      CHECK(parse(lang, speak(lang, o)) == o);
    }
  }
}

TEST_CASE("parse rejects words outside the language or repeated properties") {
  const LanguageConfig cfg{2, 3, 8};
  const auto lang = CompositionalLanguage::identity(cfg);
  CHECK_THROWS_AS(parse(lang, Message{{7, 0}}), Error);
  CHECK_THROWS_AS(parse(lang, Message{{0, 1}}), Error);
  CHECK(parse(lang, Message{{4, 1}}) == ObjectObservation{{1, 1}});
}

TEST_CASE("language construction validates injectivity and order") {
  const LanguageConfig cfg{2, 2, 4};
  CHECK_THROWS_AS(CompositionalLanguage(cfg, {0, 0, 1, 2}, {0, 1}), Error);
  CHECK_THROWS_AS(CompositionalLanguage(cfg, {0, 1, 2, 3}, {0, 0}), Error);
  CHECK_THROWS_AS((LanguageConfig{3, 3, 8}.validate()), Error);
}

TEST_CASE("block-structured languages keep each property inside its word block") {
  const LanguageConfig cfg{3, 4, 12};
  RngStream rng(2);
  const auto lang = sample_compositional_language(cfg, rng, LcStructure::block);
  for (int p = 0; p < 3; ++p)
    for (int t = 0; t < 4; ++t) CHECK(lang.word_of(p, t) / 4 == p);
}

TEST_CASE("object index is a bijection") {
  const LanguageConfig cfg{3, 4, 12};
  for (std::uint64_t i = 0; i < input_space_size(cfg); ++i)
    CHECK(object_index(object_from_index(i, cfg), cfg) == i);
  CHECK(input_space_size(LanguageConfig{40, 10, 400}) == UINT64_MAX);
}

TEST_CASE("distinct sampling returns distinct objects and prefixes are stable") {
  const LanguageConfig cfg{2, 3, 6};
  RngStream a(4), b(4);
  const auto all = sample_distinct_objects(cfg, 9, a);
  CHECK(std::set<ObjectObservation>(all.begin(), all.end()).size() == 9);
  CHECK_THROWS_AS(sample_distinct_objects(cfg, 10, b), Error);
  const LanguageConfig big{6, 10, 60};
  RngStream c(5);
  const auto many = sample_distinct_objects(big, 2000, c);
  CHECK(std::set<ObjectObservation>(many.begin(), many.end()).size() == 2000);
}

TEST_CASE("validation split sizes") {
  CHECK(val_count(0, 0.1) == 0);
  CHECK(val_count(1, 0.1) == 0);
  CHECK(val_count(2, 0.1) == 1);
  CHECK(val_count(30, 0.1) == 3);
  CHECK(val_count(30, 0.0) == 0);
  const auto lang = CompositionalLanguage::identity({2, 3, 6});
  RngStream rng(1);
  const Dataset d = build_dataset(lang, 9, rng);
  CHECK(d.val_size() == 1);
  CHECK(d.pairs.back().split == Split::val);
}

TEST_CASE("constructed seed pins down the language (6 properties, 10 types)") {
  const LanguageConfig cfg{6, 10, 60};
  RngStream rng(7);
  const auto lang = make_target_language(cfg, rng);
  const Dataset seed = optimal_seed_construction(lang);
  CHECK(seed.size() == 14);
  CHECK(seed.val_size() == 0);
  const LanguageCount c = consistent_language_count(seed, cfg, 1000);
  CHECK(c.count == 1);
  CHECK_FALSE(c.capped);
}

TEST_CASE("dropping any constructed sample leaves the language ambiguous") {
  const LanguageConfig cfg{6, 10, 60};
  const auto lang = CompositionalLanguage::identity(cfg);
  const Dataset seed = optimal_seed_construction(lang);
  for (std::size_t k = 0; k < seed.size(); ++k) {
    Dataset d = seed;
    d.pairs.erase(d.pairs.begin() + static_cast<long>(k));
    CHECK(consistent_language_count(d, cfg, 1000).count > 1);
  }
}

TEST_CASE("constraint propagation agrees with exhaustive enumeration") {
  // Small spaces where enumeration over every word map and order is exact.
  const std::vector<LanguageConfig> configs{{2, 2, 4}, {2, 3, 6}, {3, 3, 9}, {2, 2, 5}, {2, 3, 7}, {3, 2, 8}};
  RngStream rng(8);
  for (const auto& cfg : configs) {
    for (int trial = 0; trial < 6; ++trial) {
      const auto lang = make_target_language(cfg, rng);
      const std::size_t space = input_space_size(cfg);
      const std::size_t n = rng.uniform_index(std::min<std::size_t>(space, 5) + 1);
      const Dataset d = dataset_from(lang, sample_distinct_objects(cfg, n, rng));
      const auto e = consistent_language_count_enumerate(d, cfg, UINT64_MAX);
      const auto p = consistent_language_count_propagate(d, cfg, UINT64_MAX);
      INFO("p=" << cfg.properties << " t=" << cfg.types << " V=" << cfg.vocab << " n=" << n);
      CHECK(e.enumerated);
      CHECK(e.count == p.count);
      CHECK(e.count >= 1);
    }
  }
}

TEST_CASE("empty data admits every language") {
  const LanguageConfig cfg{2, 2, 4};
  // 4! word maps times 2! orders
  CHECK(consistent_language_count(Dataset{}, cfg, UINT64_MAX).count == 48);
}

TEST_CASE("count respects its cap") {
  const LanguageConfig cfg{6, 10, 60};
  const auto c = consistent_language_count(Dataset{}, cfg, 1000);
  CHECK(c.capped);
  CHECK(c.count == 1000);
}

TEST_CASE("dataset and language text round trips") {
  const LanguageConfig cfg{3, 4, 14};
  RngStream rng(9);
  const auto lang = make_target_language(cfg, rng);
  const Dataset d = build_dataset(lang, 10, rng);
  std::stringstream ds, ls;
  write_dataset(ds, d);
  write_language(ls, lang);
  const Dataset d2 = read_dataset(ds);
  REQUIRE(d2.size() == d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    CHECK(d2.pairs[i].object == d.pairs[i].object);
    CHECK(d2.pairs[i].message == d.pairs[i].message);
    CHECK(d2.pairs[i].split == d.pairs[i].split);
  }
  CHECK(read_language(ls) == lang);
}

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "s2p/rng.hpp"

namespace s2p {

struct LanguageConfig {
  int properties = 6;  // p
  int types = 10;      // t
  int vocab = 60;      // |V|

  int pair_count() const { return properties * types; }
  void validate() const;
};

// One object: a type index per property.
struct ObjectObservation {
  std::vector<int> types;

  bool operator==(const ObjectObservation&) const = default;
  auto operator<=>(const ObjectObservation&) const = default;
};

struct Message {
  std::vector<int> tokens;

  bool operator==(const Message&) const = default;
};

enum class Split { train, val };

struct Example {
  ObjectObservation object;
  Message message;
  Split split = Split::train;
};

struct Dataset {
  std::vector<Example> pairs;

  std::vector<Example> train() const;
  std::vector<Example> val() const;
  std::size_t train_size() const;
  std::size_t val_size() const;
  std::size_t size() const { return pairs.size(); }
};

// How sampled languages permute words: globally over all (property, type)
// pairs, or only within each property's block of words.
enum class LcStructure { global, block };

// Injective (property, type) -> word map plus the property order used when
// uttering: position i of a message carries property order[i].
class CompositionalLanguage {
 public:
  CompositionalLanguage(LanguageConfig config, std::vector<int> word_of, std::vector<int> order);

  // word id = property * t + type, properties uttered in index order.
  static CompositionalLanguage identity(const LanguageConfig& config);

  const LanguageConfig& config() const { return config_; }
  int word_of(int property, int type) const;
  const std::vector<int>& words() const { return word_of_; }
  const std::vector<int>& property_order() const { return order_; }
  // (property, type) for a word, if the word belongs to the language.
  std::optional<std::pair<int, int>> meaning_of(int word) const;

  bool operator==(const CompositionalLanguage& o) const {
    return word_of_ == o.word_of_ && order_ == o.order_ && config_.vocab == o.config_.vocab;
  }

 private:
  LanguageConfig config_;
  std::vector<int> word_of_;       // index property * t + type
  std::vector<int> order_;         // sigma
  std::vector<int> pair_of_word_;  // -1 when unused
};

CompositionalLanguage make_target_language(const LanguageConfig& config, RngStream& rng);
CompositionalLanguage sample_compositional_language(const LanguageConfig& config, RngStream& rng,
                                                    LcStructure structure = LcStructure::global);

bool valid_object(const ObjectObservation& object, const LanguageConfig& config);
Message speak(const CompositionalLanguage& language, const ObjectObservation& object);
// Order-independent: words are globally unique, so each token names its property.
ObjectObservation parse(const CompositionalLanguage& language, const Message& message);

// t^p, saturating at UINT64_MAX.
std::uint64_t input_space_size(const LanguageConfig& config);
ObjectObservation object_from_index(std::uint64_t index, const LanguageConfig& config);
std::uint64_t object_index(const ObjectObservation& object, const LanguageConfig& config);
ObjectObservation random_object(const LanguageConfig& config, RngStream& rng);
// n distinct objects in sampling order (a prefix of the result is itself a
// valid draw of fewer objects).
std::vector<ObjectObservation> sample_distinct_objects(const LanguageConfig& config, std::size_t n,
                                                       RngStream& rng);

inline constexpr double kDefaultValFraction = 0.1;

// Number of validation samples for a seed of n: round(n * fraction), at least
// one when n >= 2.
std::size_t val_count(std::size_t n, double val_fraction);

// Pairs objects with their utterances; the last val_count(...) objects form D_val.
Dataset make_dataset(const CompositionalLanguage& language,
                     const std::vector<ObjectObservation>& objects,
                     double val_fraction = kDefaultValFraction);
Dataset build_dataset(const CompositionalLanguage& language, std::size_t n, RngStream& rng,
                      double val_fraction = kDefaultValFraction);

// Two-stage hand-designed seed: t-1 objects whose (property, type) pairs never
// overlap, then p-1 objects whose types are all distinct. Requires t > p and
// |V| = p * t. All samples are tagged train.
Dataset optimal_seed_construction(const CompositionalLanguage& language);

struct LanguageCount {
  std::uint64_t count = 0;
  bool capped = false;      // counting stopped at the cap
  bool enumerated = false;  // exhaustive enumeration path was used
};

// Number of languages (word map, property order) whose utterances match every
// pair. Exhaustive enumeration when p*t <= 9 and |V| <= 9, constraint
// propagation otherwise.
LanguageCount consistent_language_count(const Dataset& dataset, const LanguageConfig& config,
                                        std::uint64_t cap);
LanguageCount consistent_language_count_enumerate(const Dataset& dataset,
                                                  const LanguageConfig& config, std::uint64_t cap);
LanguageCount consistent_language_count_propagate(const Dataset& dataset,
                                                  const LanguageConfig& config, std::uint64_t cap);

// Text formats. Dataset: one pair per line, "types<TAB>words<TAB>train|val".
// Language: p*t lines "property type word", then "sigma ..." and "vocab N".
void write_dataset(std::ostream& out, const Dataset& dataset);
Dataset read_dataset(std::istream& in);
void write_language(std::ostream& out, const CompositionalLanguage& language);
CompositionalLanguage read_language(std::istream& in);

}  // namespace s2p

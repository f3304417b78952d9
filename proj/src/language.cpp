#include "s2p/language.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include "s2p/error.hpp"

namespace s2p {

void LanguageConfig::validate() const {
  if (properties < 1 || types < 1) throw Error(ErrorKind::config, "need p >= 1 and t >= 1");
  if (vocab < pair_count())
    throw Error(ErrorKind::infeasible, "vocabulary of " + std::to_string(vocab) +
                                           " words cannot name " + std::to_string(pair_count()) +
                                           " (property, type) pairs");
}

std::vector<Example> Dataset::train() const {
  std::vector<Example> out;
  for (const auto& e : pairs)
    if (e.split == Split::train) out.push_back(e);
  return out;
}

std::vector<Example> Dataset::val() const {
  std::vector<Example> out;
  for (const auto& e : pairs)
    if (e.split == Split::val) out.push_back(e);
  return out;
}

std::size_t Dataset::train_size() const {
  return static_cast<std::size_t>(
      std::count_if(pairs.begin(), pairs.end(), [](const Example& e) { return e.split == Split::train; }));
}

std::size_t Dataset::val_size() const { return pairs.size() - train_size(); }

CompositionalLanguage::CompositionalLanguage(LanguageConfig config, std::vector<int> word_of,
                                             std::vector<int> order)
    : config_(config), word_of_(std::move(word_of)), order_(std::move(order)) {
  config_.validate();
  const int p = config_.properties;
  if (static_cast<int>(word_of_.size()) != config_.pair_count())
    throw Error(ErrorKind::shape, "word map must cover all p*t pairs");
  if (static_cast<int>(order_.size()) != p) throw Error(ErrorKind::shape, "order must have p entries");
  std::vector<int> seen(p, 0);
  for (int j : order_) {
    if (j < 0 || j >= p || seen[j]++) throw Error(ErrorKind::invalid_input, "order is not a permutation");
  }
  pair_of_word_.assign(config_.vocab, -1);
  for (int k = 0; k < config_.pair_count(); ++k) {
    const int w = word_of_[k];
    if (w < 0 || w >= config_.vocab) throw Error(ErrorKind::index, "word id outside vocabulary");
    if (pair_of_word_[w] != -1) throw Error(ErrorKind::invalid_input, "two pairs share a word");
    pair_of_word_[w] = k;
  }
}

CompositionalLanguage CompositionalLanguage::identity(const LanguageConfig& config) {
  std::vector<int> words(config.pair_count());
  std::iota(words.begin(), words.end(), 0);
  std::vector<int> order(config.properties);
  std::iota(order.begin(), order.end(), 0);
  return CompositionalLanguage(config, std::move(words), std::move(order));
}

int CompositionalLanguage::word_of(int property, int type) const {
  if (property < 0 || property >= config_.properties || type < 0 || type >= config_.types)
    throw Error(ErrorKind::index, "(property, type) out of range");
  return word_of_[property * config_.types + type];
}

std::optional<std::pair<int, int>> CompositionalLanguage::meaning_of(int word) const {
  if (word < 0 || word >= config_.vocab) return std::nullopt;
  const int k = pair_of_word_[word];
  if (k < 0) return std::nullopt;
  return std::make_pair(k / config_.types, k % config_.types);
}

CompositionalLanguage make_target_language(const LanguageConfig& config, RngStream& rng) {
  config.validate();
  std::vector<int> vocab(config.vocab);
  std::iota(vocab.begin(), vocab.end(), 0);
  rng.shuffle(vocab);
  vocab.resize(config.pair_count());
  std::vector<int> order(config.properties);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  return CompositionalLanguage(config, std::move(vocab), std::move(order));
}

CompositionalLanguage sample_compositional_language(const LanguageConfig& config, RngStream& rng,
                                                    LcStructure structure) {
  config.validate();
  if (config.vocab != config.pair_count())
    throw Error(ErrorKind::infeasible, "compositional languages require |V| = p*t");
  if (structure == LcStructure::global) return make_target_language(config, rng);

  const int t = config.types;
  std::vector<int> words(config.pair_count());
  for (int j = 0; j < config.properties; ++j) {
    std::vector<int> block(t);
    std::iota(block.begin(), block.end(), j * t);
    rng.shuffle(block);
    std::copy(block.begin(), block.end(), words.begin() + j * t);
  }
  std::vector<int> order(config.properties);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  return CompositionalLanguage(config, std::move(words), std::move(order));
}

bool valid_object(const ObjectObservation& object, const LanguageConfig& config) {
  if (static_cast<int>(object.types.size()) != config.properties) return false;
  return std::all_of(object.types.begin(), object.types.end(),
                     [&](int x) { return x >= 0 && x < config.types; });
}

Message speak(const CompositionalLanguage& language, const ObjectObservation& object) {
  if (!valid_object(object, language.config())) throw Error(ErrorKind::invalid_input, "invalid object");
  Message m;
  m.tokens.reserve(object.types.size());
  for (int prop : language.property_order()) m.tokens.push_back(language.word_of(prop, object.types[prop]));
  return m;
}

ObjectObservation parse(const CompositionalLanguage& language, const Message& message) {
  const int p = language.config().properties;
  ObjectObservation o;
  o.types.assign(p, -1);
  for (int w : message.tokens) {
    auto meaning = language.meaning_of(w);
    if (!meaning) throw Error(ErrorKind::unparseable, "word " + std::to_string(w) + " not in language");
    auto [prop, type] = *meaning;
    if (o.types[prop] != -1)
      throw Error(ErrorKind::unparseable, "two words for property " + std::to_string(prop));
    o.types[prop] = type;
  }
  for (int x : o.types)
    if (x < 0) throw Error(ErrorKind::unparseable, "message leaves a property unspecified");
  return o;
}

std::uint64_t input_space_size(const LanguageConfig& config) {
  std::uint64_t n = 1;
  for (int i = 0; i < config.properties; ++i) {
    if (n > std::numeric_limits<std::uint64_t>::max() / static_cast<std::uint64_t>(config.types))
      return std::numeric_limits<std::uint64_t>::max();
    n *= static_cast<std::uint64_t>(config.types);
  }
  return n;
}

ObjectObservation object_from_index(std::uint64_t index, const LanguageConfig& config) {
  ObjectObservation o;
  o.types.resize(config.properties);
  for (int i = config.properties - 1; i >= 0; --i) {
    o.types[i] = static_cast<int>(index % static_cast<std::uint64_t>(config.types));
    index /= static_cast<std::uint64_t>(config.types);
  }
  return o;
}

std::uint64_t object_index(const ObjectObservation& object, const LanguageConfig& config) {
  std::uint64_t idx = 0;
  for (int x : object.types) idx = idx * static_cast<std::uint64_t>(config.types) + static_cast<std::uint64_t>(x);
  return idx;
}

ObjectObservation random_object(const LanguageConfig& config, RngStream& rng) {
  ObjectObservation o;
  o.types.resize(config.properties);
  for (int& x : o.types) x = static_cast<int>(rng.uniform_index(static_cast<std::size_t>(config.types)));
  return o;
}

std::vector<ObjectObservation> sample_distinct_objects(const LanguageConfig& config, std::size_t n,
                                                       RngStream& rng) {
  const std::uint64_t space = input_space_size(config);
  if (n > space)
    throw Error(ErrorKind::infeasible, "requested " + std::to_string(n) +
                                           " distinct objects from an input space of " +
                                           std::to_string(space));
  std::vector<ObjectObservation> out;
  out.reserve(n);
  if (space <= std::max<std::uint64_t>(4 * n, 1u << 16)) {
    // Partial Fisher-Yates over the enumerated space.
    std::vector<std::uint64_t> all(space);
    std::iota(all.begin(), all.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t j = i + rng.uniform_index(all.size() - i);
      std::swap(all[i], all[j]);
      out.push_back(object_from_index(all[i], config));
    }
    return out;
  }
  std::unordered_set<std::uint64_t> used;
  while (out.size() < n) {
    ObjectObservation o = random_object(config, rng);
    if (used.insert(object_index(o, config)).second) out.push_back(std::move(o));
  }
  return out;
}

std::size_t val_count(std::size_t n, double val_fraction) {
  if (n < 2 || val_fraction <= 0.0) return 0;
  std::size_t v = static_cast<std::size_t>(std::llround(static_cast<double>(n) * val_fraction));
  return std::clamp<std::size_t>(v, 1, n - 1);
}

Dataset make_dataset(const CompositionalLanguage& language,
                     const std::vector<ObjectObservation>& objects, double val_fraction) {
  Dataset d;
  const std::size_t nval = val_count(objects.size(), val_fraction);
  const std::size_t ntrain = objects.size() - nval;
  for (std::size_t i = 0; i < objects.size(); ++i)
    d.pairs.push_back({objects[i], speak(language, objects[i]), i < ntrain ? Split::train : Split::val});
  return d;
}

Dataset build_dataset(const CompositionalLanguage& language, std::size_t n, RngStream& rng,
                      double val_fraction) {
  return make_dataset(language, sample_distinct_objects(language.config(), n, rng), val_fraction);
}

Dataset optimal_seed_construction(const CompositionalLanguage& language) {
  const LanguageConfig& cfg = language.config();
  const int p = cfg.properties, t = cfg.types;
  if (t <= p) throw Error(ErrorKind::infeasible, "seed construction needs more types than properties");
  if (cfg.vocab != cfg.pair_count())
    throw Error(ErrorKind::infeasible, "seed construction needs |V| = p*t");

  std::vector<ObjectObservation> objects;
  // Stage 1: object k has every property at type k, so no (property, type)
  // pair repeats across samples; type t-1 is left to exclusion.
  for (int k = 0; k < t - 1; ++k) objects.push_back({std::vector<int>(p, k)});
  // Stage 2: property j takes the excluded type t-1 while every other
  // property i keeps type i, so all types within a sample are distinct.
  for (int j = 0; j < p - 1; ++j) {
    ObjectObservation o;
    o.types.resize(p);
    for (int i = 0; i < p; ++i) o.types[i] = (i == j) ? t - 1 : i;
    objects.push_back(std::move(o));
  }
  return make_dataset(language, objects, 0.0);
}

namespace {

std::uint64_t sat_add(std::uint64_t a, std::uint64_t b) {
  return (a > std::numeric_limits<std::uint64_t>::max() - b) ? std::numeric_limits<std::uint64_t>::max()
                                                              : a + b;
}

std::uint64_t sat_mul(std::uint64_t a, std::uint64_t b) {
  if (a != 0 && b > std::numeric_limits<std::uint64_t>::max() / a) return std::numeric_limits<std::uint64_t>::max();
  return a * b;
}

// free!/(free-slots)!, saturating.
std::uint64_t falling_factorial(std::uint64_t free, std::uint64_t slots) {
  if (slots > free) return 0;
  std::uint64_t r = 1;
  for (std::uint64_t i = 0; i < slots; ++i) r = sat_mul(r, free - i);
  return r;
}

void check_messages(const Dataset& dataset, const LanguageConfig& config) {
  for (const auto& e : dataset.pairs) {
    if (!valid_object(e.object, config)) throw Error(ErrorKind::invalid_input, "object does not fit config");
    if (static_cast<int>(e.message.tokens.size()) != config.properties)
      throw Error(ErrorKind::invalid_input, "messages must be length-p utterances");
  }
}

}  // namespace

LanguageCount consistent_language_count_enumerate(const Dataset& dataset,
                                                  const LanguageConfig& config, std::uint64_t cap) {
  config.validate();
  check_messages(dataset, config);
  const int p = config.properties, pt = config.pair_count(), V = config.vocab;
  LanguageCount result;
  result.enumerated = true;

  std::vector<int> order(p);
  std::iota(order.begin(), order.end(), 0);
  std::vector<int> words(pt, -1);
  std::vector<char> used(V, 0);

  auto matches = [&]() {
    for (const auto& e : dataset.pairs)
      for (int i = 0; i < p; ++i) {
        const int prop = order[i];
        if (words[prop * config.types + e.object.types[prop]] != e.message.tokens[i]) return false;
      }
    return true;
  };

  // Recursive assignment of words to pairs; checks the full dataset at leaves.
  auto assign = [&](auto&& self, int k) -> bool {
    if (k == pt) {
      if (matches()) {
        result.count = sat_add(result.count, 1);
        if (result.count >= cap) {
          result.capped = true;
          return false;
        }
      }
      return true;
    }
    for (int w = 0; w < V; ++w) {
      if (used[w]) continue;
      used[w] = 1;
      words[k] = w;
      const bool go_on = self(self, k + 1);
      used[w] = 0;
      if (!go_on) return false;
    }
    return true;
  };

  do {
    if (!assign(assign, 0)) break;
  } while (std::next_permutation(order.begin(), order.end()));
  return result;
}

LanguageCount consistent_language_count_propagate(const Dataset& dataset,
                                                  const LanguageConfig& config, std::uint64_t cap) {
  config.validate();
  check_messages(dataset, config);
  const int p = config.properties, t = config.types, V = config.vocab;
  LanguageCount result;

  // hypothesis[i][j]: type -> word map implied by "position i utters property j",
  // or empty optional when that hypothesis contradicts the data.
  using TypeMap = std::vector<int>;  // -1 = unobserved
  std::vector<std::vector<std::optional<TypeMap>>> hyp(p, std::vector<std::optional<TypeMap>>(p));
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j) {
      TypeMap map(t, -1);
      std::vector<int> type_of_word(V, -1);
      bool ok = true;
      for (const auto& e : dataset.pairs) {
        const int x = e.object.types[j];
        const int w = e.message.tokens[i];
        if (w < 0 || w >= V) { ok = false; break; }
        if ((map[x] != -1 && map[x] != w) || (type_of_word[w] != -1 && type_of_word[w] != x)) {
          ok = false;
          break;
        }
        map[x] = w;
        type_of_word[w] = x;
      }
      if (ok) hyp[i][j] = std::move(map);
    }

  std::vector<int> owner(V, -1);  // property claiming a word
  std::vector<char> prop_used(p, 0);
  int observed = 0;

  auto search = [&](auto&& self, int i) -> bool {
    if (i == p) {
      const auto unobserved = static_cast<std::uint64_t>(config.pair_count() - observed);
      const auto free_words = static_cast<std::uint64_t>(V - observed);
      result.count = sat_add(result.count, falling_factorial(free_words, unobserved));
      if (result.count >= cap) {
        result.capped = true;
        return false;
      }
      return true;
    }
    for (int j = 0; j < p; ++j) {
      if (prop_used[j] || !hyp[i][j]) continue;
      const TypeMap& map = *hyp[i][j];
      bool clash = false;
      for (int w : map)
        if (w != -1 && owner[w] != -1) clash = true;
      if (clash) continue;
      int added = 0;
      for (int w : map)
        if (w != -1) {
          owner[w] = j;
          ++added;
        }
      prop_used[j] = 1;
      observed += added;
      const bool go_on = self(self, i + 1);
      observed -= added;
      prop_used[j] = 0;
      for (int w : map)
        if (w != -1) owner[w] = -1;
      if (!go_on) return false;
    }
    return true;
  };
  search(search, 0);
  if (result.count > cap) result.count = cap;
  return result;
}

LanguageCount consistent_language_count(const Dataset& dataset, const LanguageConfig& config,
                                        std::uint64_t cap) {
  if (config.pair_count() <= 9 && config.vocab <= 9)
    return consistent_language_count_enumerate(dataset, config, cap);
  return consistent_language_count_propagate(dataset, config, cap);
}

namespace {

std::vector<int> read_ints(const std::string& field) {
  std::istringstream in(field);
  std::vector<int> out;
  int v;
  while (in >> v) out.push_back(v);
  if (!in.eof()) throw Error(ErrorKind::io, "malformed integer list '" + field + "'");
  return out;
}

void write_ints(std::ostream& out, const std::vector<int>& v) {
  for (std::size_t i = 0; i < v.size(); ++i) out << (i ? " " : "") << v[i];
}

}  // namespace

void write_dataset(std::ostream& out, const Dataset& dataset) {
  for (const auto& e : dataset.pairs) {
    write_ints(out, e.object.types);
    out << '\t';
    write_ints(out, e.message.tokens);
    out << '\t' << (e.split == Split::train ? "train" : "val") << '\n';
  }
}

Dataset read_dataset(std::istream& in) {
  Dataset d;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto t1 = line.find('\t');
    auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) throw Error(ErrorKind::io, "dataset line needs three tab-separated fields");
    Example e;
    e.object.types = read_ints(line.substr(0, t1));
    e.message.tokens = read_ints(line.substr(t1 + 1, t2 - t1 - 1));
    const std::string tag = line.substr(t2 + 1);
    if (tag == "train") e.split = Split::train;
    else if (tag == "val") e.split = Split::val;
    else throw Error(ErrorKind::io, "unknown split tag '" + tag + "'");
    d.pairs.push_back(std::move(e));
  }
  return d;
}

void write_language(std::ostream& out, const CompositionalLanguage& language) {
  const auto& cfg = language.config();
  for (int j = 0; j < cfg.properties; ++j)
    for (int x = 0; x < cfg.types; ++x) out << j << ' ' << x << ' ' << language.word_of(j, x) << '\n';
  out << "sigma ";
  write_ints(out, language.property_order());
  out << "\nvocab " << cfg.vocab << '\n';
}

CompositionalLanguage read_language(std::istream& in) {
  std::vector<std::array<int, 3>> rows;
  std::vector<int> order;
  int vocab = -1;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("sigma", 0) == 0) {
      order = read_ints(line.substr(5));
    } else if (line.rfind("vocab", 0) == 0) {
      vocab = std::stoi(line.substr(5));
    } else {
      auto v = read_ints(line);
      if (v.size() != 3) throw Error(ErrorKind::io, "language line needs 'property type word'");
      rows.push_back({v[0], v[1], v[2]});
    }
  }
  LanguageConfig cfg;
  cfg.properties = static_cast<int>(order.size());
  int max_type = -1, max_word = -1;
  for (auto& r : rows) {
    max_type = std::max(max_type, r[1]);
    max_word = std::max(max_word, r[2]);
  }
  cfg.types = max_type + 1;
  cfg.vocab = vocab > 0 ? vocab : max_word + 1;
  if (cfg.properties == 0 || static_cast<int>(rows.size()) != cfg.pair_count())
    throw Error(ErrorKind::io, "language file needs p*t assignment lines and a sigma line");
  std::vector<int> words(cfg.pair_count(), -1);
  for (auto& r : rows) {
    if (r[0] < 0 || r[0] >= cfg.properties || r[1] < 0) throw Error(ErrorKind::io, "assignment out of range");
    words[r[0] * cfg.types + r[1]] = r[2];
  }
  return CompositionalLanguage(cfg, std::move(words), std::move(order));
}

}  // namespace s2p

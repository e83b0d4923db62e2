#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace safesample {

/// Four-way typology obtained by crossing instruction harmfulness with
/// whether the response refuses.
enum class BehaviorType { T1, T2, T3, T4 };

inline constexpr std::array<BehaviorType, 4> kAllBehaviors = {
    BehaviorType::T1, BehaviorType::T2, BehaviorType::T3, BehaviorType::T4};

struct BehaviorAxes {
  bool instruction_harmful;
  bool response_refusal;
  friend bool operator==(const BehaviorAxes&, const BehaviorAxes&) = default;
};

/// T1 = harmful+refusal, T2 = harmful+compliance, T3 = safe+refusal,
/// T4 = safe+compliance.
constexpr BehaviorType classify_behavior(bool harmful, bool refusal) noexcept {
  if (harmful) return refusal ? BehaviorType::T1 : BehaviorType::T2;
  return refusal ? BehaviorType::T3 : BehaviorType::T4;
}

constexpr BehaviorAxes axes_of(BehaviorType t) noexcept {
  switch (t) {
    case BehaviorType::T1: return {true, true};
    case BehaviorType::T2: return {true, false};
    case BehaviorType::T3: return {false, true};
    case BehaviorType::T4: return {false, false};
  }
  return {false, false};
}

std::string_view to_string(BehaviorType t) noexcept;
/// Parses "T1".."T4"; returns nullopt for anything else.
std::optional<BehaviorType> parse_behavior(std::string_view s) noexcept;

/// Category names kept sorted and unique.
using CategorySet = std::vector<std::string>;

struct SafetyExample {
  std::string id;
  std::string instruction;
  std::string response;
  std::optional<BehaviorType> behavior;
  std::optional<CategorySet> categories;
  std::optional<bool> is_safe;
  std::string source;

  bool has_category(std::string_view name) const;
  friend bool operator==(const SafetyExample&, const SafetyExample&) = default;
};

/// What a dataset file is used for. Only affects the default source tag
/// applied when a record carries none.
enum class DatasetKind { base, safety_pool, reference };

std::string_view default_source(DatasetKind kind) noexcept;

struct Provenance {
  std::filesystem::path path;
  std::string content_hash;
};

/// An immutable, id-ordered collection of examples plus the category
/// taxonomy they are labelled against.
class Corpus {
 public:
  Corpus() = default;
  /// Validates the examples and sorts them into canonical (ascending id)
  /// order. Throws DuplicateIdError / DataError.
  Corpus(std::vector<SafetyExample> examples, std::vector<std::string> taxonomy,
         std::filesystem::path path = {});

  const std::vector<SafetyExample>& examples() const noexcept { return examples_; }
  const std::vector<std::string>& taxonomy() const noexcept { return taxonomy_; }
  const Provenance& provenance() const noexcept { return provenance_; }
  const std::string& content_hash() const noexcept { return provenance_.content_hash; }

  std::size_t size() const noexcept { return examples_.size(); }
  bool empty() const noexcept { return examples_.empty(); }
  auto begin() const noexcept { return examples_.begin(); }
  auto end() const noexcept { return examples_.end(); }

  /// nullptr if absent.
  const SafetyExample* find(std::string_view id) const;
  const SafetyExample& at(std::string_view id) const;
  std::vector<std::string> ids() const;

  /// Equality over examples and taxonomy; provenance path is ignored.
  friend bool operator==(const Corpus& a, const Corpus& b) {
    return a.examples_ == b.examples_ && a.taxonomy_ == b.taxonomy_;
  }

 private:
  std::vector<SafetyExample> examples_;
  std::vector<std::string> taxonomy_;
  Provenance provenance_;
};

struct LoadOptions {
  DatasetKind kind = DatasetKind::safety_pool;
  std::vector<std::string> taxonomy;
  /// Reject categories that are not in `taxonomy`.
  bool enforce_taxonomy = false;
  /// Reject unknown keys instead of ignoring them.
  bool strict = false;
};

Corpus load_corpus(const std::filesystem::path& path, const LoadOptions& options = {});
Corpus parse_corpus(std::string_view text, const LoadOptions& options = {},
                    const std::string& origin = "<memory>");

/// One JSON line per example, canonical order, fixed key order.
std::string serialize_example(const SafetyExample& e);
std::string serialize_corpus(const Corpus& c);
void write_corpus(const std::filesystem::path& path, const Corpus& c);

/// Sub-corpus of examples with behavior == t. Throws MissingLabelError on
/// the first unlabelled example.
Corpus filter_behavior(const Corpus& c, BehaviorType t);

/// Keeps examples for which `keep` returns true; taxonomy is carried over.
template <typename Pred>
Corpus filter_corpus(const Corpus& c, Pred keep) {
  std::vector<SafetyExample> out;
  for (const auto& e : c) {
    if (keep(e)) out.push_back(e);
  }
  return Corpus(std::move(out), c.taxonomy(), c.provenance().path);
}

struct DistributionReport {
  std::size_t total = 0;
  /// Index 0..3 = T1..T4.
  std::array<std::size_t, 4> behavior{};
  std::size_t behavior_unlabeled = 0;
  /// Taxonomy categories first (in taxonomy order, zeros included), then any
  /// label found outside the taxonomy.
  std::vector<std::pair<std::string, std::size_t>> category;
  std::size_t category_unlabeled = 0;
  /// Examples carrying more than one category; when non-zero the category
  /// axis sums to more than `total`.
  std::size_t multi_counted = 0;
  /// joint[behavior-or-"unlabeled"][category-or-"unlabeled"].
  std::map<std::string, std::map<std::string, std::size_t>> joint;

  std::size_t behavior_count(BehaviorType t) const {
    return behavior[static_cast<std::size_t>(t)];
  }
  std::string to_text() const;
  std::string to_json() const;
};

DistributionReport distribution_report(const Corpus& c);

}  // namespace safesample

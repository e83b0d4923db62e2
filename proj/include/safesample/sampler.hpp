#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "safesample/annotate.hpp"
#include "safesample/corpus.hpp"
#include "safesample/embed_store.hpp"

namespace safesample {

enum class Method { random, sss, pss, cossim, sss_b, pss_b, cossim_b };

/// Row order used by summary tables.
inline constexpr std::array<Method, 7> kTableMethodOrder = {
    Method::random, Method::cossim, Method::sss,  Method::pss,
    Method::cossim_b, Method::sss_b, Method::pss_b};

/// Budgets swept by default.
inline constexpr std::array<std::size_t, 7> kStandardBudgets = {50, 100, 150, 250, 350, 500, 1000};

std::string_view to_string(Method m) noexcept;
/// Accepts "sss_b", "sss-b", "SSS-B", ...
std::optional<Method> parse_method(std::string_view s) noexcept;
std::string_view display_name(Method m) noexcept;

constexpr bool is_behavioral(Method m) noexcept {
  return m == Method::sss_b || m == Method::pss_b || m == Method::cossim_b;
}
constexpr Method base_method(Method m) noexcept {
  switch (m) {
    case Method::sss_b: return Method::sss;
    case Method::pss_b: return Method::pss;
    case Method::cossim_b: return Method::cossim;
    default: return m;
  }
}
/// Methods whose output does not depend on the seed.
constexpr bool is_deterministic(Method m) noexcept {
  const auto b = base_method(m);
  return b == Method::pss || b == Method::cossim;
}

/// Which members define a category centroid for PSS-B.
enum class CentroidBasis { full_partition, t1_only };

struct SamplingPlan {
  Method method = Method::random;
  std::size_t budget = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> taxonomy;
  /// Always T1 for the behavioural methods.
  std::optional<BehaviorType> behavior_filter;
  CentroidBasis centroid_basis = CentroidBasis::full_partition;

  static SamplingPlan make(Method method, std::size_t budget, std::uint64_t seed,
                           std::vector<std::string> taxonomy);
  /// Throws ConfigError on a violated invariant.
  void validate() const;
};

using Quotas = std::vector<std::pair<std::string, std::size_t>>;

/// floor(n / |C|) per category; the first (n mod |C|) categories in the
/// given order get one more.
Quotas quota_split(std::size_t n, std::span<const std::string> categories);

/// Category -> member ids (ascending) over a pool. An id may appear under
/// several categories.
class CategoryIndex {
 public:
  /// Throws MissingLabelError for an uncategorised example, DataError for a
  /// category outside `taxonomy`.
  static CategoryIndex build(const Corpus& pool, const std::vector<std::string>& taxonomy);

  const std::vector<std::string>& categories() const noexcept { return categories_; }
  const std::vector<std::string>& members(std::string_view category) const;

 private:
  std::vector<std::string> categories_;
  std::vector<std::vector<std::string>> members_;
};

struct SelectionResult {
  SamplingPlan plan;
  /// In selection order.
  std::vector<std::string> selected_ids;
  /// Picks made under each category's own quota, taxonomy order.
  Quotas per_category_counts;
  /// Picks made by the final redistribution pass.
  std::size_t topup_count = 0;
  std::size_t shortfall = 0;
  std::string pool_hash;
  std::string embedding_hash;
  std::size_t tie_events = 0;
  std::vector<std::string> skipped_categories;

  /// Byte-stable JSON; contains no timestamp. The seed is written as null
  /// for seed-independent methods.
  std::string manifest_json() const;
  nlohmann::ordered_json manifest() const;
};

SelectionResult sample_random(const Corpus& pool, const SamplingPlan& plan);

SelectionResult sample_sss(const Corpus& pool, const CategoryIndex& index,
                           const SamplingPlan& plan);

/// `centroid_index` supplies the members each centroid is averaged over;
/// when null, `index` is used. Candidates always come from `index`.
SelectionResult sample_pss(const Corpus& pool, const CategoryIndex& index,
                           const EmbeddingStore& store, const SamplingPlan& plan,
                           const CategoryIndex* centroid_index = nullptr);

SelectionResult sample_cossim(const Corpus& pool, const ReferenceSets& refsets,
                              const EmbeddingStore& store, const SamplingPlan& plan);

struct SamplingInputs {
  const Corpus* pool = nullptr;
  const EmbeddingStore* store = nullptr;
  const ReferenceSets* refsets = nullptr;
};

/// Restricts the pool to T1 examples and delegates to the base method.
SelectionResult sample_behavioral(const SamplingInputs& inputs, const SamplingPlan& plan);

/// Dispatches on plan.method.
SelectionResult select(const SamplingInputs& inputs, const SamplingPlan& plan);

struct AugmentOptions {
  /// On an id clash with the base set, rename the added example to
  /// "<source>:<id>"; when false a clash is an error.
  bool prefix_on_collision = true;
};

struct AugmentResult {
  Corpus corpus;
  std::size_t base_count = 0;
  std::size_t added = 0;
  /// added / base_count.
  double ratio = 0.0;
  std::vector<std::pair<std::string, std::string>> renamed;

  nlohmann::ordered_json manifest() const;
};

AugmentResult augment(const Corpus& base, const SelectionResult& selection,
                      const Corpus& safety_pool, const AugmentOptions& options = {});

}  // namespace safesample

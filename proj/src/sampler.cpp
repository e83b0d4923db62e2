#include "safesample/sampler.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <unordered_set>

#include "safesample/error.hpp"
#include "safesample/prng.hpp"

namespace safesample {

using nlohmann::ordered_json;

std::string_view to_string(Method m) noexcept {
  switch (m) {
    case Method::random: return "random";
    case Method::sss: return "sss";
    case Method::pss: return "pss";
    case Method::cossim: return "cossim";
    case Method::sss_b: return "sss_b";
    case Method::pss_b: return "pss_b";
    case Method::cossim_b: return "cossim_b";
  }
  return "";
}

std::optional<Method> parse_method(std::string_view s) noexcept {
  std::string norm;
  for (char ch : s) {
    norm += ch == '-' ? '_' : static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  }
  for (auto m : kTableMethodOrder) {
    if (to_string(m) == norm) return m;
  }
  return std::nullopt;
}

std::string_view display_name(Method m) noexcept {
  switch (m) {
    case Method::random: return "Random Sampling (Baseline)";
    case Method::sss: return "SSS";
    case Method::pss: return "PSS";
    case Method::cossim: return "Cossim";
    case Method::sss_b: return "SSS-B";
    case Method::pss_b: return "PSS-B";
    case Method::cossim_b: return "Cossim-B";
  }
  return "";
}

SamplingPlan SamplingPlan::make(Method method, std::size_t budget, std::uint64_t seed,
                                std::vector<std::string> taxonomy) {
  SamplingPlan p;
  p.method = method;
  p.budget = budget;
  p.seed = seed;
  p.taxonomy = std::move(taxonomy);
  if (is_behavioral(method)) p.behavior_filter = BehaviorType::T1;
  return p;
}

void SamplingPlan::validate() const {
  if (budget < 1) throw ConfigError("budget must be at least 1");
  if (is_behavioral(method) && behavior_filter != BehaviorType::T1) {
    throw ConfigError(std::string(to_string(method)) + " requires the T1 behaviour filter");
  }
  if (method != Method::random && taxonomy.empty()) {
    throw ConfigError(std::string(to_string(method)) + " requires a non-empty taxonomy");
  }
}

Quotas quota_split(std::size_t n, std::span<const std::string> categories) {
  Quotas q;
  if (categories.empty()) return q;
  const std::size_t base = n / categories.size();
  const std::size_t extra = n % categories.size();
  for (std::size_t i = 0; i < categories.size(); ++i) {
    q.emplace_back(categories[i], base + (i < extra ? 1 : 0));
  }
  return q;
}

CategoryIndex CategoryIndex::build(const Corpus& pool, const std::vector<std::string>& taxonomy) {
  CategoryIndex idx;
  idx.categories_ = taxonomy;
  idx.members_.resize(taxonomy.size());
  for (const auto& e : pool) {
    if (!e.categories) throw MissingLabelError(e.id, "category");
    for (const auto& cat : *e.categories) {
      auto it = std::find(taxonomy.begin(), taxonomy.end(), cat);
      if (it == taxonomy.end()) {
        throw DataError("example '" + e.id + "' has category '" + cat + "' outside the taxonomy");
      }
      idx.members_[static_cast<std::size_t>(it - taxonomy.begin())].push_back(e.id);
    }
  }
  return idx;
}

const std::vector<std::string>& CategoryIndex::members(std::string_view category) const {
  static const std::vector<std::string> kEmpty;
  for (std::size_t i = 0; i < categories_.size(); ++i) {
    if (categories_[i] == category) return members_[i];
  }
  return kEmpty;
}

namespace {

struct Scored {
  double score;
  std::string id;
  std::size_t category;  // position in taxonomy, for the global top-up order
};

/// score descending, id ascending, category ascending.
bool ranks_before(const Scored& a, const Scored& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.id != b.id) return a.id < b.id;
  return a.category < b.category;
}

std::size_t count_adjacent_ties(const std::vector<Scored>& sorted) {
  std::size_t n = 0;
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i].score == sorted[i - 1].score) ++n;
  }
  return n;
}

SelectionResult start_result(const Corpus& pool, const SamplingPlan& plan) {
  plan.validate();
  if (pool.empty()) throw EmptyInputError("candidate pool is empty");
  SelectionResult r;
  r.plan = plan;
  r.pool_hash = pool.content_hash();
  return r;
}

void finish(SelectionResult& r) { r.shortfall = r.plan.budget - r.selected_ids.size(); }

/// Fills the remaining budget from ranked (score, id) pairs, skipping ids
/// already taken.
void topup_ranked(SelectionResult& r, std::vector<Scored> pairs,
                  std::unordered_set<std::string>& taken) {
  std::sort(pairs.begin(), pairs.end(), ranks_before);
  for (const auto& p : pairs) {
    if (r.selected_ids.size() >= r.plan.budget) break;
    if (taken.insert(p.id).second) {
      r.selected_ids.push_back(p.id);
      ++r.topup_count;
    }
  }
}

}  // namespace

SelectionResult sample_random(const Corpus& pool, const SamplingPlan& plan) {
  auto r = start_result(pool, plan);
  auto ids = pool.ids();
  SplitMix64 rng(plan.seed);
  const auto take = partial_fisher_yates(std::span<std::string>(ids), plan.budget, rng);
  r.selected_ids.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(take));
  finish(r);
  return r;
}

SelectionResult sample_sss(const Corpus& pool, const CategoryIndex& index,
                           const SamplingPlan& plan) {
  auto r = start_result(pool, plan);
  for (const auto& e : pool) {
    if (!e.categories) throw MissingLabelError(e.id, "category");
  }
  SplitMix64 rng(plan.seed);
  std::unordered_set<std::string> taken;

  for (const auto& [cat, quota] : quota_split(plan.budget, plan.taxonomy)) {
    std::vector<std::string> available;
    for (const auto& id : index.members(cat)) {
      if (!taken.contains(id) && pool.find(id) != nullptr) available.push_back(id);
    }
    const auto take = partial_fisher_yates(std::span<std::string>(available), quota, rng);
    for (std::size_t i = 0; i < take; ++i) {
      taken.insert(available[i]);
      r.selected_ids.push_back(available[i]);
    }
    r.per_category_counts.emplace_back(cat, take);
  }

  if (r.selected_ids.size() < plan.budget) {
    std::vector<std::string> remaining;
    for (const auto& e : pool) {
      if (!taken.contains(e.id)) remaining.push_back(e.id);
    }
    const auto take = partial_fisher_yates(std::span<std::string>(remaining),
                                           plan.budget - r.selected_ids.size(), rng);
    for (std::size_t i = 0; i < take; ++i) r.selected_ids.push_back(remaining[i]);
    r.topup_count = take;
  }
  finish(r);
  return r;
}

SelectionResult sample_pss(const Corpus& pool, const CategoryIndex& index,
                           const EmbeddingStore& store, const SamplingPlan& plan,
                           const CategoryIndex* centroid_index) {
  auto r = start_result(pool, plan);
  const CategoryIndex& basis = centroid_index != nullptr ? *centroid_index : index;
  std::unordered_set<std::string> taken;
  std::vector<Scored> all_pairs;

  const auto quotas = quota_split(plan.budget, plan.taxonomy);
  for (std::size_t ci = 0; ci < quotas.size(); ++ci) {
    const auto& [cat, quota] = quotas[ci];
    std::vector<Scored> ranked;
    for (const auto& id : index.members(cat)) {
      if (pool.find(id) != nullptr) ranked.push_back({0.0, id, ci});
    }
    const auto& members = basis.members(cat);
    if (ranked.empty() || members.empty()) {
      r.per_category_counts.emplace_back(cat, 0);
      continue;
    }
    const Centroid c = centroid(store, members, cat);
    if (!(detail::ordered_norm(c.vector) > 0.0)) {
      r.skipped_categories.push_back(cat);
      r.per_category_counts.emplace_back(cat, 0);
      continue;
    }
    for (auto& s : ranked) s.score = score_against_centroid(store, s.id, c);
    std::sort(ranked.begin(), ranked.end(), ranks_before);
    r.tie_events += count_adjacent_ties(ranked);

    std::size_t got = 0;
    for (const auto& s : ranked) {
      if (got == quota) break;
      if (taken.insert(s.id).second) {
        r.selected_ids.push_back(s.id);
        ++got;
      }
    }
    r.per_category_counts.emplace_back(cat, got);
    all_pairs.insert(all_pairs.end(), ranked.begin(), ranked.end());
  }
  topup_ranked(r, std::move(all_pairs), taken);
  r.embedding_hash = store.content_hash();
  finish(r);
  return r;
}

SelectionResult sample_cossim(const Corpus& pool, const ReferenceSets& refsets,
                              const EmbeddingStore& store, const SamplingPlan& plan) {
  auto r = start_result(pool, plan);
  if (refsets.empty()) throw EmptyInputError("no reference sets available for cossim");

  const auto quotas = quota_split(plan.budget, plan.taxonomy);
  auto position = [&](const std::string& cat) {
    for (std::size_t i = 0; i < quotas.size(); ++i) {
      if (quotas[i].first == cat) return i;
    }
    return quotas.size();
  };

  std::vector<std::vector<Scored>> groups(quotas.size() + 1);
  for (const auto& e : pool) {
    const auto a = assign_category_cossim(store, e.id, refsets.sets);
    if (a.tie) ++r.tie_events;
    const auto ci = position(a.category);
    groups[ci].push_back({a.score, e.id, ci});
  }

  std::unordered_set<std::string> taken;
  std::vector<Scored> all_pairs;
  for (std::size_t ci = 0; ci <= quotas.size(); ++ci) {
    auto& ranked = groups[ci];
    std::sort(ranked.begin(), ranked.end(), ranks_before);
    r.tie_events += count_adjacent_ties(ranked);
    if (ci < quotas.size()) {
      const auto take = std::min(quotas[ci].second, ranked.size());
      for (std::size_t i = 0; i < take; ++i) {
        taken.insert(ranked[i].id);
        r.selected_ids.push_back(ranked[i].id);
      }
      r.per_category_counts.emplace_back(quotas[ci].first, take);
    }
    all_pairs.insert(all_pairs.end(), ranked.begin(), ranked.end());
  }
  topup_ranked(r, std::move(all_pairs), taken);
  r.embedding_hash = store.content_hash();
  finish(r);
  return r;
}

namespace {

const EmbeddingStore& require_store(const SamplingInputs& in, Method m) {
  if (in.store == nullptr) {
    throw ConfigError(std::string(to_string(m)) + " requires an embedding store");
  }
  return *in.store;
}

const ReferenceSets& require_refsets(const SamplingInputs& in, Method m) {
  if (in.refsets == nullptr) {
    throw ConfigError(std::string(to_string(m)) + " requires reference sets");
  }
  return *in.refsets;
}

SelectionResult run_base(const Corpus& candidates, const SamplingInputs& in,
                         const SamplingPlan& plan, const CategoryIndex* centroid_index) {
  switch (base_method(plan.method)) {
    case Method::random:
      return sample_random(candidates, plan);
    case Method::sss:
      return sample_sss(candidates, CategoryIndex::build(candidates, plan.taxonomy), plan);
    case Method::pss: {
      const auto& store = require_store(in, plan.method);
      store.require_coverage(candidates.ids());
      return sample_pss(candidates, CategoryIndex::build(candidates, plan.taxonomy), store, plan,
                        centroid_index);
    }
    case Method::cossim: {
      const auto& store = require_store(in, plan.method);
      store.require_coverage(candidates.ids());
      return sample_cossim(candidates, require_refsets(in, plan.method), store, plan);
    }
    default:
      break;
  }
  throw ConfigError("unsupported method");
}

}  // namespace

SelectionResult sample_behavioral(const SamplingInputs& inputs, const SamplingPlan& plan) {
  if (inputs.pool == nullptr) throw ConfigError("no candidate pool");
  if (!is_behavioral(plan.method)) {
    throw ConfigError(std::string(to_string(plan.method)) + " is not a behavioural method");
  }
  plan.validate();
  const Corpus& pool = *inputs.pool;
  const Corpus t1 = filter_behavior(pool, BehaviorType::T1);
  if (t1.empty()) throw EmptyInputError("no T1 examples in the candidate pool");

  std::optional<CategoryIndex> full;
  if (base_method(plan.method) == Method::pss &&
      plan.centroid_basis == CentroidBasis::full_partition) {
    full = CategoryIndex::build(pool, plan.taxonomy);
  }
  auto r = run_base(t1, inputs, plan, full ? &*full : nullptr);
  r.pool_hash = pool.content_hash();
  return r;
}

SelectionResult select(const SamplingInputs& inputs, const SamplingPlan& plan) {
  if (inputs.pool == nullptr) throw ConfigError("no candidate pool");
  return is_behavioral(plan.method) ? sample_behavioral(inputs, plan)
                                    : run_base(*inputs.pool, inputs, plan, nullptr);
}

ordered_json SelectionResult::manifest() const {
  ordered_json j;
  j["tool"] = "safesample";
  j["version"] = SAFESAMPLE_VERSION;
  j["method"] = std::string(to_string(plan.method));
  j["budget"] = plan.budget;
  j["seed"] = is_deterministic(plan.method) ? ordered_json() : ordered_json(plan.seed);
  j["behavior_filter"] =
      plan.behavior_filter ? ordered_json(std::string(to_string(*plan.behavior_filter)))
                           : ordered_json();
  if (base_method(plan.method) == Method::pss && is_behavioral(plan.method)) {
    j["centroid_basis"] =
        plan.centroid_basis == CentroidBasis::full_partition ? "full_partition" : "t1_only";
  }
  j["taxonomy"] = plan.taxonomy;
  j["pool_hash"] = pool_hash;
  j["embedding_hash"] = embedding_hash.empty() ? ordered_json() : ordered_json(embedding_hash);
  j["selected_count"] = selected_ids.size();
  j["shortfall"] = shortfall;
  ordered_json counts = ordered_json::object();
  for (const auto& [cat, n] : per_category_counts) counts[cat] = n;
  j["per_category_counts"] = counts;
  j["topup_count"] = topup_count;
  j["tie_events"] = tie_events;
  j["skipped_categories"] = skipped_categories;
  j["rules"] = {
      {"quota", "floor(n/|C|) each; first n mod |C| categories in taxonomy order get +1"},
      {"redistribution", "single global top-up pass over unselected candidates"},
      {"tie_break", "score descending, id ascending"},
      {"prng", "splitmix64, rejection-bounded, partial Fisher-Yates over id order"},
      {"embedding_text", "instruction + \"\\n\\n\" + response"}};
  j["selected_ids"] = selected_ids;
  return j;
}

std::string SelectionResult::manifest_json() const { return manifest().dump(2) + "\n"; }

AugmentResult augment(const Corpus& base, const SelectionResult& selection,
                      const Corpus& safety_pool, const AugmentOptions& options) {
  AugmentResult out;
  out.base_count = base.size();
  std::vector<SafetyExample> examples(base.examples());
  std::set<std::string, std::less<>> used;
  for (const auto& e : base) used.insert(e.id);

  for (const auto& id : selection.selected_ids) {
    const SafetyExample* src = safety_pool.find(id);
    if (src == nullptr) {
      throw PreconditionError("selected id '" + id + "' is not in the safety pool");
    }
    SafetyExample e = *src;
    if (used.contains(e.id)) {
      if (!options.prefix_on_collision) throw DuplicateIdError(e.id);
      std::string renamed = e.source + ":" + e.id;
      if (used.contains(renamed)) throw DuplicateIdError(renamed);
      out.renamed.emplace_back(e.id, renamed);
      e.id = std::move(renamed);
    }
    used.insert(e.id);
    examples.push_back(std::move(e));
    ++out.added;
  }
  auto taxonomy = base.taxonomy().empty() ? safety_pool.taxonomy() : base.taxonomy();
  out.corpus = Corpus(std::move(examples), std::move(taxonomy));
  out.ratio = out.base_count == 0 ? 0.0
                                  : static_cast<double>(out.added) /
                                        static_cast<double>(out.base_count);
  return out;
}

ordered_json AugmentResult::manifest() const {
  ordered_json j;
  j["base_count"] = base_count;
  j["added"] = added;
  j["total"] = corpus.size();
  j["ratio"] = ratio;
  j["ratio_percent"] = 100.0 * ratio;
  ordered_json ren = ordered_json::array();
  for (const auto& [from, to] : renamed) ren.push_back({{"from", from}, {"to", to}});
  j["renamed"] = ren;
  j["content_hash"] = corpus.content_hash();
  return j;
}

}  // namespace safesample

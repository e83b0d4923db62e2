#pragma once

#include <cstddef>
#include <filesystem>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "safesample/classifier_client.hpp"
#include "safesample/corpus.hpp"
#include "safesample/embed_store.hpp"

namespace safesample {

// ---------------------------------------------------------------------------
// Reference sets and embedding-based category assignment

/// External examples carrying exactly one category label, used to define
/// that category in embedding space.
struct ReferenceSet {
  std::string category;
  std::vector<std::string> member_ids;  // ascending
  bool exclusivity_checked = false;
};

struct ReferenceSets {
  /// In taxonomy order; categories without exclusive members are absent.
  std::vector<ReferenceSet> sets;
  std::vector<std::string> omitted;
  std::size_t multi_label_skipped = 0;
  std::size_t unlabeled_skipped = 0;

  const ReferenceSet* find(std::string_view category) const;
  bool empty() const noexcept { return sets.empty(); }
};

/// For each taxonomy category, members are the examples whose category set
/// is exactly {category}. Never throws; omissions are reported.
ReferenceSets build_reference_sets(const Corpus& ref_corpus,
                                   const std::vector<std::string>& taxonomy);

struct CossimAssignment {
  std::string category;
  double score = 0.0;
  /// Another category reached a bit-equal score; the earlier one in
  /// taxonomy order won.
  bool tie = false;
};

/// Argmax over reference sets of the mean-cosine score. Ties go to the set
/// listed first.
CossimAssignment assign_category_cossim(const EmbeddingStore& store, std::string_view candidate_id,
                                        std::span<const ReferenceSet> refsets);

// ---------------------------------------------------------------------------
// Durable cache for client results

/// Append-only JSON-lines cache keyed by content_key(). Duplicate keys in
/// the file resolve last-write-wins. An empty path keeps it in memory only.
class AnnotationCache {
 public:
  AnnotationCache() = default;
  explicit AnnotationCache(std::filesystem::path path);

  std::optional<nlohmann::json> get(const std::string& key) const;
  void put(const std::string& key, TaskKind task, const nlohmann::json& result);

  std::size_t size() const;
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
  std::unordered_map<std::string, nlohmann::json> entries_;
  mutable std::mutex mutex_;
};

// ---------------------------------------------------------------------------
// Prompt templates

/// Text with `{{taxonomy}}`, `{{instruction}}` and `{{response}}`
/// placeholders.
class PromptTemplate {
 public:
  PromptTemplate() = default;
  explicit PromptTemplate(std::string text);
  static PromptTemplate load(const std::filesystem::path& path);

  /// Throws PreconditionError if any of `placeholders` is absent.
  void require(std::initializer_list<std::string_view> placeholders) const;
  std::string render(const std::vector<std::string>& taxonomy, std::string_view instruction,
                     std::string_view response) const;

  const std::string& text() const noexcept { return text_; }
  std::string hash() const;
  bool empty() const noexcept { return text_.empty(); }

 private:
  std::string text_;
};

// ---------------------------------------------------------------------------
// Labelling pipelines

struct AnnotateOptions {
  /// Rounds of re-asking for items whose answers fail validation.
  int max_attempts = 3;
  /// 0 = use the client's max_batch().
  std::size_t batch_size = 0;
  /// Re-label examples that already carry the label.
  bool overwrite = false;
};

struct AnnotationReport {
  std::string task;
  std::size_t requested = 0;
  std::size_t cache_hits = 0;
  std::size_t client_calls = 0;
  std::size_t labeled = 0;
  std::vector<std::string> failures;
  std::size_t tie_events = 0;
  TokenUsage usage;
  std::string template_hash;

  nlohmann::ordered_json to_json() const;
};

struct AnnotationOutcome {
  Corpus corpus;
  AnnotationReport report;
};

/// Fills `categories` from the client. Answers may be a JSON array or a
/// comma-separated string; every name must belong to the corpus taxonomy.
/// Items that never validate are left unlabelled and listed as failures.
AnnotationOutcome label_categories_llm(const Corpus& c, ClassifierClient& client,
                                       AnnotationCache& cache, const PromptTemplate& prompt,
                                       const AnnotateOptions& options = {});

/// Fills `behavior` from the client's (harmful, refusal) answer.
AnnotationOutcome label_behavior(const Corpus& c, ClassifierClient& client, AnnotationCache& cache,
                                 const AnnotateOptions& options = {});

/// Replaces each response with the client's refusal rewrite. Every input
/// example must have is_safe == false.
AnnotationOutcome rewrite_to_refusal(const Corpus& c, ClassifierClient& client,
                                     AnnotationCache& cache, const PromptTemplate& prompt,
                                     const AnnotateOptions& options = {});

inline constexpr std::string_view kAugmentedSourceSuffix = "+augmented-t1";

/// Sets every example's categories to its single Cossim argmax category.
AnnotationOutcome assign_categories_cossim(const Corpus& c, const EmbeddingStore& store,
                                           const ReferenceSets& refsets);

}  // namespace safesample

#pragma once

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "safesample/error.hpp"

namespace safesample {

/// Dimension of the default sentence-embedding model. Informational only:
/// the store accepts any uniform dimension.
inline constexpr Eigen::Index kDefaultEmbeddingDim = 768;

/// Text handed to the embedding provider for an instruction/response pair.
inline constexpr std::string_view kPairJoiner = "\n\n";
std::string embedding_text(std::string_view instruction, std::string_view response);

namespace detail {

/// Sequential left-to-right inner product. Used instead of `a.dot(b)` so
/// that results do not depend on the SIMD width Eigen was compiled for.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar ordered_dot(const Eigen::MatrixBase<DerivedA>& a,
                                      const Eigen::MatrixBase<DerivedB>& b) {
  typename DerivedA::Scalar acc(0);
  for (Eigen::Index i = 0; i < a.size(); ++i) acc += a.coeff(i) * b.coeff(i);
  return acc;
}

template <typename Derived>
typename Derived::Scalar ordered_norm(const Eigen::MatrixBase<Derived>& a) {
  using std::sqrt;
  return sqrt(ordered_dot(a, a));
}

}  // namespace detail

/// Cosine similarity dot(a,b) / (|a| * |b|), clamped to [-1, 1].
///
/// Both norms are taken with the same sequential accumulation as the dot
/// product; the result is exactly symmetric in its arguments. Negative zero
/// is folded to +0 so that comparisons form a total order on results.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar cosine(const Eigen::MatrixBase<DerivedA>& a,
                                 const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  if (a.size() != b.size()) {
    throw DimensionMismatchError("cosine: dimension " + std::to_string(a.size()) + " vs " +
                                 std::to_string(b.size()));
  }
  const Scalar na = detail::ordered_norm(a);
  const Scalar nb = detail::ordered_norm(b);
  if (!(na > Scalar(0)) || !(nb > Scalar(0))) throw ZeroNormError("cosine: zero-norm input");
  Scalar c = detail::ordered_dot(a, b) / (na * nb);
  if (c > Scalar(1)) c = Scalar(1);
  if (c < Scalar(-1)) c = Scalar(-1);
  return c + Scalar(0);
}

struct EmbeddingVector {
  std::string id;
  std::string model_tag;
  Eigen::VectorXd values;

  Eigen::Index dim() const noexcept { return values.size(); }
};

double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

struct Centroid {
  std::string category;
  Eigen::VectorXd vector;
  std::size_t member_count = 0;
  /// SHA-256 over the canonical (sorted) member ids.
  std::string member_hash;
};

/// Embeddings for a set of examples, one column per id.
///
/// Vectors are validated at ingest (finite, non-zero, uniform dimension and
/// model tag) and widened to double. Immutable once built, so concurrent
/// readers are safe.
class EmbeddingStore {
 public:
  EmbeddingStore() = default;
  EmbeddingStore(Eigen::Index dim, std::string model_tag);

  /// Throws DimensionMismatchError, ZeroNormError, DataError (non-finite or
  /// model mismatch) or DuplicateIdError.
  void add(std::string id, const Eigen::Ref<const Eigen::VectorXd>& values,
           std::string_view model_tag = {});
  void add(const EmbeddingVector& v) { add(v.id, v.values, v.model_tag); }
  /// Appends every vector of `other`; dimension and model must agree.
  void merge(const EmbeddingStore& other);

  Eigen::Index dim() const noexcept { return dim_; }
  const std::string& model_tag() const noexcept { return model_tag_; }
  std::size_t size() const noexcept { return ids_.size(); }
  bool contains(std::string_view id) const;

  /// Column view of the vector for `id`; throws MissingEmbeddingError.
  Eigen::Ref<const Eigen::VectorXd> vector(std::string_view id) const;
  EmbeddingVector get(std::string_view id) const;

  /// Ids without an embedding, in the order given.
  std::vector<std::string> missing(std::span<const std::string> ids) const;
  /// Throws MissingEmbeddingError naming the first uncovered id.
  void require_coverage(std::span<const std::string> ids) const;

  /// SHA-256 over model tag, dimension and every (id, vector) pair in id
  /// order, values rendered with round-trip precision. Computed once and
  /// cached until the next add().
  std::string content_hash() const;

  const std::vector<std::string>& ids() const noexcept { return ids_; }

 private:
  Eigen::Index dim_ = 0;
  std::string model_tag_;
  std::vector<std::string> ids_;
  std::unordered_map<std::string, Eigen::Index> column_;
  Eigen::MatrixXd data_;
  Eigen::Index cols_used_ = 0;
  struct HashCache {
    std::mutex mutex;
    std::optional<std::string> value;
  };
  std::shared_ptr<HashCache> hash_cache_ = std::make_shared<HashCache>();
};

struct EmbeddingLoadOptions {
  /// When non-zero, vectors of any other dimension are rejected.
  Eigen::Index expected_dim = 0;
};

/// Reads `{"id","model","dim","vector"}` JSON lines.
EmbeddingStore load_embeddings(const std::filesystem::path& path,
                               const EmbeddingLoadOptions& options = {});
EmbeddingStore parse_embeddings(std::string_view text, const EmbeddingLoadOptions& options = {},
                                const std::string& origin = "<memory>");
void write_embeddings(const std::filesystem::path& path, const EmbeddingStore& store);

/// Component-wise mean of the members' embeddings, summed in ascending id
/// order regardless of the order `members` is given in. Duplicate ids are
/// counted once.
Centroid centroid(const EmbeddingStore& store, std::span<const std::string> members,
                  std::string category = {});

/// Cosine between a candidate embedding and a centroid.
double score_against_centroid(const EmbeddingStore& store, std::string_view candidate_id,
                              const Centroid& c);

/// Mean cosine between a candidate and each reference embedding,
/// accumulated in ascending reference-id order.
double score_against_reference_set(const EmbeddingStore& store, std::string_view candidate_id,
                                   std::span<const std::string> refs);

}  // namespace safesample

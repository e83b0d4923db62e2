#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "safesample/annotate.hpp"
#include "safesample/corpus.hpp"
#include "safesample/embed_store.hpp"
#include "safesample/sampler.hpp"

namespace safesample::testkit {

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

void write_text(const std::filesystem::path& p, const std::string& text);
std::string read_text(const std::filesystem::path& p);

std::vector<std::string> taxonomy_of_size(std::size_t n);

/// Random-instance generator for property tests.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  std::size_t uniform(std::size_t lo, std::size_t hi);  // inclusive
  bool coin(double p = 0.5);
  std::mt19937_64& engine() { return rng_; }

  /// Small-integer vector with at least one non-zero component. Integer
  /// components make exact duplicates (and so bit-equal scores) common.
  Eigen::VectorXd int_vector(Eigen::Index dim, int range = 3);
  Eigen::VectorXd real_vector(Eigen::Index dim);

 private:
  std::mt19937_64 rng_;
};

SafetyExample make_example(std::string id, std::vector<std::string> categories,
                           std::optional<BehaviorType> behavior = BehaviorType::T1,
                           std::optional<bool> is_safe = std::nullopt);

/// A complete sampling problem: labelled pool, reference corpus and one
/// store covering both.
struct Instance {
  std::vector<std::string> taxonomy;
  Corpus pool;
  Corpus reference;
  EmbeddingStore store;
  ReferenceSets refsets;
  std::size_t budget = 0;
};

struct InstanceShape {
  std::size_t max_categories = 4;
  std::size_t max_candidates = 24;
  Eigen::Index max_dim = 8;
  /// Chance that a vector copies an earlier one exactly.
  double duplicate_rate = 0.25;
  double multi_label_rate = 0.3;
};

Instance random_instance(Gen& g, const InstanceShape& shape = {});

/// `per_category` disjoint members for each category, behaviour T1.
Corpus disjoint_pool(const std::vector<std::string>& taxonomy, std::size_t per_category);

/// On-disk inputs for the command-line pipeline.
struct WorkspaceShape {
  std::size_t pool_size = 60;
  std::size_t categories = 3;
  Eigen::Index dim = 8;
  std::size_t base_size = 20;
  std::size_t refs_per_category = 3;
  /// Write behaviour and category labels into the pool file.
  bool labelled = true;
  std::uint64_t seed = 1;
};

struct Workspace {
  std::filesystem::path dir;
  std::vector<std::string> taxonomy;
  std::filesystem::path pool;
  std::filesystem::path base;
  std::filesystem::path reference;
  std::filesystem::path embeddings;
  /// Starting config; callers add keys and write it with write_config().
  nlohmann::json config;

  std::filesystem::path write_config(const nlohmann::json& cfg, const std::string& name) const;
};

/// Embeddings cluster around one random direction per category.
Workspace make_workspace(const std::filesystem::path& dir, const WorkspaceShape& shape = {});

/// Runs the command-line entry point with the given arguments.
struct RunOutput {
  int code = 0;
  std::string out;
  std::string err;
};
RunOutput run_cli(std::vector<std::string> args);

}  // namespace safesample::testkit

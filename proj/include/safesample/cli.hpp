#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "safesample/classifier_client.hpp"
#include "safesample/sampler.hpp"

namespace safesample::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,
  kExitConfig = 2,
  kExitData = 3,
  kExitClient = 4,
};

struct VerdictSource {
  std::filesystem::path path;
  Method method = Method::random;
  std::size_t budget = 0;
  std::uint64_t seed = 0;
};

/// Fully resolved settings for one command. Built from the JSON config file
/// with command-line flags layered on top; relative paths in the file are
/// resolved against the file's directory.
struct RunConfig {
  std::optional<std::filesystem::path> safety_pool;
  std::optional<std::filesystem::path> base_dataset;
  std::optional<std::filesystem::path> reference_corpus;
  std::vector<std::filesystem::path> embeddings;
  std::optional<std::filesystem::path> cache;

  std::vector<std::string> taxonomy;
  std::optional<std::filesystem::path> taxonomy_file;

  std::vector<Method> methods;
  std::vector<std::size_t> budgets;
  std::uint64_t seed = 0;
  std::size_t trials = 1;
  /// Map every base method onto its T1-restricted variant.
  bool behavior_filter = false;
  CentroidBasis centroid_basis = CentroidBasis::full_partition;
  bool prefix_on_collision = true;

  bool strict = false;
  std::filesystem::path out = "out";

  // Labelling.
  std::vector<std::string> label_tasks;  // behavior, categories, cossim, rewrite
  std::optional<std::filesystem::path> label_input;
  std::optional<std::filesystem::path> rewrite_input;
  std::optional<std::filesystem::path> categories_template;
  std::optional<std::filesystem::path> rewrite_template;
  std::string client = "http";  // http | mock | replay
  std::optional<std::filesystem::path> transcript;
  std::string endpoint_env = "SAFESAMPLE_ENDPOINT";
  std::string token_env;
  int max_attempts = 3;
  std::size_t batch_size = 0;
  std::size_t timeout_seconds = 60;

  std::vector<VerdictSource> verdicts;

  /// Secrets never appear here: only the names of environment variables.
  nlohmann::ordered_json to_json() const;
};

/// Flags given on the command line; set fields override the config file.
struct Overrides {
  std::optional<std::filesystem::path> config;
  std::optional<std::string> method;
  std::optional<std::size_t> budget;
  std::optional<std::string> budgets;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  bool strict = false;
  std::optional<std::filesystem::path> out;
  std::optional<std::string> endpoint_env;
  std::optional<std::filesystem::path> cache;
  std::optional<std::string> client;
  std::optional<std::string> tasks;
};

/// Parses a JSON config document. Throws ConfigError.
RunConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);
RunConfig load_config(const std::filesystem::path& path);
RunConfig resolve_config(const Overrides& flags);

std::vector<Method> parse_method_list(const std::string& text);
std::vector<std::size_t> parse_budget_list(const std::string& text);

struct CommandContext {
  RunConfig config;
  std::ostream* log = nullptr;
  /// Used instead of building a client from the config when set.
  ClassifierClient* client = nullptr;
};

int cmd_validate(CommandContext& ctx);
int cmd_label(CommandContext& ctx);
int cmd_sample(CommandContext& ctx);
int cmd_metrics(CommandContext& ctx);

/// Entry point shared by the executable and the tests. Maps exceptions onto
/// ExitCode values.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace safesample::cli

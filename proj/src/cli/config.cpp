#include <fstream>
#include <set>
#include <sstream>

#include "safesample/cli.hpp"
#include "safesample/error.hpp"

namespace safesample::cli {

using nlohmann::json;
using nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

const std::set<std::string> kTopLevelKeys = {
    "safety_pool", "base_dataset", "reference_corpus", "embeddings",   "cache",
    "taxonomy",    "method",       "methods",          "budget",       "budgets",
    "seed",        "trials",       "behavior_filter",  "pss_b_centroids",
    "prefix_on_collision",         "strict",           "out",          "label",
    "endpoint_env", "token_env",   "verdicts"};

const std::set<std::string> kLabelKeys = {"tasks",          "input",     "rewrite_input",
                                          "categories_template",     "rewrite_template",
                                          "client",         "transcript", "max_attempts",
                                          "batch_size",     "timeout_seconds"};

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

template <typename T>
T get_as(const json& j, const char* key) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config key \"") + key + "\" has the wrong type");
  }
}

std::vector<std::string> read_taxonomy_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open taxonomy file " + path.string());
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos || line[b] == '#') continue;
    const auto e = line.find_last_not_of(" \t\r");
    out.push_back(line.substr(b, e - b + 1));
  }
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

std::vector<std::string> split_commas(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

std::vector<Method> parse_method_list(const std::string& text) {
  std::vector<Method> out;
  for (const auto& name : split_commas(text)) {
    if (name == "all") {
      out.assign(kTableMethodOrder.begin(), kTableMethodOrder.end());
      continue;
    }
    auto m = parse_method(name);
    if (!m) throw ConfigError("unknown method \"" + name + "\"");
    out.push_back(*m);
  }
  if (out.empty()) throw ConfigError("empty method list");
  return out;
}

std::vector<std::size_t> parse_budget_list(const std::string& text) {
  std::vector<std::size_t> out;
  for (const auto& item : split_commas(text)) {
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(item, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != item.size() || v == 0 || item.front() == '-') {
      throw ConfigError("budget \"" + item + "\" is not a positive integer");
    }
    out.push_back(static_cast<std::size_t>(v));
  }
  if (out.empty()) throw ConfigError("empty budget list");
  return out;
}

RunConfig parse_config(const json& doc, const fs::path& base_dir) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, _] : doc.items()) {
    if (!kTopLevelKeys.contains(key)) throw ConfigError("unknown config key \"" + key + "\"");
  }
  RunConfig c;
  auto path_of = [&](const char* key) -> std::optional<fs::path> {
    auto it = doc.find(key);
    if (it == doc.end() || it->is_null()) return std::nullopt;
    return resolve(base_dir, get_as<std::string>(*it, key));
  };
  c.safety_pool = path_of("safety_pool");
  c.base_dataset = path_of("base_dataset");
  c.reference_corpus = path_of("reference_corpus");
  c.cache = path_of("cache");
  if (auto out = path_of("out")) c.out = *out;

  if (auto it = doc.find("embeddings"); it != doc.end()) {
    if (it->is_string()) {
      c.embeddings.push_back(resolve(base_dir, it->get<std::string>()));
    } else {
      for (const auto& p : get_as<std::vector<std::string>>(*it, "embeddings")) {
        c.embeddings.push_back(resolve(base_dir, p));
      }
    }
  }
  if (auto it = doc.find("taxonomy"); it != doc.end()) {
    if (it->is_string()) {
      c.taxonomy_file = resolve(base_dir, it->get<std::string>());
      c.taxonomy = read_taxonomy_file(*c.taxonomy_file);
    } else {
      c.taxonomy = get_as<std::vector<std::string>>(*it, "taxonomy");
    }
  }
  if (auto it = doc.find("method"); it != doc.end()) {
    c.methods = parse_method_list(get_as<std::string>(*it, "method"));
  }
  if (auto it = doc.find("methods"); it != doc.end()) {
    if (it->is_string()) {
      c.methods = parse_method_list(it->get<std::string>());
    } else {
      std::string joined;
      for (const auto& m : get_as<std::vector<std::string>>(*it, "methods")) joined += m + ",";
      c.methods = parse_method_list(joined);
    }
  }
  if (auto it = doc.find("budget"); it != doc.end()) {
    c.budgets = {get_as<std::size_t>(*it, "budget")};
  }
  if (auto it = doc.find("budgets"); it != doc.end()) {
    c.budgets = get_as<std::vector<std::size_t>>(*it, "budgets");
  }
  for (auto b : c.budgets) {
    if (b == 0) throw ConfigError("budgets must be positive");
  }
  if (auto it = doc.find("seed"); it != doc.end()) c.seed = get_as<std::uint64_t>(*it, "seed");
  if (auto it = doc.find("trials"); it != doc.end()) c.trials = get_as<std::size_t>(*it, "trials");
  if (auto it = doc.find("behavior_filter"); it != doc.end()) {
    c.behavior_filter = get_as<bool>(*it, "behavior_filter");
  }
  if (auto it = doc.find("pss_b_centroids"); it != doc.end()) {
    const auto v = get_as<std::string>(*it, "pss_b_centroids");
    if (v == "full_partition") {
      c.centroid_basis = CentroidBasis::full_partition;
    } else if (v == "t1_only") {
      c.centroid_basis = CentroidBasis::t1_only;
    } else {
      throw ConfigError("pss_b_centroids must be \"full_partition\" or \"t1_only\"");
    }
  }
  if (auto it = doc.find("prefix_on_collision"); it != doc.end()) {
    c.prefix_on_collision = get_as<bool>(*it, "prefix_on_collision");
  }
  if (auto it = doc.find("strict"); it != doc.end()) c.strict = get_as<bool>(*it, "strict");
  if (auto it = doc.find("endpoint_env"); it != doc.end()) {
    c.endpoint_env = get_as<std::string>(*it, "endpoint_env");
  }
  if (auto it = doc.find("token_env"); it != doc.end()) {
    c.token_env = get_as<std::string>(*it, "token_env");
  }

  if (auto it = doc.find("label"); it != doc.end()) {
    const auto& l = *it;
    if (!l.is_object()) throw ConfigError("\"label\" must be an object");
    for (const auto& [key, _] : l.items()) {
      if (!kLabelKeys.contains(key)) throw ConfigError("unknown label key \"" + key + "\"");
    }
    auto lpath = [&](const char* key) -> std::optional<fs::path> {
      auto f = l.find(key);
      if (f == l.end() || f->is_null()) return std::nullopt;
      return resolve(base_dir, get_as<std::string>(*f, key));
    };
    if (auto f = l.find("tasks"); f != l.end()) {
      c.label_tasks = get_as<std::vector<std::string>>(*f, "tasks");
    }
    c.label_input = lpath("input");
    c.rewrite_input = lpath("rewrite_input");
    c.categories_template = lpath("categories_template");
    c.rewrite_template = lpath("rewrite_template");
    c.transcript = lpath("transcript");
    if (auto f = l.find("client"); f != l.end()) c.client = get_as<std::string>(*f, "client");
    if (auto f = l.find("max_attempts"); f != l.end()) {
      c.max_attempts = get_as<int>(*f, "max_attempts");
    }
    if (auto f = l.find("batch_size"); f != l.end()) {
      c.batch_size = get_as<std::size_t>(*f, "batch_size");
    }
    if (auto f = l.find("timeout_seconds"); f != l.end()) {
      c.timeout_seconds = get_as<std::size_t>(*f, "timeout_seconds");
    }
  }

  if (auto it = doc.find("verdicts"); it != doc.end()) {
    if (!it->is_array()) throw ConfigError("\"verdicts\" must be an array");
    for (const auto& v : *it) {
      if (!v.is_object() || !v.contains("path") || !v.contains("method") || !v.contains("budget")) {
        throw ConfigError("each verdict entry needs \"path\", \"method\" and \"budget\"");
      }
      VerdictSource s;
      s.path = resolve(base_dir, get_as<std::string>(v["path"], "verdicts.path"));
      auto m = parse_method(get_as<std::string>(v["method"], "verdicts.method"));
      if (!m) throw ConfigError("unknown method in verdict entry: " + v["method"].dump());
      s.method = *m;
      s.budget = get_as<std::size_t>(v["budget"], "verdicts.budget");
      if (v.contains("seed")) s.seed = get_as<std::uint64_t>(v["seed"], "verdicts.seed");
      c.verdicts.push_back(std::move(s));
    }
  }
  return c;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& ex) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + ex.what());
  }
  return parse_config(doc, path.parent_path());
}

RunConfig resolve_config(const Overrides& flags) {
  RunConfig c = flags.config ? load_config(*flags.config) : RunConfig{};
  if (flags.method) c.methods = parse_method_list(*flags.method);
  if (flags.budget) {
    if (*flags.budget == 0) throw ConfigError("budget must be positive");
    c.budgets = {*flags.budget};
  }
  if (flags.budgets) c.budgets = parse_budget_list(*flags.budgets);
  if (flags.seed) c.seed = *flags.seed;
  if (flags.trials) c.trials = *flags.trials;
  if (flags.strict) c.strict = true;
  if (flags.out) c.out = *flags.out;
  if (flags.endpoint_env) c.endpoint_env = *flags.endpoint_env;
  if (flags.cache) c.cache = *flags.cache;
  if (flags.client) c.client = *flags.client;
  if (flags.tasks) c.label_tasks = split_commas(*flags.tasks);
  if (c.trials == 0) throw ConfigError("trials must be at least 1");
  return c;
}

ordered_json RunConfig::to_json() const {
  auto opt = [](const std::optional<fs::path>& p) {
    return p ? ordered_json(p->generic_string()) : ordered_json();
  };
  ordered_json j;
  j["safety_pool"] = opt(safety_pool);
  j["base_dataset"] = opt(base_dataset);
  j["reference_corpus"] = opt(reference_corpus);
  ordered_json emb = ordered_json::array();
  for (const auto& p : embeddings) emb.push_back(p.generic_string());
  j["embeddings"] = emb;
  j["cache"] = opt(cache);
  j["taxonomy"] = taxonomy;
  j["taxonomy_file"] = opt(taxonomy_file);
  ordered_json ms = ordered_json::array();
  for (auto m : methods) ms.push_back(std::string(to_string(m)));
  j["methods"] = ms;
  j["budgets"] = budgets;
  j["seed"] = seed;
  j["trials"] = trials;
  j["behavior_filter"] = behavior_filter;
  j["pss_b_centroids"] =
      centroid_basis == CentroidBasis::full_partition ? "full_partition" : "t1_only";
  j["prefix_on_collision"] = prefix_on_collision;
  j["strict"] = strict;
  j["out"] = out.generic_string();
  j["label"] = {{"tasks", label_tasks},
                {"input", opt(label_input)},
                {"rewrite_input", opt(rewrite_input)},
                {"categories_template", opt(categories_template)},
                {"rewrite_template", opt(rewrite_template)},
                {"client", client},
                {"transcript", opt(transcript)},
                {"max_attempts", max_attempts},
                {"batch_size", batch_size},
                {"timeout_seconds", timeout_seconds}};
  j["endpoint_env"] = endpoint_env;
  j["token_env"] = token_env;
  ordered_json vs = ordered_json::array();
  for (const auto& v : verdicts) {
    vs.push_back({{"path", v.path.generic_string()},
                  {"method", std::string(to_string(v.method))},
                  {"budget", v.budget},
                  {"seed", v.seed}});
  }
  j["verdicts"] = vs;
  return j;
}

}  // namespace safesample::cli

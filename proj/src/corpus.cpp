#include "safesample/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "safesample/error.hpp"
#include "safesample/hash.hpp"

namespace safesample {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char ch) { return std::isspace(ch) != 0; });
}

const std::set<std::string, std::less<>> kKnownKeys = {
    "id", "instruction", "response", "behavior", "categories", "is_safe", "source"};

void validate_example(const SafetyExample& e) {
  if (e.id.empty()) throw DataError("example with empty id");
  if (blank(e.instruction)) throw DataError("example '" + e.id + "' has an empty instruction");
  if (blank(e.response)) throw DataError("example '" + e.id + "' has an empty response");
  if (e.categories && e.categories->empty()) {
    throw DataError("example '" + e.id + "' has an empty category list");
  }
}

std::string require_string(const json& obj, const char* key, const std::string& where,
                           std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) {
    throw ParseError(where, line, std::string("missing or non-string \"") + key + "\"");
  }
  return it->get<std::string>();
}

}  // namespace

std::string_view to_string(BehaviorType t) noexcept {
  switch (t) {
    case BehaviorType::T1: return "T1";
    case BehaviorType::T2: return "T2";
    case BehaviorType::T3: return "T3";
    case BehaviorType::T4: return "T4";
  }
  return "?";
}

std::optional<BehaviorType> parse_behavior(std::string_view s) noexcept {
  for (auto t : kAllBehaviors) {
    if (to_string(t) == s) return t;
  }
  return std::nullopt;
}

bool SafetyExample::has_category(std::string_view name) const {
  return categories && std::binary_search(categories->begin(), categories->end(), name);
}

std::string_view default_source(DatasetKind kind) noexcept {
  switch (kind) {
    case DatasetKind::base: return "base";
    case DatasetKind::safety_pool: return "safety-pool";
    case DatasetKind::reference: return "reference";
  }
  return "";
}

Corpus::Corpus(std::vector<SafetyExample> examples, std::vector<std::string> taxonomy,
               std::filesystem::path path)
    : examples_(std::move(examples)), taxonomy_(std::move(taxonomy)) {
  for (auto& e : examples_) {
    validate_example(e);
    if (e.categories) {
      auto& cats = *e.categories;
      std::sort(cats.begin(), cats.end());
      cats.erase(std::unique(cats.begin(), cats.end()), cats.end());
    }
  }
  std::sort(examples_.begin(), examples_.end(),
            [](const SafetyExample& a, const SafetyExample& b) { return a.id < b.id; });
  auto dup = std::adjacent_find(
      examples_.begin(), examples_.end(),
      [](const SafetyExample& a, const SafetyExample& b) { return a.id == b.id; });
  if (dup != examples_.end()) throw DuplicateIdError(dup->id);

  Sha256 h;
  h.field("taxonomy");
  for (const auto& name : taxonomy_) h.field(name);
  h.field("examples");
  for (const auto& e : examples_) h.field(serialize_example(e));
  provenance_ = Provenance{std::move(path), h.hex_digest()};
}

const SafetyExample* Corpus::find(std::string_view id) const {
  auto it = std::lower_bound(examples_.begin(), examples_.end(), id,
                             [](const SafetyExample& e, std::string_view v) { return e.id < v; });
  if (it == examples_.end() || it->id != id) return nullptr;
  return &*it;
}

const SafetyExample& Corpus::at(std::string_view id) const {
  if (const auto* e = find(id)) return *e;
  throw DataError("unknown example id '" + std::string(id) + "'");
}

std::vector<std::string> Corpus::ids() const {
  std::vector<std::string> out;
  out.reserve(examples_.size());
  for (const auto& e : examples_) out.push_back(e.id);
  return out;
}

Corpus parse_corpus(std::string_view text, const LoadOptions& options, const std::string& origin) {
  std::set<std::string, std::less<>> taxonomy(options.taxonomy.begin(), options.taxonomy.end());
  std::vector<SafetyExample> examples;
  std::set<std::string, std::less<>> seen;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (blank(line)) {
      if (nl == text.size()) break;
      continue;
    }

    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception& ex) {
      throw ParseError(origin, line_no, std::string("malformed JSON: ") + ex.what());
    }
    if (!obj.is_object()) throw ParseError(origin, line_no, "record is not a JSON object");
    if (options.strict) {
      for (const auto& [key, _] : obj.items()) {
        if (!kKnownKeys.contains(key)) throw ParseError(origin, line_no, "unknown key \"" + key + "\"");
      }
    }

    SafetyExample e;
    e.id = require_string(obj, "id", origin, line_no);
    e.instruction = require_string(obj, "instruction", origin, line_no);
    e.response = require_string(obj, "response", origin, line_no);

    if (auto it = obj.find("behavior"); it != obj.end() && !it->is_null()) {
      if (!it->is_string()) throw ParseError(origin, line_no, "behavior must be a string or null");
      auto tag = it->get<std::string>();
      e.behavior = parse_behavior(tag);
      if (!e.behavior) throw ParseError(origin, line_no, "unknown behavior tag \"" + tag + "\"");
    }
    if (auto it = obj.find("categories"); it != obj.end() && !it->is_null()) {
      if (!it->is_array()) throw ParseError(origin, line_no, "categories must be an array or null");
      CategorySet cats;
      for (const auto& c : *it) {
        if (!c.is_string()) throw ParseError(origin, line_no, "category names must be strings");
        auto name = c.get<std::string>();
        if (options.enforce_taxonomy && !taxonomy.contains(name)) {
          throw ParseError(origin, line_no, "category \"" + name + "\" is not in the taxonomy");
        }
        cats.push_back(std::move(name));
      }
      if (cats.empty()) throw ParseError(origin, line_no, "categories must be non-empty when present");
      e.categories = std::move(cats);
    }
    if (auto it = obj.find("is_safe"); it != obj.end() && !it->is_null()) {
      if (!it->is_boolean()) throw ParseError(origin, line_no, "is_safe must be a boolean or null");
      e.is_safe = it->get<bool>();
    }
    if (auto it = obj.find("source"); it != obj.end() && !it->is_null()) {
      if (!it->is_string()) throw ParseError(origin, line_no, "source must be a string");
      e.source = it->get<std::string>();
    } else {
      e.source = std::string(default_source(options.kind));
    }

    if (!seen.insert(e.id).second) throw DuplicateIdError(e.id);
    try {
      validate_example(e);
    } catch (const DataError& ex) {
      throw ParseError(origin, line_no, ex.what());
    }
    examples.push_back(std::move(e));
    if (nl == text.size()) break;
  }
  return Corpus(std::move(examples), options.taxonomy, origin);
}

Corpus load_corpus(const std::filesystem::path& path, const LoadOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open dataset file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_corpus(buf.str(), options, path.string());
}

std::string serialize_example(const SafetyExample& e) {
  ordered_json j;
  j["id"] = e.id;
  j["instruction"] = e.instruction;
  j["response"] = e.response;
  j["behavior"] = e.behavior ? ordered_json(std::string(to_string(*e.behavior))) : ordered_json();
  j["categories"] = e.categories ? ordered_json(*e.categories) : ordered_json();
  j["is_safe"] = e.is_safe ? ordered_json(*e.is_safe) : ordered_json();
  j["source"] = e.source;
  return j.dump();
}

std::string serialize_corpus(const Corpus& c) {
  std::string out;
  for (const auto& e : c) {
    out += serialize_example(e);
    out += '\n';
  }
  return out;
}

void write_corpus(const std::filesystem::path& path, const Corpus& c) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write dataset file " + path.string());
  out << serialize_corpus(c);
}

Corpus filter_behavior(const Corpus& c, BehaviorType t) {
  std::vector<SafetyExample> out;
  for (const auto& e : c) {
    if (!e.behavior) throw MissingLabelError(e.id, "behavior");
    if (*e.behavior == t) out.push_back(e);
  }
  return Corpus(std::move(out), c.taxonomy(), c.provenance().path);
}

DistributionReport distribution_report(const Corpus& c) {
  DistributionReport r;
  r.total = c.size();
  std::map<std::string, std::size_t> extra;
  std::map<std::string, std::size_t> in_taxonomy;
  for (const auto& name : c.taxonomy()) in_taxonomy[name] = 0;

  for (const auto& e : c) {
    const std::string b = e.behavior ? std::string(to_string(*e.behavior)) : "unlabeled";
    if (e.behavior) {
      ++r.behavior[static_cast<std::size_t>(*e.behavior)];
    } else {
      ++r.behavior_unlabeled;
    }
    if (!e.categories) {
      ++r.category_unlabeled;
      ++r.joint[b]["unlabeled"];
      continue;
    }
    if (e.categories->size() > 1) ++r.multi_counted;
    for (const auto& cat : *e.categories) {
      if (auto it = in_taxonomy.find(cat); it != in_taxonomy.end()) {
        ++it->second;
      } else {
        ++extra[cat];
      }
      ++r.joint[b][cat];
    }
  }
  for (const auto& name : c.taxonomy()) r.category.emplace_back(name, in_taxonomy[name]);
  for (const auto& [name, n] : extra) r.category.emplace_back(name, n);
  return r;
}

std::string DistributionReport::to_text() const {
  std::ostringstream os;
  os << "examples: " << total;
  if (multi_counted > 0) {
    os << " (" << multi_counted << " multi-category examples counted once per category)";
  }
  os << "\n\nbehavior\n";
  for (auto t : kAllBehaviors) os << "  " << to_string(t) << "  " << behavior_count(t) << '\n';
  os << "  unlabeled  " << behavior_unlabeled << "\n\ncategory\n";
  std::size_t width = 9;
  for (const auto& [name, _] : category) width = std::max(width, name.size());
  for (const auto& [name, n] : category) {
    os << "  " << name << std::string(width - name.size() + 2, ' ') << n << '\n';
  }
  os << "  unlabeled" << std::string(width - 9 + 2, ' ') << category_unlabeled << '\n';
  return os.str();
}

std::string DistributionReport::to_json() const {
  ordered_json j;
  j["total"] = total;
  j["multi_counted"] = multi_counted;
  ordered_json b = ordered_json::object();
  for (auto t : kAllBehaviors) b[std::string(to_string(t))] = behavior_count(t);
  b["unlabeled"] = behavior_unlabeled;
  j["behavior"] = b;
  ordered_json cat = ordered_json::object();
  for (const auto& [name, n] : category) cat[name] = n;
  cat["unlabeled"] = category_unlabeled;
  j["category"] = cat;
  j["joint"] = joint;
  return j.dump(2);
}

}  // namespace safesample

#include "safesample/annotate.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "safesample/error.hpp"
#include "safesample/hash.hpp"

namespace safesample {

using nlohmann::json;
using nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Reference sets

const ReferenceSet* ReferenceSets::find(std::string_view category) const {
  for (const auto& s : sets) {
    if (s.category == category) return &s;
  }
  return nullptr;
}

ReferenceSets build_reference_sets(const Corpus& ref_corpus,
                                   const std::vector<std::string>& taxonomy) {
  ReferenceSets out;
  std::map<std::string, std::vector<std::string>, std::less<>> members;
  for (const auto& e : ref_corpus) {
    if (!e.categories) {
      ++out.unlabeled_skipped;
      continue;
    }
    if (e.categories->size() != 1) {
      ++out.multi_label_skipped;
      continue;
    }
    members[e.categories->front()].push_back(e.id);
  }
  for (const auto& cat : taxonomy) {
    auto it = members.find(cat);
    if (it == members.end() || it->second.empty()) {
      out.omitted.push_back(cat);
      continue;
    }
    // Corpus iteration is already in id order.
    out.sets.push_back(ReferenceSet{cat, it->second, true});
  }
  return out;
}

CossimAssignment assign_category_cossim(const EmbeddingStore& store, std::string_view candidate_id,
                                        std::span<const ReferenceSet> refsets) {
  if (refsets.empty()) throw EmptyInputError("no reference sets to assign against");
  CossimAssignment best;
  bool first = true;
  for (const auto& set : refsets) {
    const double s = score_against_reference_set(store, candidate_id, set.member_ids);
    if (first || s > best.score) {
      best = {set.category, s, false};
      first = false;
    } else if (s == best.score) {
      best.tie = true;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Cache

AnnotationCache::AnnotationCache(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.empty() || !std::filesystem::exists(path_)) return;
  std::ifstream in(path_, std::ios::binary);
  if (!in) throw ConfigError("cannot open cache file " + path_.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      auto j = json::parse(line);
      entries_[j.at("key").get<std::string>()] = j.at("result");
    } catch (const json::exception& ex) {
      throw ParseError(path_.string(), line_no, std::string("bad cache line: ") + ex.what());
    }
  }
}

std::optional<json> AnnotationCache::get(const std::string& key) const {
  std::lock_guard lock(mutex_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void AnnotationCache::put(const std::string& key, TaskKind task, const json& result) {
  std::lock_guard lock(mutex_);
  entries_[key] = result;
  if (path_.empty()) return;
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  std::ofstream out(path_, std::ios::app | std::ios::binary);
  if (!out) throw ConfigError("cannot append to cache file " + path_.string());
  out << json{{"key", key}, {"task", std::string(to_string(task))}, {"result", result}}.dump()
      << '\n';
}

std::size_t AnnotationCache::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

// ---------------------------------------------------------------------------
// Prompt templates

PromptTemplate::PromptTemplate(std::string text) : text_(std::move(text)) {}

PromptTemplate PromptTemplate::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open prompt template " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return PromptTemplate(buf.str());
}

void PromptTemplate::require(std::initializer_list<std::string_view> placeholders) const {
  for (auto p : placeholders) {
    if (text_.find(std::string("{{") + std::string(p) + "}}") == std::string::npos) {
      throw PreconditionError("prompt template lacks the {{" + std::string(p) + "}} placeholder");
    }
  }
}

std::string PromptTemplate::render(const std::vector<std::string>& taxonomy,
                                   std::string_view instruction, std::string_view response) const {
  std::string tax;
  for (std::size_t i = 0; i < taxonomy.size(); ++i) {
    if (i > 0) tax += ", ";
    tax += taxonomy[i];
  }
  std::string out;
  out.reserve(text_.size() + instruction.size() + response.size() + tax.size());
  std::size_t pos = 0;
  while (pos < text_.size()) {
    auto open = text_.find("{{", pos);
    if (open == std::string::npos) break;
    auto close = text_.find("}}", open + 2);
    if (close == std::string::npos) break;
    out.append(text_, pos, open - pos);
    const std::string_view name(text_.data() + open + 2, close - open - 2);
    if (name == "taxonomy") {
      out += tax;
    } else if (name == "instruction") {
      out += instruction;
    } else if (name == "response") {
      out += response;
    } else {
      out.append(text_, open, close + 2 - open);
    }
    pos = close + 2;
  }
  out.append(text_, pos);
  return out;
}

std::string PromptTemplate::hash() const { return sha256_hex(text_); }

// ---------------------------------------------------------------------------
// Labelling driver

ordered_json AnnotationReport::to_json() const {
  ordered_json j;
  j["task"] = task;
  j["requested"] = requested;
  j["cache_hits"] = cache_hits;
  j["client_calls"] = client_calls;
  j["labeled"] = labeled;
  j["failures"] = failures;
  j["tie_events"] = tie_events;
  j["usage"] = {{"input_tokens", usage.input_tokens}, {"output_tokens", usage.output_tokens}};
  if (!template_hash.empty()) j["template_hash"] = template_hash;
  return j;
}

namespace {

using Validator = std::function<std::optional<json>(const json&)>;

/// Resolves a validated result for every example in `todo`, consulting the
/// cache first. Returns id -> normalised result; ids absent from the map
/// are failures.
std::map<std::string, json> resolve(const std::vector<const SafetyExample*>& todo, TaskKind task,
                                    ClassifierClient& client, AnnotationCache& cache,
                                    const PromptTemplate* prompt,
                                    const std::vector<std::string>& taxonomy,
                                    const Validator& validate, const AnnotateOptions& options,
                                    AnnotationReport& report) {
  std::map<std::string, json> resolved;
  std::vector<const SafetyExample*> pending;
  for (const auto* e : todo) {
    ++report.requested;
    if (auto hit = cache.get(content_key(task, e->instruction, e->response))) {
      if (auto ok = validate(*hit)) {
        resolved[e->id] = std::move(*ok);
        ++report.cache_hits;
        continue;
      }
    }
    pending.push_back(e);
  }

  const std::size_t batch =
      std::max<std::size_t>(1, options.batch_size != 0 ? options.batch_size : client.max_batch());
  for (int round = 0; round < std::max(1, options.max_attempts) && !pending.empty(); ++round) {
    std::vector<const SafetyExample*> retry;
    for (std::size_t start = 0; start < pending.size(); start += batch) {
      const std::size_t stop = std::min(pending.size(), start + batch);
      ClassifierRequest req;
      req.task = task;
      req.taxonomy = taxonomy;
      for (std::size_t i = start; i < stop; ++i) {
        const auto* e = pending[i];
        ClassifierItem item{e->id, e->instruction, e->response, {}};
        if (prompt != nullptr && !prompt->empty()) {
          item.prompt = prompt->render(taxonomy, e->instruction, e->response);
        }
        req.items.push_back(std::move(item));
      }
      auto resp = client.classify(req);
      ++report.client_calls;
      report.usage += resp.usage;
      for (std::size_t i = start; i < stop; ++i) {
        const auto* e = pending[i];
        auto it = resp.results.find(e->id);
        std::optional<json> ok;
        if (it != resp.results.end()) ok = validate(it->second);
        if (!ok) {
          retry.push_back(e);
          continue;
        }
        cache.put(content_key(task, e->instruction, e->response), task, *ok);
        resolved[e->id] = std::move(*ok);
      }
    }
    pending = std::move(retry);
  }
  for (const auto* e : pending) report.failures.push_back(e->id);
  std::sort(report.failures.begin(), report.failures.end());
  report.labeled = resolved.size();
  return resolved;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

AnnotationOutcome label_categories_llm(const Corpus& c, ClassifierClient& client,
                                       AnnotationCache& cache, const PromptTemplate& prompt,
                                       const AnnotateOptions& options) {
  prompt.require({"taxonomy", "instruction", "response"});
  if (c.taxonomy().empty()) throw PreconditionError("category labelling needs a taxonomy");
  const std::set<std::string, std::less<>> allowed(c.taxonomy().begin(), c.taxonomy().end());

  Validator validate = [&allowed](const json& r) -> std::optional<json> {
    auto it = r.find("categories");
    if (it == r.end()) return std::nullopt;
    std::vector<std::string> names;
    if (it->is_array()) {
      for (const auto& n : *it) {
        if (!n.is_string()) return std::nullopt;
        names.push_back(trim(n.get<std::string>()));
      }
    } else if (it->is_string()) {
      std::string_view s = it->get_ref<const std::string&>();
      std::size_t pos = 0;
      while (pos <= s.size()) {
        auto comma = s.find(',', pos);
        if (comma == std::string_view::npos) comma = s.size();
        names.push_back(trim(s.substr(pos, comma - pos)));
        pos = comma + 1;
      }
    } else {
      return std::nullopt;
    }
    if (names.empty()) return std::nullopt;
    for (const auto& n : names) {
      if (!allowed.contains(n)) return std::nullopt;
    }
    std::sort(names.begin(), names.end());
    names.erase(std::unique(names.begin(), names.end()), names.end());
    return json{{"categories", names}};
  };

  std::vector<const SafetyExample*> todo;
  for (const auto& e : c) {
    if (options.overwrite || !e.categories) todo.push_back(&e);
  }
  AnnotationOutcome out;
  out.report.task = "categories";
  out.report.template_hash = prompt.hash();
  auto resolved = resolve(todo, TaskKind::categories, client, cache, &prompt, c.taxonomy(),
                          validate, options, out.report);

  std::vector<SafetyExample> examples(c.examples());
  for (auto& e : examples) {
    if (auto it = resolved.find(e.id); it != resolved.end()) {
      e.categories = it->second["categories"].get<CategorySet>();
    } else if (options.overwrite) {
      e.categories.reset();
    }
  }
  out.corpus = Corpus(std::move(examples), c.taxonomy(), c.provenance().path);
  return out;
}

AnnotationOutcome label_behavior(const Corpus& c, ClassifierClient& client, AnnotationCache& cache,
                                 const AnnotateOptions& options) {
  Validator validate = [](const json& r) -> std::optional<json> {
    auto h = r.find("harmful");
    auto f = r.find("refusal");
    if (h == r.end() || f == r.end() || !h->is_boolean() || !f->is_boolean()) return std::nullopt;
    return json{{"harmful", h->get<bool>()}, {"refusal", f->get<bool>()}};
  };

  std::vector<const SafetyExample*> todo;
  for (const auto& e : c) {
    if (options.overwrite || !e.behavior) todo.push_back(&e);
  }
  AnnotationOutcome out;
  out.report.task = "behavior";
  auto resolved =
      resolve(todo, TaskKind::behavior, client, cache, nullptr, c.taxonomy(), validate, options,
              out.report);

  std::vector<SafetyExample> examples(c.examples());
  for (auto& e : examples) {
    if (auto it = resolved.find(e.id); it != resolved.end()) {
      e.behavior = classify_behavior(it->second["harmful"].get<bool>(),
                                     it->second["refusal"].get<bool>());
    } else if (options.overwrite) {
      e.behavior.reset();
    }
  }
  out.corpus = Corpus(std::move(examples), c.taxonomy(), c.provenance().path);
  return out;
}

AnnotationOutcome rewrite_to_refusal(const Corpus& c, ClassifierClient& client,
                                     AnnotationCache& cache, const PromptTemplate& prompt,
                                     const AnnotateOptions& options) {
  prompt.require({"instruction", "response"});
  for (const auto& e : c) {
    if (!e.is_safe || *e.is_safe) {
      throw PreconditionError("rewrite input must have is_safe == false; '" + e.id +
                              "' does not");
    }
  }
  Validator validate = [](const json& r) -> std::optional<json> {
    auto it = r.find("rewritten");
    if (it == r.end() || !it->is_string() || trim(it->get<std::string>()).empty()) {
      return std::nullopt;
    }
    return json{{"rewritten", it->get<std::string>()}};
  };

  std::vector<const SafetyExample*> todo;
  for (const auto& e : c) todo.push_back(&e);
  AnnotationOutcome out;
  out.report.task = "rewrite";
  out.report.template_hash = prompt.hash();
  auto resolved = resolve(todo, TaskKind::rewrite, client, cache, &prompt, c.taxonomy(), validate,
                          options, out.report);

  std::vector<SafetyExample> examples;
  for (const auto& e : c) {
    auto it = resolved.find(e.id);
    if (it == resolved.end()) continue;
    SafetyExample r = e;
    r.response = it->second["rewritten"].get<std::string>();
    r.behavior = BehaviorType::T1;
    r.is_safe = true;
    r.source = e.source + std::string(kAugmentedSourceSuffix);
    examples.push_back(std::move(r));
  }
  out.corpus = Corpus(std::move(examples), c.taxonomy(), c.provenance().path);
  return out;
}

AnnotationOutcome assign_categories_cossim(const Corpus& c, const EmbeddingStore& store,
                                           const ReferenceSets& refsets) {
  AnnotationOutcome out;
  out.report.task = "cossim";
  std::vector<SafetyExample> examples(c.examples());
  for (auto& e : examples) {
    ++out.report.requested;
    auto a = assign_category_cossim(store, e.id, refsets.sets);
    if (a.tie) ++out.report.tie_events;
    e.categories = CategorySet{a.category};
    ++out.report.labeled;
  }
  out.corpus = Corpus(std::move(examples), c.taxonomy(), c.provenance().path);
  return out;
}

}  // namespace safesample

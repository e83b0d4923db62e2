#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <memory>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "safesample/annotate.hpp"
#include "safesample/cli.hpp"
#include "safesample/error.hpp"
#include "safesample/hash.hpp"
#include "safesample/metrics.hpp"

namespace safesample::cli {

using nlohmann::json;
using nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

std::ostream& log_of(CommandContext& ctx) { return ctx.log != nullptr ? *ctx.log : std::cout; }

fs::path require_path(const std::optional<fs::path>& p, const char* what) {
  if (!p) throw ConfigError(std::string("no ") + what + " configured");
  if (!fs::exists(*p)) throw ConfigError(std::string(what) + " not found: " + p->string());
  return *p;
}

void require_exists(const std::optional<fs::path>& p, const char* what) {
  if (p && !fs::exists(*p)) throw ConfigError(std::string(what) + " not found: " + p->string());
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& p, const std::string& content) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + p.string());
  out << content;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

LoadOptions load_options(const RunConfig& cfg, DatasetKind kind) {
  LoadOptions o;
  o.kind = kind;
  o.taxonomy = cfg.taxonomy;
  o.enforce_taxonomy = !cfg.taxonomy.empty() && kind != DatasetKind::base;
  o.strict = cfg.strict;
  return o;
}

EmbeddingStore load_all_embeddings(const RunConfig& cfg) {
  EmbeddingStore store;
  for (const auto& p : cfg.embeddings) {
    if (!fs::exists(p)) throw ConfigError("embedding file not found: " + p.string());
    store.merge(load_embeddings(p));
  }
  return store;
}

/// Command manifest: config, inputs, outputs (hashed), and one timestamp
/// field so that reruns differ only there.
class RunManifest {
 public:
  RunManifest(std::string command, const RunConfig& cfg) : command_(std::move(command)), cfg_(cfg) {}

  void input(const std::string& role, const fs::path& path, const std::string& content_hash) {
    inputs_.push_back(
        {{"role", role}, {"path", path.generic_string()}, {"content_hash", content_hash}});
  }
  void output(const fs::path& path) { outputs_.push_back(path); }
  void extra(const std::string& key, ordered_json value) { extra_[key] = std::move(value); }

  fs::path write() const {
    ordered_json j;
    j["tool"] = "safesample";
    j["version"] = SAFESAMPLE_VERSION;
    j["command"] = command_;
    const auto cfg_json = cfg_.to_json();
    j["config"] = cfg_json;
    j["config_hash"] = sha256_hex(cfg_json.dump());
    j["inputs"] = inputs_;
    ordered_json outs = ordered_json::array();
    for (const auto& p : outputs_) {
      outs.push_back({{"path", fs::relative(p, cfg_.out).generic_string()},
                      {"sha256", sha256_hex(read_file(p))}});
    }
    j["outputs"] = outs;
    for (const auto& [k, v] : extra_.items()) j[k] = v;
    j["timestamp"] = utc_timestamp();
    const auto path = cfg_.out / (command_ + "_manifest.json");
    write_file(path, j.dump(2) + "\n");
    return path;
  }

 private:
  std::string command_;
  const RunConfig& cfg_;
  ordered_json inputs_ = ordered_json::array();
  std::vector<fs::path> outputs_;
  ordered_json extra_ = ordered_json::object();
};

/// Configured taxonomy, else the one carried by the corpus.
std::vector<std::string> taxonomy_of(const RunConfig& cfg, const Corpus& c) {
  if (!cfg.taxonomy.empty()) return cfg.taxonomy;
  if (c.taxonomy().empty()) throw ConfigError("no taxonomy configured");
  return c.taxonomy();
}

bool needs_embeddings(Method m) { return is_deterministic(m); }
bool needs_categories(Method m) {
  const auto b = base_method(m);
  return b == Method::sss || b == Method::pss;
}

std::unique_ptr<ClassifierClient> make_client(const RunConfig& cfg) {
  if (cfg.client == "mock") return std::make_unique<MockClassifier>();
  if (cfg.client == "replay") {
    return std::make_unique<ReplayClient>(require_path(cfg.transcript, "transcript"));
  }
  if (cfg.client == "http") {
    HttpClientConfig base;
    base.timeout = std::chrono::seconds(cfg.timeout_seconds);
    if (cfg.batch_size != 0) base.max_batch = cfg.batch_size;
    return std::make_unique<HttpClassifierClient>(
        HttpClassifierClient::from_environment(cfg.endpoint_env, cfg.token_env, base));
  }
  throw ConfigError("unknown client \"" + cfg.client + "\" (expected http, mock or replay)");
}

}  // namespace

// ---------------------------------------------------------------------------
// validate

int cmd_validate(CommandContext& ctx) {
  const RunConfig& cfg = ctx.config;
  auto& log = log_of(ctx);
  const auto pool_path = require_path(cfg.safety_pool, "safety pool");
  require_exists(cfg.base_dataset, "base dataset");
  require_exists(cfg.reference_corpus, "reference corpus");
  for (const auto& p : cfg.embeddings) require_exists(p, "embedding file");

  std::vector<std::string> errors;
  std::vector<std::string> warnings;
  ordered_json checks = ordered_json::object();
  RunManifest manifest("validate", cfg);

  std::optional<Corpus> pool;
  try {
    pool = load_corpus(pool_path, load_options(cfg, DatasetKind::safety_pool));
    checks["safety_pool"] = {{"examples", pool->size()}, {"content_hash", pool->content_hash()}};
    manifest.input("safety_pool", pool_path, pool->content_hash());
  } catch (const DataError& ex) {
    errors.push_back(std::string("safety pool: ") + ex.what());
  }
  std::optional<Corpus> reference;
  if (cfg.base_dataset) {
    try {
      auto base = load_corpus(*cfg.base_dataset, load_options(cfg, DatasetKind::base));
      checks["base_dataset"] = {{"examples", base.size()}, {"content_hash", base.content_hash()}};
      manifest.input("base_dataset", *cfg.base_dataset, base.content_hash());
    } catch (const DataError& ex) {
      errors.push_back(std::string("base dataset: ") + ex.what());
    }
  }
  if (cfg.reference_corpus) {
    try {
      reference = load_corpus(*cfg.reference_corpus, load_options(cfg, DatasetKind::reference));
      checks["reference_corpus"] = {{"examples", reference->size()},
                                    {"content_hash", reference->content_hash()}};
      manifest.input("reference_corpus", *cfg.reference_corpus, reference->content_hash());
    } catch (const DataError& ex) {
      errors.push_back(std::string("reference corpus: ") + ex.what());
    }
  }

  std::optional<EmbeddingStore> store;
  if (!cfg.embeddings.empty()) {
    try {
      store = load_all_embeddings(cfg);
      checks["embeddings"] = {{"vectors", store->size()},
                              {"dim", store->dim()},
                              {"model", store->model_tag()},
                              {"content_hash", store->content_hash()}};
      manifest.input("embeddings", cfg.embeddings.front(), store->content_hash());
      if (store->dim() != kDefaultEmbeddingDim) {
        warnings.push_back("embedding dimension " + std::to_string(store->dim()) +
                           " differs from the default model's " +
                           std::to_string(kDefaultEmbeddingDim));
      }
    } catch (const DataError& ex) {
      errors.push_back(std::string("embeddings: ") + ex.what());
    }
  }

  bool want_embeddings = false;
  bool want_categories = false;
  bool want_behavior = false;
  for (auto m : cfg.methods) {
    want_embeddings = want_embeddings || needs_embeddings(m);
    want_categories = want_categories || needs_categories(m);
    want_behavior = want_behavior || is_behavioral(m) || cfg.behavior_filter;
  }

  if (pool) {
    const auto ids = pool->ids();
    if (store) {
      for (const auto& id : store->missing(ids)) errors.push_back("missing embedding for '" + id + "'");
      if (reference) {
        for (const auto& id : store->missing(reference->ids())) {
          errors.push_back("missing embedding for reference '" + id + "'");
        }
      }
    } else if (want_embeddings) {
      errors.push_back("methods " + std::string("need embeddings but none are configured"));
    }
    std::size_t no_cat = 0;
    std::size_t no_beh = 0;
    for (const auto& e : *pool) {
      if (!e.categories) {
        ++no_cat;
        if (want_categories) errors.push_back("example '" + e.id + "' has no category label");
      }
      if (!e.behavior) {
        ++no_beh;
        if (want_behavior) errors.push_back("example '" + e.id + "' has no behavior label");
      }
    }
    checks["label_coverage"] = {{"missing_categories", no_cat}, {"missing_behavior", no_beh}};
    if (no_cat > 0 && !want_categories) {
      warnings.push_back(std::to_string(no_cat) + " pool examples lack category labels");
    }
    if (no_beh > 0 && !want_behavior) {
      warnings.push_back(std::to_string(no_beh) + " pool examples lack behavior labels");
    }
  }

  ordered_json report;
  report["ok"] = errors.empty();
  report["checks"] = checks;
  report["errors"] = errors;
  report["warnings"] = warnings;
  const auto out_path = cfg.out / "validation.json";
  write_file(out_path, report.dump(2) + "\n");
  manifest.output(out_path);
  manifest.write();

  for (const auto& w : warnings) log << "warning: " << w << '\n';
  for (const auto& e : errors) log << "error: " << e << '\n';
  log << (errors.empty() ? "validation passed" : "validation failed") << " ("
      << errors.size() << " errors, " << warnings.size() << " warnings)\n";
  return errors.empty() ? kExitOk : kExitData;
}

// ---------------------------------------------------------------------------
// label

int cmd_label(CommandContext& ctx) {
  const RunConfig& cfg = ctx.config;
  auto& log = log_of(ctx);
  if (cfg.label_tasks.empty()) throw ConfigError("no labelling tasks configured");
  const std::set<std::string> known = {"behavior", "categories", "cossim", "rewrite"};
  for (const auto& t : cfg.label_tasks) {
    if (!known.contains(t)) throw ConfigError("unknown labelling task \"" + t + "\"");
  }
  const auto input_path =
      require_path(cfg.label_input ? cfg.label_input : cfg.safety_pool, "label input");

  std::unique_ptr<ClassifierClient> inner;
  std::unique_ptr<ClassifierClient> recorder;
  ClassifierClient* client = ctx.client;
  auto get_client = [&]() -> ClassifierClient& {
    if (client == nullptr) {
      inner = make_client(cfg);
      client = inner.get();
    }
    if (cfg.transcript && cfg.client != "replay" && !recorder) {
      recorder = std::make_unique<RecordingClient>(*client, *cfg.transcript);
      client = recorder.get();
    }
    return *client;
  };

  AnnotationCache cache(cfg.cache ? *cfg.cache : fs::path{});
  AnnotateOptions opts;
  opts.max_attempts = cfg.max_attempts;
  opts.batch_size = cfg.batch_size;

  RunManifest manifest("label", cfg);
  Corpus corpus = load_corpus(input_path, load_options(cfg, DatasetKind::safety_pool));
  manifest.input("label_input", input_path, corpus.content_hash());
  ordered_json reports = ordered_json::array();
  bool labeled_pool = false;

  for (const auto& task : cfg.label_tasks) {
    if (task == "behavior") {
      auto r = label_behavior(corpus, get_client(), cache, opts);
      corpus = std::move(r.corpus);
      reports.push_back(r.report.to_json());
      labeled_pool = true;
    } else if (task == "categories") {
      const auto tpl = PromptTemplate::load(require_path(cfg.categories_template,
                                                         "categories prompt template"));
      auto r = label_categories_llm(corpus, get_client(), cache, tpl, opts);
      corpus = std::move(r.corpus);
      reports.push_back(r.report.to_json());
      labeled_pool = true;
    } else if (task == "cossim") {
      const auto ref_path = require_path(cfg.reference_corpus, "reference corpus");
      const auto ref = load_corpus(ref_path, load_options(cfg, DatasetKind::reference));
      manifest.input("reference_corpus", ref_path, ref.content_hash());
      const auto store = load_all_embeddings(cfg);
      manifest.input("embeddings", cfg.embeddings.front(), store.content_hash());
      const auto refsets = build_reference_sets(ref, taxonomy_of(cfg, corpus));
      for (const auto& omitted : refsets.omitted) {
        log << "warning: no exclusively-labelled reference examples for '" << omitted << "'\n";
      }
      auto r = assign_categories_cossim(corpus, store, refsets);
      corpus = std::move(r.corpus);
      auto rj = r.report.to_json();
      rj["reference_sets"] = refsets.sets.size();
      rj["omitted_categories"] = refsets.omitted;
      reports.push_back(rj);
      labeled_pool = true;
    } else if (task == "rewrite") {
      const auto tpl =
          PromptTemplate::load(require_path(cfg.rewrite_template, "rewrite prompt template"));
      Corpus source = corpus;
      if (cfg.rewrite_input) {
        source = load_corpus(require_path(cfg.rewrite_input, "rewrite input"),
                             load_options(cfg, DatasetKind::reference));
        manifest.input("rewrite_input", *cfg.rewrite_input, source.content_hash());
      }
      const Corpus unsafe =
          filter_corpus(source, [](const SafetyExample& e) { return e.is_safe == false; });
      auto r = rewrite_to_refusal(unsafe, get_client(), cache, tpl, opts);
      const auto out_path = cfg.out / "augmented_t1.jsonl";
      write_corpus(out_path, r.corpus);
      manifest.output(out_path);
      reports.push_back(r.report.to_json());
      log << "rewrote " << r.corpus.size() << " of " << unsafe.size()
          << " unsafe examples into refusals (" << r.report.usage.input_tokens << " input / "
          << r.report.usage.output_tokens << " output tokens)\n";
    }
  }

  if (labeled_pool) {
    const auto out_path = cfg.out / "labeled.jsonl";
    write_corpus(out_path, corpus);
    manifest.output(out_path);
  }
  const auto dist = distribution_report(corpus);
  write_file(cfg.out / "distribution.txt", dist.to_text());
  write_file(cfg.out / "distribution.json", dist.to_json() + "\n");
  manifest.output(cfg.out / "distribution.txt");
  manifest.output(cfg.out / "distribution.json");
  manifest.extra("reports", reports);
  manifest.write();

  std::size_t calls = 0;
  std::size_t hits = 0;
  std::size_t failures = 0;
  for (const auto& r : reports) {
    calls += r["client_calls"].get<std::size_t>();
    hits += r["cache_hits"].get<std::size_t>();
    failures += r["failures"].size();
  }
  log << dist.to_text();
  log << "client calls: " << calls << ", cache hits: " << hits << ", labelling failures: "
      << failures << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// sample

int cmd_sample(CommandContext& ctx) {
  const RunConfig& cfg = ctx.config;
  auto& log = log_of(ctx);
  const auto pool_path = require_path(cfg.safety_pool, "safety pool");
  if (cfg.methods.empty()) throw ConfigError("no sampling method configured");
  if (cfg.budgets.empty()) throw ConfigError("no budget configured");

  std::vector<Method> methods;
  for (auto m : cfg.methods) {
    if (cfg.behavior_filter && !is_behavioral(m)) {
      if (m == Method::random) throw ConfigError("random sampling has no behavioural variant");
      m = m == Method::sss ? Method::sss_b : m == Method::pss ? Method::pss_b : Method::cossim_b;
    }
    if (std::find(methods.begin(), methods.end(), m) == methods.end()) methods.push_back(m);
  }

  RunManifest manifest("sample", cfg);
  const Corpus pool = load_corpus(pool_path, load_options(cfg, DatasetKind::safety_pool));
  manifest.input("safety_pool", pool_path, pool.content_hash());
  const auto taxonomy = taxonomy_of(cfg, pool);

  std::optional<Corpus> base;
  if (cfg.base_dataset) {
    base = load_corpus(require_path(cfg.base_dataset, "base dataset"),
                       load_options(cfg, DatasetKind::base));
    manifest.input("base_dataset", *cfg.base_dataset, base->content_hash());
  }

  const bool any_embed = std::any_of(methods.begin(), methods.end(), needs_embeddings);
  const bool any_cossim = std::any_of(methods.begin(), methods.end(), [](Method m) {
    return base_method(m) == Method::cossim;
  });
  std::optional<EmbeddingStore> store;
  if (any_embed) {
    if (cfg.embeddings.empty()) throw ConfigError("selected methods need embedding files");
    store = load_all_embeddings(cfg);
    manifest.input("embeddings", cfg.embeddings.front(), store->content_hash());
  }
  std::optional<ReferenceSets> refsets;
  if (any_cossim) {
    const auto ref_path = require_path(cfg.reference_corpus, "reference corpus");
    const auto ref = load_corpus(ref_path, load_options(cfg, DatasetKind::reference));
    manifest.input("reference_corpus", ref_path, ref.content_hash());
    refsets = build_reference_sets(ref, taxonomy);
    store->require_coverage(ref.ids());
    for (const auto& omitted : refsets->omitted) {
      log << "warning: no exclusively-labelled reference examples for '" << omitted << "'\n";
    }
  }

  SamplingInputs inputs{&pool, store ? &*store : nullptr, refsets ? &*refsets : nullptr};
  ordered_json runs = ordered_json::array();
  for (auto m : methods) {
    for (auto budget : cfg.budgets) {
      const std::size_t n_seeds = is_deterministic(m) ? 1 : cfg.trials;
      for (std::size_t t = 0; t < n_seeds; ++t) {
        auto plan = SamplingPlan::make(m, budget, cfg.seed + t, taxonomy);
        plan.centroid_basis = cfg.centroid_basis;
        const auto result = select(inputs, plan);

        fs::path dir = cfg.out / std::string(to_string(m)) / ("n" + std::to_string(budget));
        if (!is_deterministic(m)) dir /= "seed" + std::to_string(plan.seed);
        write_file(dir / "selection.json", result.manifest_json());
        manifest.output(dir / "selection.json");

        std::vector<SafetyExample> chosen;
        for (const auto& id : result.selected_ids) chosen.push_back(pool.at(id));
        write_corpus(dir / "subset.jsonl", Corpus(std::move(chosen), pool.taxonomy()));
        manifest.output(dir / "subset.jsonl");

        ordered_json run{{"method", std::string(to_string(m))},
                         {"budget", budget},
                         {"seed", is_deterministic(m) ? ordered_json() : ordered_json(plan.seed)},
                         {"selected", result.selected_ids.size()},
                         {"shortfall", result.shortfall},
                         {"dir", fs::relative(dir, cfg.out).generic_string()}};
        if (base) {
          AugmentOptions aopts;
          aopts.prefix_on_collision = cfg.prefix_on_collision;
          const auto aug = augment(*base, result, pool, aopts);
          write_corpus(dir / "augmented.jsonl", aug.corpus);
          write_file(dir / "augment.json", aug.manifest().dump(2) + "\n");
          manifest.output(dir / "augmented.jsonl");
          manifest.output(dir / "augment.json");
          run["augmented_ratio_percent"] = 100.0 * aug.ratio;
        }
        log << display_name(m) << " n=" << budget;
        if (!is_deterministic(m)) log << " seed=" << plan.seed;
        log << ": " << result.selected_ids.size() << " selected";
        if (result.shortfall > 0) log << ", shortfall " << result.shortfall;
        log << '\n';
        runs.push_back(std::move(run));
      }
    }
  }
  manifest.extra("runs", runs);
  manifest.write();
  return kExitOk;
}

// ---------------------------------------------------------------------------
// metrics

int cmd_metrics(CommandContext& ctx) {
  const RunConfig& cfg = ctx.config;
  auto& log = log_of(ctx);
  if (cfg.verdicts.empty()) throw ConfigError("no verdict files configured");
  for (const auto& v : cfg.verdicts) {
    if (!fs::exists(v.path)) throw ConfigError("verdict file not found: " + v.path.string());
  }

  RunManifest manifest("metrics", cfg);
  ResultMap results;
  for (const auto& v : cfg.verdicts) {
    const auto records = load_verdicts(v.path);
    if (records.empty()) throw EmptyInputError("verdict file " + v.path.string() + " is empty");
    manifest.input("verdicts", v.path, sha256_hex(read_file(v.path)));
    const ResultKey key{v.method, v.budget, is_deterministic(v.method) ? 0 : v.seed};
    if (results.contains(key)) {
      throw ConfigError("two verdict files for " + std::string(to_string(v.method)) + " n=" +
                        std::to_string(v.budget) + " seed=" + std::to_string(v.seed));
    }
    results[key] = evaluate_verdicts(records);
  }
  const auto tables = report_tables(results);
  write_file(cfg.out / "metrics.csv", tables.csv);
  write_file(cfg.out / "tables.txt", tables.summary);
  write_file(cfg.out / "plot_data.csv", tables.plot_data);
  manifest.output(cfg.out / "metrics.csv");
  manifest.output(cfg.out / "tables.txt");
  manifest.output(cfg.out / "plot_data.csv");
  manifest.write();
  log << tables.summary;
  return kExitOk;
}

// ---------------------------------------------------------------------------
// entry point

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Select small, high-impact subsets of safety demonstrations", "safesample"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(SAFESAMPLE_VERSION));

  Overrides flags;
  std::string config_path;
  std::string method;
  std::string budgets;
  std::size_t budget = 0;
  std::uint64_t seed = 0;
  std::size_t trials = 0;
  std::string out_dir;
  std::string endpoint_env;
  std::string cache;
  std::string client;
  std::string tasks;

  app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--method", method, "method name(s), comma separated, or 'all'");
  auto* budget_opt = app.add_option("--budget", budget, "example budget");
  auto* budgets_opt = app.add_option("--budgets", budgets, "comma-separated budgets");
  budget_opt->excludes(budgets_opt);
  app.add_option("--seed", seed, "PRNG seed");
  app.add_option("--trials", trials, "number of consecutive seeds for stochastic methods");
  app.add_flag("--strict", flags.strict, "reject unknown keys in dataset files");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--endpoint-env", endpoint_env, "environment variable holding the endpoint URL");
  app.add_option("--cache", cache, "annotation cache file");
  app.add_option("--client", client, "classifier client: http, mock or replay");
  app.add_option("--tasks", tasks, "labelling tasks: behavior,categories,cossim,rewrite");

  auto* validate = app.add_subcommand("validate", "check inputs, schemas and coverage");
  auto* label = app.add_subcommand("label", "attach behaviour/category labels, rewrite refusals");
  auto* sample = app.add_subcommand("sample", "select subsets and write augmented datasets");
  auto* metrics = app.add_subcommand("metrics", "aggregate verdict files into tables");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  auto set_if = [](auto& dst, const CLI::App& a, const char* name, auto value) {
    if (a.count(name) > 0) dst = value;
  };
  set_if(flags.config, app, "--config", fs::path(config_path));
  set_if(flags.method, app, "--method", method);
  set_if(flags.budget, app, "--budget", budget);
  set_if(flags.budgets, app, "--budgets", budgets);
  set_if(flags.seed, app, "--seed", seed);
  set_if(flags.trials, app, "--trials", trials);
  set_if(flags.out, app, "--out", fs::path(out_dir));
  set_if(flags.endpoint_env, app, "--endpoint-env", endpoint_env);
  set_if(flags.cache, app, "--cache", fs::path(cache));
  set_if(flags.client, app, "--client", client);
  set_if(flags.tasks, app, "--tasks", tasks);

  try {
    CommandContext ctx{resolve_config(flags), &out, nullptr};
    if (*validate) return cmd_validate(ctx);
    if (*label) return cmd_label(ctx);
    if (*sample) return cmd_sample(ctx);
    if (*metrics) return cmd_metrics(ctx);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ClientError& e) {
    err << "client error: " << e.what() << '\n';
    return kExitClient;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitInternal;
}

}  // namespace safesample::cli

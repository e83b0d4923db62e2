#include "support.hpp"

#include "safesample/cli.hpp"

#include <atomic>
#include <fstream>
#include <sstream>

#include <unistd.h>

namespace safesample::testkit {

namespace fs = std::filesystem;

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = fs::temp_directory_path() /
          ("safesample-" + tag + "-" + std::to_string(::getpid()) + "-" +
           std::to_string(counter++));
  fs::remove_all(path_);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<std::string> taxonomy_of_size(std::size_t n) {
  std::vector<std::string> t;
  for (std::size_t i = 0; i < n; ++i) {
    t.push_back("cat" + std::string(i < 10 ? "0" : "") + std::to_string(i));
  }
  return t;
}

std::size_t Gen::uniform(std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_);
}

bool Gen::coin(double p) { return std::bernoulli_distribution(p)(rng_); }

Eigen::VectorXd Gen::int_vector(Eigen::Index dim, int range) {
  std::uniform_int_distribution<int> d(-range, range);
  Eigen::VectorXd v(dim);
  do {
    for (Eigen::Index i = 0; i < dim; ++i) v(i) = d(rng_);
  } while (v.cwiseAbs().maxCoeff() == 0.0);
  return v;
}

Eigen::VectorXd Gen::real_vector(Eigen::Index dim) {
  std::normal_distribution<double> d(0.0, 1.0);
  Eigen::VectorXd v(dim);
  do {
    for (Eigen::Index i = 0; i < dim; ++i) v(i) = d(rng_);
  } while (v.cwiseAbs().maxCoeff() == 0.0);
  return v;
}

SafetyExample make_example(std::string id, std::vector<std::string> categories,
                           std::optional<BehaviorType> behavior, std::optional<bool> is_safe) {
  SafetyExample e;
  e.instruction = "instruction " + id;
  e.response = "response " + id;
  e.id = std::move(id);
  if (!categories.empty()) e.categories = std::move(categories);
  e.behavior = behavior;
  e.is_safe = is_safe;
  e.source = "safety-pool";
  return e;
}

Instance random_instance(Gen& g, const InstanceShape& shape) {
  Instance inst;
  inst.taxonomy = taxonomy_of_size(g.uniform(1, shape.max_categories));
  const auto k = inst.taxonomy.size();
  const auto dim = static_cast<Eigen::Index>(g.uniform(1, static_cast<std::size_t>(shape.max_dim)));
  const auto n = g.uniform(1, shape.max_candidates);
  inst.store = EmbeddingStore(dim, "synthetic");
  std::vector<Eigen::VectorXd> seen;

  auto next_vector = [&]() {
    if (!seen.empty() && g.coin(shape.duplicate_rate)) return seen[g.uniform(0, seen.size() - 1)];
    seen.push_back(g.int_vector(dim));
    return seen.back();
  };

  std::vector<SafetyExample> pool;
  for (std::size_t i = 0; i < n; ++i) {
    // Ids deliberately not generated in sorted order.
    const std::string id = "p" + std::to_string((i * 7919) % 1000 + 1000);
    std::vector<std::string> cats{inst.taxonomy[g.uniform(0, k - 1)]};
    if (g.coin(shape.multi_label_rate)) cats.push_back(inst.taxonomy[g.uniform(0, k - 1)]);
    std::sort(cats.begin(), cats.end());
    cats.erase(std::unique(cats.begin(), cats.end()), cats.end());
    const auto behavior = kAllBehaviors[g.uniform(0, 3)];
    pool.push_back(make_example(id, cats, behavior));
    inst.store.add(id, next_vector());
  }
  inst.pool = Corpus(std::move(pool), inst.taxonomy);

  std::vector<SafetyExample> refs;
  std::size_t r = 0;
  for (const auto& cat : inst.taxonomy) {
    // Occasionally a category gets no exclusive reference examples.
    const auto count = g.coin(0.1) ? 0 : g.uniform(1, 3);
    for (std::size_t j = 0; j < count; ++j) {
      const std::string id = "r" + std::to_string(100 + r++);
      refs.push_back(make_example(id, {cat}, std::nullopt));
      inst.store.add(id, next_vector());
    }
  }
  if (k > 1 && g.coin(0.5)) {
    const std::string id = "r" + std::to_string(100 + r++);
    refs.push_back(make_example(id, {inst.taxonomy[0], inst.taxonomy[1]}, std::nullopt));
    inst.store.add(id, next_vector());
  }
  const bool any_exclusive = std::any_of(refs.begin(), refs.end(), [](const SafetyExample& e) {
    return e.categories->size() == 1;
  });
  if (!any_exclusive) {
    refs.push_back(make_example("r099", {inst.taxonomy[0]}, std::nullopt));
    inst.store.add("r099", next_vector());
  }
  inst.reference = Corpus(std::move(refs), inst.taxonomy);
  inst.refsets = build_reference_sets(inst.reference, inst.taxonomy);
  inst.budget = g.uniform(1, n + 3);
  return inst;
}

Corpus disjoint_pool(const std::vector<std::string>& taxonomy, std::size_t per_category) {
  std::vector<SafetyExample> out;
  for (const auto& cat : taxonomy) {
    for (std::size_t i = 0; i < per_category; ++i) {
      out.push_back(make_example(cat + "-" + std::to_string(10000 + i), {cat}));
    }
  }
  return Corpus(std::move(out), taxonomy);
}

}  // namespace safesample::testkit

namespace safesample::testkit {

fs::path Workspace::write_config(const nlohmann::json& cfg, const std::string& name) const {
  const auto p = dir / name;
  write_text(p, cfg.dump(2));
  return p;
}

Workspace make_workspace(const fs::path& dir, const WorkspaceShape& shape) {
  Workspace ws;
  ws.dir = dir;
  ws.taxonomy = taxonomy_of_size(shape.categories);
  Gen g(shape.seed);
  std::vector<Eigen::VectorXd> centres;
  for (std::size_t c = 0; c < shape.categories; ++c) centres.push_back(g.real_vector(shape.dim) * 3.0);
  EmbeddingStore store(shape.dim, "synthetic-encoder");
  auto near = [&](std::size_t c) { return Eigen::VectorXd(centres[c] + g.real_vector(shape.dim)); };

  std::vector<SafetyExample> pool;
  for (std::size_t i = 0; i < shape.pool_size; ++i) {
    const auto c = i % shape.categories;
    auto e = make_example("s" + std::to_string(100000 + i), {}, std::nullopt);
    e.instruction = "synthetic instruction " + std::to_string(i) + " about " + ws.taxonomy[c];
    e.response = "synthetic response " + std::to_string(i);
    if (shape.labelled) {
      e.categories = CategorySet{ws.taxonomy[c]};
      if (g.coin(0.1)) {
        e.categories->push_back(ws.taxonomy[g.uniform(0, shape.categories - 1)]);
        std::sort(e.categories->begin(), e.categories->end());
        e.categories->erase(std::unique(e.categories->begin(), e.categories->end()),
                            e.categories->end());
      }
      e.behavior = kAllBehaviors[g.uniform(0, 3)];
    }
    e.is_safe = e.behavior ? std::optional<bool>(axes_of(*e.behavior).response_refusal) : std::nullopt;
    store.add(e.id, near(c));
    pool.push_back(std::move(e));
  }

  std::vector<SafetyExample> ref;
  for (std::size_t c = 0; c < shape.categories; ++c) {
    for (std::size_t j = 0; j < shape.refs_per_category; ++j) {
      auto e = make_example("ref-" + ws.taxonomy[c] + "-" + std::to_string(j), {ws.taxonomy[c]},
                            std::nullopt);
      e.source = "reference";
      store.add(e.id, near(c));
      ref.push_back(std::move(e));
    }
  }

  std::vector<SafetyExample> base;
  for (std::size_t i = 0; i < shape.base_size; ++i) {
    auto e = make_example("b" + std::to_string(100000 + i), {}, std::nullopt);
    e.source = "base";
    base.push_back(std::move(e));
  }

  ws.pool = dir / "pool.jsonl";
  ws.base = dir / "base.jsonl";
  ws.reference = dir / "reference.jsonl";
  ws.embeddings = dir / "embeddings.jsonl";
  write_corpus(ws.pool, Corpus(pool, ws.taxonomy));
  write_corpus(ws.reference, Corpus(ref, ws.taxonomy));
  write_corpus(ws.base, Corpus(base, {}));
  write_embeddings(ws.embeddings, store);

  ws.config = {{"safety_pool", "pool.jsonl"},
               {"base_dataset", "base.jsonl"},
               {"reference_corpus", "reference.jsonl"},
               {"embeddings", {"embeddings.jsonl"}},
               {"taxonomy", ws.taxonomy},
               {"out", "out"}};
  return ws;
}

RunOutput run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "safesample");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  RunOutput r;
  r.code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

}  // namespace safesample::testkit

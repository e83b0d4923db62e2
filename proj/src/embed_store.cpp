#include "safesample/embed_store.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "safesample/hash.hpp"

namespace safesample {

using nlohmann::json;

std::string embedding_text(std::string_view instruction, std::string_view response) {
  std::string out;
  out.reserve(instruction.size() + kPairJoiner.size() + response.size());
  out.append(instruction).append(kPairJoiner).append(response);
  return out;
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  return cosine(a.values, b.values);
}

EmbeddingStore::EmbeddingStore(Eigen::Index dim, std::string model_tag)
    : dim_(dim), model_tag_(std::move(model_tag)) {
  if (dim <= 0) throw DataError("embedding dimension must be positive");
}

void EmbeddingStore::add(std::string id, const Eigen::Ref<const Eigen::VectorXd>& values,
                         std::string_view model_tag) {
  if (id.empty()) throw DataError("embedding with empty id");
  if (dim_ == 0) {
    if (values.size() == 0) throw DimensionMismatchError("embedding '" + id + "' is empty");
    dim_ = values.size();
  }
  if (values.size() != dim_) {
    throw DimensionMismatchError("embedding '" + id + "' has dimension " +
                                 std::to_string(values.size()) + ", store expects " +
                                 std::to_string(dim_));
  }
  if (!model_tag.empty()) {
    if (model_tag_.empty() && ids_.empty()) {
      model_tag_ = std::string(model_tag);
    } else if (model_tag != model_tag_) {
      throw DataError("embedding '" + id + "' was produced by model '" + std::string(model_tag) +
                      "', store holds '" + model_tag_ + "'");
    }
  }
  if (!values.allFinite()) throw DataError("embedding '" + id + "' has non-finite components");
  if (!(detail::ordered_norm(values) > 0.0)) {
    throw ZeroNormError("embedding '" + id + "' has zero norm");
  }
  if (column_.contains(id)) throw DuplicateIdError(id);

  if (cols_used_ == data_.cols()) {
    data_.conservativeResize(dim_, std::max<Eigen::Index>(16, 2 * data_.cols()));
  }
  data_.col(cols_used_) = values;
  hash_cache_ = std::make_shared<HashCache>();
  column_.emplace(id, cols_used_++);
  ids_.insert(std::upper_bound(ids_.begin(), ids_.end(), id), std::move(id));
}

void EmbeddingStore::merge(const EmbeddingStore& other) {
  if (other.size() == 0) return;
  if (dim_ != 0 && other.dim_ != dim_) {
    throw DimensionMismatchError("cannot merge embeddings of dimension " +
                                 std::to_string(other.dim_) + " into " + std::to_string(dim_));
  }
  for (const auto& id : other.ids_) add(id, other.vector(id), other.model_tag_);
}

bool EmbeddingStore::contains(std::string_view id) const {
  return column_.contains(std::string(id));
}

Eigen::Ref<const Eigen::VectorXd> EmbeddingStore::vector(std::string_view id) const {
  auto it = column_.find(std::string(id));
  if (it == column_.end()) throw MissingEmbeddingError(std::string(id));
  return data_.col(it->second);
}

EmbeddingVector EmbeddingStore::get(std::string_view id) const {
  return EmbeddingVector{std::string(id), model_tag_, vector(id)};
}

std::vector<std::string> EmbeddingStore::missing(std::span<const std::string> ids) const {
  std::vector<std::string> out;
  for (const auto& id : ids) {
    if (!column_.contains(id)) out.push_back(id);
  }
  return out;
}

void EmbeddingStore::require_coverage(std::span<const std::string> ids) const {
  for (const auto& id : ids) {
    if (!column_.contains(id)) throw MissingEmbeddingError(id);
  }
}

std::string EmbeddingStore::content_hash() const {
  std::lock_guard lock(hash_cache_->mutex);
  if (hash_cache_->value) return *hash_cache_->value;
  Sha256 h;
  h.field(model_tag_).field(std::to_string(dim_));
  char buf[32];
  for (const auto& id : ids_) {
    h.field(id);
    const auto v = vector(id);
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", v[i]);
      h.field(buf);
    }
  }
  hash_cache_->value = h.hex_digest();
  return *hash_cache_->value;
}

EmbeddingStore parse_embeddings(std::string_view text, const EmbeddingLoadOptions& options,
                                const std::string& origin) {
  EmbeddingStore store;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  Eigen::Index file_dim = options.expected_dim;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception& ex) {
      throw ParseError(origin, line_no, std::string("malformed JSON: ") + ex.what());
    }
    if (!obj.is_object() || !obj.contains("id") || !obj["id"].is_string() ||
        !obj.contains("vector") || !obj["vector"].is_array()) {
      throw ParseError(origin, line_no, "expected {\"id\", \"model\", \"dim\", \"vector\"}");
    }
    const auto& arr = obj["vector"];
    Eigen::VectorXd v(static_cast<Eigen::Index>(arr.size()));
    for (std::size_t i = 0; i < arr.size(); ++i) {
      if (!arr[i].is_number()) throw ParseError(origin, line_no, "vector components must be numbers");
      v[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
    }
    if (auto it = obj.find("dim"); it != obj.end()) {
      if (!it->is_number_integer() || it->get<Eigen::Index>() != v.size()) {
        throw ParseError(origin, line_no, "\"dim\" does not match vector length");
      }
    }
    if (file_dim == 0) file_dim = v.size();
    if (v.size() != file_dim) {
      throw ParseError(origin, line_no,
                       "dimension " + std::to_string(v.size()) + " differs from " +
                           std::to_string(file_dim));
    }
    std::string model;
    if (auto it = obj.find("model"); it != obj.end() && it->is_string()) model = it->get<std::string>();
    try {
      store.add(obj["id"].get<std::string>(), v, model);
    } catch (const DuplicateIdError&) {
      throw;
    } catch (const DataError& ex) {
      throw ParseError(origin, line_no, ex.what());
    }
  }
  return store;
}

EmbeddingStore load_embeddings(const std::filesystem::path& path,
                               const EmbeddingLoadOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open embedding file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_embeddings(buf.str(), options, path.string());
}

void write_embeddings(const std::filesystem::path& path, const EmbeddingStore& store) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write embedding file " + path.string());
  for (const auto& id : store.ids()) {
    const auto v = store.vector(id);
    json j;
    j["id"] = id;
    j["model"] = store.model_tag();
    j["dim"] = store.dim();
    j["vector"] = std::vector<double>(v.data(), v.data() + v.size());
    out << j.dump() << '\n';
  }
}

Centroid centroid(const EmbeddingStore& store, std::span<const std::string> members,
                  std::string category) {
  if (members.empty()) throw EmptyInputError("centroid of an empty member set");
  std::vector<std::string> ordered(members.begin(), members.end());
  std::sort(ordered.begin(), ordered.end());
  ordered.erase(std::unique(ordered.begin(), ordered.end()), ordered.end());

  Eigen::VectorXd sum = Eigen::VectorXd::Zero(store.dim());
  Sha256 h;
  for (const auto& id : ordered) {
    sum += store.vector(id);
    h.field(id);
  }
  Centroid c;
  c.category = std::move(category);
  c.member_count = ordered.size();
  c.vector = sum / static_cast<double>(ordered.size());
  c.member_hash = h.hex_digest();
  return c;
}

double score_against_centroid(const EmbeddingStore& store, std::string_view candidate_id,
                              const Centroid& c) {
  const auto v = store.vector(candidate_id);
  if (!(detail::ordered_norm(c.vector) > 0.0)) {
    throw ZeroNormError("centroid of category '" + c.category + "' has zero norm");
  }
  return cosine(v, c.vector);
}

double score_against_reference_set(const EmbeddingStore& store, std::string_view candidate_id,
                                   std::span<const std::string> refs) {
  if (refs.empty()) throw EmptyInputError("reference set is empty");
  std::vector<std::string_view> ordered(refs.begin(), refs.end());
  std::sort(ordered.begin(), ordered.end());
  const auto x = store.vector(candidate_id);
  double sum = 0.0;
  for (auto ref : ordered) sum += cosine(store.vector(ref), x);
  return sum / static_cast<double>(ordered.size());
}

}  // namespace safesample

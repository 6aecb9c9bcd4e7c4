// Copyright 2026 The AfriE5 Toolkit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "afrie5/error.hpp"
#include "afrie5/linalg.hpp"
#include "afrie5/text.hpp"

namespace afrie5 {

/// E5-style instruct prompt. An empty instruction passes the query through untouched; an
/// already formatted text is prefixed again.
inline std::string format_instruction(std::string_view task_instruction, std::string_view query) {
  if (task_instruction.empty()) return std::string(query);
  std::string out = "Instruct: ";
  out += task_instruction;
  out += "\nQuery: ";
  out += query;
  return out;
}

class EncoderPort {
 public:
  virtual ~EncoderPort() = default;
  /// One unit-norm row per input text, in input order. The instruction applies to every text.
  virtual Matrix embed(const std::vector<std::string>& texts, std::string_view instruction = {}) = 0;
  virtual int dim() const = 0;
  /// False when callers must serialize embed() calls.
  virtual bool concurrent_safe() const { return true; }
};

// ---------------------------------------------------------------------------
// Hashed character n-gram encoder

inline constexpr int kDefaultToyDim = 32;
inline constexpr int kDefaultToyBuckets = 1 << 14;
inline constexpr int kDefaultNgramOrder = 3;
inline constexpr int kDefaultMaxChars = 512;
inline constexpr double kDefaultInitScale = 0.001;

struct ToyEncoderParams {
  Matrix weights;  // dim x buckets
  std::uint64_t hash_seed = 0;
  int ngram_order = kDefaultNgramOrder;
  int max_chars = kDefaultMaxChars;

  int dim() const { return static_cast<int>(weights.rows()); }
  int buckets() const { return static_cast<int>(weights.cols()); }

  static ToyEncoderParams init(std::uint64_t seed, int dim = kDefaultToyDim, int buckets = kDefaultToyBuckets,
                               int ngram_order = kDefaultNgramOrder, double init_scale = kDefaultInitScale) {
    if (dim < 1 || buckets < 1 || ngram_order < 1) {
      throw ValidationError("toy encoder shapes must be positive");
    }
    ToyEncoderParams p;
    p.hash_seed = seed;
    p.ngram_order = ngram_order;
    p.weights.resize(dim, buckets);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, init_scale);
    for (Eigen::Index i = 0; i < p.weights.size(); ++i) p.weights.data()[i] = normal(rng);
    return p;
  }

  void validate() const {
    if (weights.rows() < 1 || weights.cols() < 1) throw ValidationError("toy encoder has empty weights");
    if (!weights.allFinite()) throw ValidationError("toy encoder weights must be finite");
    if (ngram_order < 1 || max_chars < 1) throw ValidationError("toy encoder settings must be positive");
  }
};

// Sorted (bucket, weight) pairs.
using SparseFeatures = std::vector<std::pair<int, double>>;

/// Mean-pooled hashed character n-gram counts. Texts are capped at max_chars code points;
/// texts shorter than the n-gram order hash as a single whole-string feature.
inline SparseFeatures featurize(std::string_view text, const ToyEncoderParams& params) {
  std::vector<char32_t> cps = code_points(text);
  if (cps.size() > static_cast<std::size_t>(params.max_chars)) cps.resize(params.max_chars);
  const std::size_t n = static_cast<std::size_t>(params.ngram_order);
  const std::uint64_t basis = fnv1a(std::string_view(reinterpret_cast<const char*>(&params.hash_seed),
                                                     sizeof(params.hash_seed)));
  auto bucket_of = [&](std::size_t begin, std::size_t len) {
    std::string_view bytes(reinterpret_cast<const char*>(cps.data() + begin), len * sizeof(char32_t));
    return static_cast<int>(fnv1a(bytes, basis) % static_cast<std::uint64_t>(params.buckets()));
  };
  std::map<int, double> counts;
  if (cps.size() < n) {
    counts[bucket_of(0, cps.size())] = 1.0;
  } else {
    const std::size_t total = cps.size() - n + 1;
    const double w = 1.0 / static_cast<double>(total);
    for (std::size_t i = 0; i < total; ++i) counts[bucket_of(i, n)] += w;
  }
  return {counts.begin(), counts.end()};
}

struct ToyForwardCache {
  std::vector<SparseFeatures> features;
  Matrix raw;  // pre-normalization outputs, one row per text
  Vector norms;
  int dim = 0;
  int buckets = 0;
};

struct ToyForward {
  Matrix embeddings;
  ToyForwardCache cache;
};

inline ToyForward toy_forward(const std::vector<std::string>& texts, const ToyEncoderParams& params) {
  params.validate();
  ToyForward out;
  auto& cache = out.cache;
  cache.dim = params.dim();
  cache.buckets = params.buckets();
  cache.features.reserve(texts.size());
  const auto n = static_cast<Eigen::Index>(texts.size());
  cache.raw = Matrix::Zero(n, params.dim());
  cache.norms.resize(n);
  out.embeddings.resize(n, params.dim());
  for (Eigen::Index i = 0; i < n; ++i) {
    cache.features.push_back(featurize(texts[static_cast<std::size_t>(i)], params));
    for (const auto& [bucket, value] : cache.features.back()) {
      cache.raw.row(i) += value * params.weights.col(bucket).transpose();
    }
    const double norm = cache.raw.row(i).norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) throw ValidationError("degenerate embedding");
    cache.norms(i) = norm;
    out.embeddings.row(i) = cache.raw.row(i) / norm;
  }
  return out;
}

/// Adds dLoss/dW into grad_w given dLoss/dEmbeddings, pushing through the normalization
/// Jacobian (I - e e^T)/|raw| and the sparse linear map.
inline void toy_backward_accumulate(const ToyForwardCache& cache, const Matrix& grad_embeddings, Matrix& grad_w) {
  const auto n = static_cast<Eigen::Index>(cache.features.size());
  if (grad_embeddings.rows() != n || grad_embeddings.cols() != cache.dim) {
    throw ValidationError("toy_backward: gradient shape does not match the forward cache");
  }
  if (grad_w.rows() != cache.dim || grad_w.cols() != cache.buckets) {
    throw ValidationError("toy_backward: accumulator shape does not match the encoder");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::RowVectorXd e = cache.raw.row(i) / cache.norms(i);
    const Eigen::RowVectorXd g = grad_embeddings.row(i);
    const Eigen::RowVectorXd g_raw = (g - e * e.dot(g)) / cache.norms(i);
    for (const auto& [bucket, value] : cache.features[static_cast<std::size_t>(i)]) {
      grad_w.col(bucket) += value * g_raw.transpose();
    }
  }
}

inline Matrix toy_backward(const ToyForwardCache& cache, const Matrix& grad_embeddings) {
  Matrix grad_w = Matrix::Zero(cache.dim, cache.buckets);
  toy_backward_accumulate(cache, grad_embeddings, grad_w);
  return grad_w;
}

class ToyEncoder : public EncoderPort {
 public:
  explicit ToyEncoder(ToyEncoderParams params) : params_(std::move(params)) { params_.validate(); }

  Matrix embed(const std::vector<std::string>& texts, std::string_view instruction = {}) override {
    if (instruction.empty()) return toy_forward(texts, params_).embeddings;
    std::vector<std::string> formatted;
    formatted.reserve(texts.size());
    for (const auto& t : texts) formatted.push_back(format_instruction(instruction, t));
    return toy_forward(formatted, params_).embeddings;
  }

  int dim() const override { return params_.dim(); }
  const ToyEncoderParams& params() const { return params_; }

 private:
  ToyEncoderParams params_;
};

// ---------------------------------------------------------------------------
// File-backed lookup encoder: stands in for precomputed large-model embeddings.
// Lines: {"hash": "<content hash>", "embedding": [..]} or {"text": "...", "embedding": [..]}.

class FileEncoder : public EncoderPort {
 public:
  FileEncoder() = default;

  static FileEncoder load(const std::string& path) {
    FileEncoder enc;
    const auto lines = split_lines(read_file(path));
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (lines[i].find_first_not_of(" \t\r") == std::string::npos) continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(lines[i]);
      } catch (const nlohmann::json::parse_error&) {
        throw ValidationError(path + ": malformed JSON at line " + std::to_string(i + 1));
      }
      std::string key;
      if (j.contains("hash")) {
        key = j.at("hash").get<std::string>();
      } else if (j.contains("text")) {
        key = content_hash(j.at("text").get<std::string>());
      } else {
        throw ValidationError(path + ": missing field 'hash' at line " + std::to_string(i + 1));
      }
      if (!j.contains("embedding") || !j.at("embedding").is_array()) {
        throw ValidationError(path + ": missing field 'embedding' at line " + std::to_string(i + 1));
      }
      enc.add(key, j.at("embedding").get<std::vector<double>>());
    }
    return enc;
  }

  /// Adds one entry; the vector is L2-normalized on insertion.
  void add(const std::string& hash, const std::vector<double>& values) {
    if (values.empty()) throw ValidationError("empty embedding for " + hash);
    if (dim_ == 0) dim_ = static_cast<int>(values.size());
    if (static_cast<int>(values.size()) != dim_) throw ValidationError("embedding dimension mismatch for " + hash);
    Eigen::RowVectorXd v = Eigen::Map<const Eigen::RowVectorXd>(values.data(), dim_);
    const double n = v.norm();
    if (!(n > 0.0) || !std::isfinite(n)) throw ValidationError("degenerate embedding for " + hash);
    table_[hash] = v / n;
  }

  void add_text(std::string_view text, const std::vector<double>& values) { add(content_hash(text), values); }

  Matrix embed(const std::vector<std::string>& texts, std::string_view instruction = {}) override {
    if (dim_ == 0) throw RuntimeError("file encoder is empty");
    Matrix out(static_cast<Eigen::Index>(texts.size()), dim_);
    for (std::size_t i = 0; i < texts.size(); ++i) {
      auto it = instruction.empty() ? table_.end() : table_.find(content_hash(format_instruction(instruction, texts[i])));
      if (it == table_.end()) it = table_.find(content_hash(texts[i]));
      if (it == table_.end()) {
        throw RuntimeError("file encoder has no embedding for text hash " + content_hash(texts[i]));
      }
      out.row(static_cast<Eigen::Index>(i)) = it->second;
    }
    return out;
  }

  int dim() const override { return dim_; }
  std::size_t size() const { return table_.size(); }

  std::string to_jsonl() const {
    std::map<std::string, const Eigen::RowVectorXd*> sorted;
    for (const auto& [k, v] : table_) sorted[k] = &v;
    std::string out;
    for (const auto& [k, v] : sorted) {
      nlohmann::json j{{"hash", k}, {"embedding", std::vector<double>(v->data(), v->data() + v->size())}};
      out += j.dump();
      out.push_back('\n');
    }
    return out;
  }

 private:
  int dim_ = 0;
  std::unordered_map<std::string, Eigen::RowVectorXd> table_;
};

// ---------------------------------------------------------------------------
// Checkpoints: little-endian binary dump of the toy parameters plus step and config hash.

inline constexpr char kCheckpointMagic[8] = {'A', 'F', 'E', '5', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ToyEncoderParams params;
  std::uint64_t step = 0;
  std::uint64_t config_hash = 0;
};

namespace detail {

template <typename T>
void put(std::ofstream& out, T v) {
  static_assert(std::endian::native == std::endian::little, "checkpoint format is little-endian");
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(std::ifstream& in, const std::string& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw ValidationError(path + ": truncated checkpoint");
  return v;
}

}  // namespace detail

inline void write_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeError("cannot write " + path);
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::put<std::uint32_t>(out, kCheckpointVersion);
  detail::put<std::uint64_t>(out, ckpt.step);
  detail::put<std::uint64_t>(out, ckpt.config_hash);
  detail::put<std::uint64_t>(out, ckpt.params.hash_seed);
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.params.ngram_order));
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.params.max_chars));
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.params.dim()));
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.params.buckets()));
  out.write(reinterpret_cast<const char*>(ckpt.params.weights.data()),
            static_cast<std::streamsize>(ckpt.params.weights.size() * sizeof(double)));
  if (!out) throw RuntimeError("failed writing " + path);
}

inline Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RuntimeError("cannot open " + path);
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw ValidationError(path + ": not a checkpoint file");
  }
  if (detail::take<std::uint32_t>(in, path) != kCheckpointVersion) {
    throw ValidationError(path + ": unsupported checkpoint version");
  }
  Checkpoint ckpt;
  ckpt.step = detail::take<std::uint64_t>(in, path);
  ckpt.config_hash = detail::take<std::uint64_t>(in, path);
  ckpt.params.hash_seed = detail::take<std::uint64_t>(in, path);
  ckpt.params.ngram_order = static_cast<int>(detail::take<std::uint32_t>(in, path));
  ckpt.params.max_chars = static_cast<int>(detail::take<std::uint32_t>(in, path));
  const auto dim = detail::take<std::uint32_t>(in, path);
  const auto buckets = detail::take<std::uint32_t>(in, path);
  ckpt.params.weights.resize(dim, buckets);
  if (!in.read(reinterpret_cast<char*>(ckpt.params.weights.data()),
               static_cast<std::streamsize>(ckpt.params.weights.size() * sizeof(double)))) {
    throw ValidationError(path + ": truncated checkpoint");
  }
  ckpt.params.validate();
  return ckpt;
}

// ---------------------------------------------------------------------------
// Port specs: toy:<seed>:<dim> | file:<path> | ckpt:<path>

inline std::unique_ptr<EncoderPort> make_encoder(const std::string& spec) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) throw ValidationError("encoder spec '" + spec + "' lacks a scheme");
  const std::string scheme = spec.substr(0, colon);
  const std::string rest = spec.substr(colon + 1);
  if (scheme == "toy") {
    const auto parts = split(rest, ':');
    if (parts.size() != 2) throw ValidationError("toy encoder spec must be toy:<seed>:<dim>");
    std::uint64_t seed = 0;
    int dim = 0;
    try {
      seed = std::stoull(parts[0]);
      dim = std::stoi(parts[1]);
    } catch (const std::logic_error&) {
      throw ValidationError("toy encoder spec must be toy:<seed>:<dim>");
    }
    if (dim < 1) throw ValidationError("toy encoder dim must be positive");
    return std::make_unique<ToyEncoder>(ToyEncoderParams::init(seed, dim));
  }
  if (scheme == "file") return std::make_unique<FileEncoder>(FileEncoder::load(rest));
  if (scheme == "ckpt") return std::make_unique<ToyEncoder>(read_checkpoint(rest).params);
  throw ValidationError("unknown encoder scheme '" + scheme + "'");
}

}  // namespace afrie5

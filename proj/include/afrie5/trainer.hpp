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
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <future>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "afrie5/datamodel.hpp"
#include "afrie5/encoder.hpp"
#include "afrie5/error.hpp"
#include "afrie5/objective.hpp"
#include "afrie5/text.hpp"

namespace afrie5 {

struct TrainConfig {
  int epochs = 1;
  int batch_size = 8;
  int group_size = 8;
  double learning_rate = 1e-5;
  double warmup_ratio = 0.1;
  int max_query_len = 512;    // characters in the toy path
  int max_passage_len = 512;
  double temperature = kDefaultTemperature;
  bool same_dataset_within_batch = true;
  int log_every = 100;
  int checkpoint_every = 100;
  std::uint64_t seed = 42;
  bool use_kd = true;
  int shards = 1;  // data-parallel embedding slices; the loss is always pooled
  std::string query_instruction;

  void validate() const {
    if (epochs < 1) throw ValidationError("epochs must be positive");
    if (batch_size < 1) throw ValidationError("batch_size must be positive");
    if (group_size < 1) throw ValidationError("group_size must be positive");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
      throw ValidationError("learning_rate must be positive");
    }
    if (!(warmup_ratio >= 0.0 && warmup_ratio <= 1.0)) throw ValidationError("warmup_ratio must lie in [0,1]");
    if (max_query_len < 1 || max_passage_len < 1) throw ValidationError("length caps must be positive");
    if (!(temperature > 0.0) || !std::isfinite(temperature)) throw ValidationError("temperature must be positive");
    if (log_every < 1) throw ValidationError("log_every must be positive");
    if (checkpoint_every < 1) throw ValidationError("checkpoint_every must be positive");
    if (shards < 1 || shards > batch_size) throw ValidationError("shards must lie in [1, batch_size]");
  }
};

inline nlohmann::json to_json(const TrainConfig& c) {
  return nlohmann::json{{"epochs", c.epochs},
                        {"batch_size", c.batch_size},
                        {"group_size", c.group_size},
                        {"learning_rate", c.learning_rate},
                        {"warmup_ratio", c.warmup_ratio},
                        {"max_query_len", c.max_query_len},
                        {"max_passage_len", c.max_passage_len},
                        {"temperature", c.temperature},
                        {"same_dataset_within_batch", c.same_dataset_within_batch},
                        {"log_every", c.log_every},
                        {"checkpoint_every", c.checkpoint_every},
                        {"seed", c.seed},
                        {"use_kd", c.use_kd},
                        {"shards", c.shards},
                        {"query_instruction", c.query_instruction}};
}

inline std::uint64_t config_hash(const TrainConfig& c) { return fnv1a(to_json(c).dump()); }

// ---------------------------------------------------------------------------
// Batching

struct Batch {
  std::string dataset;
  std::vector<std::size_t> members;  // instance indices, length B
  std::vector<std::string> queries;  // length B
  std::vector<std::string> passages; // length B*G, query-major, positive first in each group
  std::optional<Matrix> teacher_raw; // B x G raw teacher scores aligned with passages
};

namespace detail {

inline std::string truncate_chars(const std::string& text, int max_chars) {
  const auto cps = code_points(text);
  if (cps.size() <= static_cast<std::size_t>(max_chars)) return text;
  icu::UnicodeString s;
  for (int i = 0; i < max_chars; ++i) s.append(static_cast<UChar32>(cps[static_cast<std::size_t>(i)]));
  std::string out;
  s.toUTF8String(out);
  return out;
}

}  // namespace detail

/// Shuffles with the config seed, partitions by dataset key (meta.source) when
/// same_dataset_within_batch is set, and cuts batches of exactly B (remainders dropped). Each
/// instance contributes its first positive plus G-1 negatives, sampled without replacement
/// when it has enough and padded by resampling its own negatives otherwise.
inline std::vector<Batch> plan_batches(const std::vector<TrainInstance>& instances, const TrainConfig& cfg,
                                       std::uint64_t epoch = 0) {
  cfg.validate();
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const auto& inst = instances[i];
    if (inst.pos.empty()) throw ValidationError("instance " + std::to_string(i) + " has no positive");
    if (cfg.group_size > 1 && inst.neg.empty()) {
      throw ValidationError("instance " + std::to_string(i) + " has no negatives for group size " +
                            std::to_string(cfg.group_size));
    }
    if (cfg.use_kd && !inst.teacher_scores) {
      throw ValidationError("instance " + std::to_string(i) + " lacks teacher scores (knowledge distillation on)");
    }
    if (inst.teacher_scores && inst.teacher_scores->size() != 1 + inst.neg.size()) {
      throw ValidationError("instance " + std::to_string(i) + " has misaligned teacher scores");
    }
  }

  std::mt19937_64 rng(cfg.seed + 0x9e3779b97f4a7c15ULL * epoch);
  std::map<std::string, std::vector<std::size_t>> partitions;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    partitions[cfg.same_dataset_within_batch ? instances[i].meta.source : std::string()].push_back(i);
  }

  const auto b = static_cast<std::size_t>(cfg.batch_size);
  const auto g = static_cast<std::size_t>(cfg.group_size);
  std::vector<Batch> batches;
  for (auto& [key, idx] : partitions) {
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t start = 0; start + b <= idx.size(); start += b) {
      Batch batch;
      batch.dataset = key;
      batch.members.assign(idx.begin() + static_cast<std::ptrdiff_t>(start),
                           idx.begin() + static_cast<std::ptrdiff_t>(start + b));
      batches.push_back(std::move(batch));
    }
  }
  std::shuffle(batches.begin(), batches.end(), rng);

  for (auto& batch : batches) {
    if (cfg.use_kd) batch.teacher_raw = Matrix(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(g));
    for (std::size_t r = 0; r < batch.members.size(); ++r) {
      const auto& inst = instances[batch.members[r]];
      batch.queries.push_back(detail::truncate_chars(inst.query, cfg.max_query_len));
      std::vector<std::size_t> picks;
      const std::size_t need = g - 1;
      if (need > 0) {
        std::vector<std::size_t> order(inst.neg.size());
        std::iota(order.begin(), order.end(), 0);
        if (inst.neg.size() >= need) {
          for (std::size_t k = 0; k < need; ++k) {
            std::uniform_int_distribution<std::size_t> pick(k, order.size() - 1);
            std::swap(order[k], order[pick(rng)]);
          }
          picks.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(need));
        } else {
          picks = order;
          std::uniform_int_distribution<std::size_t> pick(0, inst.neg.size() - 1);
          while (picks.size() < need) picks.push_back(pick(rng));
        }
      }
      batch.passages.push_back(detail::truncate_chars(inst.pos.front(), cfg.max_passage_len));
      for (std::size_t k : picks) batch.passages.push_back(detail::truncate_chars(inst.neg[k], cfg.max_passage_len));
      if (batch.teacher_raw) {
        const auto& ts = *inst.teacher_scores;
        auto row = static_cast<Eigen::Index>(r);
        (*batch.teacher_raw)(row, 0) = ts[0];
        for (std::size_t k = 0; k < picks.size(); ++k) {
          (*batch.teacher_raw)(row, static_cast<Eigen::Index>(k + 1)) = ts[picks[k] + 1];
        }
      }
    }
  }
  return batches;
}

/// Linear warmup to the base rate over ceil(warmup_ratio * total) steps, then linear decay to
/// zero at total_steps.
inline double lr_at(long step, long total_steps, const TrainConfig& cfg) {
  if (step < 0 || step > total_steps) throw ValidationError("lr_at: step outside [0, total_steps]");
  const auto warmup = static_cast<long>(std::ceil(cfg.warmup_ratio * static_cast<double>(total_steps)));
  const double base = cfg.learning_rate;
  if (step < warmup) return base * static_cast<double>(step) / static_cast<double>(warmup);
  if (total_steps == warmup) return base;
  return base * static_cast<double>(total_steps - step) / static_cast<double>(total_steps - warmup);
}

// ---------------------------------------------------------------------------
// Training loop

struct MetricPoint {
  long step = 0;
  double loss = 0.0;
  double loss_contrastive = 0.0;
  double loss_kd = 0.0;
  double lr = 0.0;

  bool operator==(const MetricPoint&) const = default;
};

inline nlohmann::json to_json(const MetricPoint& m) {
  return nlohmann::json{{"step", m.step},
                        {"loss", m.loss},
                        {"loss_contrastive", m.loss_contrastive},
                        {"loss_kd", m.loss_kd},
                        {"lr", m.lr}};
}

inline MetricPoint metric_point_from_json(const nlohmann::json& j) {
  return MetricPoint{j.at("step").get<long>(), j.at("loss").get<double>(), j.at("loss_contrastive").get<double>(),
                     j.at("loss_kd").get<double>(), j.at("lr").get<double>()};
}

struct StepResult {
  double loss = 0.0;
  double loss_contrastive = 0.0;
  double loss_kd = 0.0;
  Matrix grad_w;
};

/// Loss and dLoss/dW for one batch. Query and passage slices are embedded per shard (possibly
/// concurrently) and the contrastive term is always computed over the pooled passage set.
inline StepResult batch_loss_and_grad(const Batch& batch, const ToyEncoderParams& params, const TrainConfig& cfg) {
  const int b = static_cast<int>(batch.queries.size());
  const int g = cfg.group_size;
  std::vector<std::string> queries;
  queries.reserve(batch.queries.size());
  for (const auto& q : batch.queries) queries.push_back(format_instruction(cfg.query_instruction, q));

  // Contiguous query slices per shard; each shard also owns its queries' passage groups.
  const int shards = std::min(cfg.shards, b);
  std::vector<int> bounds{0};
  for (int s = 0; s < shards; ++s) bounds.push_back(bounds.back() + (b - bounds.back()) / (shards - s));

  struct ShardForward {
    ToyForward q;
    ToyForward p;
  };
  std::vector<std::future<ShardForward>> jobs;
  for (int s = 0; s < shards; ++s) {
    std::vector<std::string> qs(queries.begin() + bounds[s], queries.begin() + bounds[s + 1]);
    std::vector<std::string> ps(batch.passages.begin() + static_cast<std::ptrdiff_t>(bounds[s]) * g,
                                batch.passages.begin() + static_cast<std::ptrdiff_t>(bounds[s + 1]) * g);
    auto policy = shards > 1 ? std::launch::async : std::launch::deferred;
    jobs.push_back(std::async(policy, [qs = std::move(qs), ps = std::move(ps), &params] {
      return ShardForward{toy_forward(qs, params), toy_forward(ps, params)};
    }));
  }
  std::vector<ShardForward> fw;
  for (auto& j : jobs) fw.push_back(j.get());

  Matrix pooled_p(static_cast<Eigen::Index>(b) * g, params.dim());
  Matrix all_q(b, params.dim());
  for (int s = 0; s < shards; ++s) {
    pooled_p.middleRows(static_cast<Eigen::Index>(bounds[s]) * g, fw[s].p.embeddings.rows()) = fw[s].p.embeddings;
    all_q.middleRows(bounds[s], fw[s].q.embeddings.rows()) = fw[s].q.embeddings;
  }

  std::vector<SimilarityBlock> blocks;
  std::vector<BatchLayout> layouts;
  for (int s = 0; s < shards; ++s) {
    blocks.push_back(similarity_matrix(fw[s].q.embeddings, pooled_p, cfg.temperature));
    layouts.push_back(BatchLayout{bounds[s + 1] - bounds[s], g, bounds[s] * g, b * g});
  }
  const LossAndGrad contrastive = pooled_contrastive_loss(blocks, layouts);

  StepResult out;
  out.loss_contrastive = contrastive.loss;
  Matrix grad_s = contrastive.grad;
  if (cfg.use_kd) {
    if (!batch.teacher_raw) throw ValidationError("batch lacks teacher scores");
    const SimilarityBlock full = similarity_matrix(all_q, pooled_p, cfg.temperature);
    const LossAndGrad kd = kd_loss(full, teacher_normalize(*batch.teacher_raw), BatchLayout::single(b, g));
    out.loss_kd = kd.loss;
    grad_s += kd.grad;
  }
  out.loss = total_loss(out.loss_contrastive, out.loss_kd);

  out.grad_w = Matrix::Zero(params.dim(), params.buckets());
  const Matrix grad_q = grad_wrt_queries(grad_s, pooled_p);
  const Matrix grad_p = grad_wrt_passages(grad_s, all_q);
  for (int s = 0; s < shards; ++s) {
    toy_backward_accumulate(fw[s].q.cache, grad_q.middleRows(bounds[s], bounds[s + 1] - bounds[s]), out.grad_w);
    toy_backward_accumulate(fw[s].p.cache,
                            grad_p.middleRows(static_cast<Eigen::Index>(bounds[s]) * g,
                                              static_cast<Eigen::Index>(bounds[s + 1] - bounds[s]) * g),
                            out.grad_w);
  }
  return out;
}

struct TrainResult {
  ToyEncoderParams params;
  std::vector<MetricPoint> log;
  std::vector<std::string> checkpoints;
  long steps = 0;
};

inline void write_batch_dump(const std::string& path, const Batch& batch) {
  std::string out;
  for (std::size_t i = 0; i < batch.queries.size(); ++i) {
    const auto g = batch.passages.size() / batch.queries.size();
    nlohmann::json j{{"query", batch.queries[i]},
                     {"passages", std::vector<std::string>(batch.passages.begin() + static_cast<std::ptrdiff_t>(i * g),
                                                           batch.passages.begin() + static_cast<std::ptrdiff_t>((i + 1) * g))}};
    out += j.dump();
    out.push_back('\n');
  }
  write_file(path, out);
}

/// Plain gradient descent over one or more epochs. Metrics are logged at step 1, every
/// log_every steps and at the final step; checkpoints every checkpoint_every steps and at the
/// end (only when out_dir is given).
inline TrainResult train_epoch(const std::vector<TrainInstance>& instances, ToyEncoderParams params,
                               const TrainConfig& cfg, const std::optional<std::string>& out_dir = std::nullopt) {
  cfg.validate();
  params.validate();
  std::vector<std::vector<Batch>> plan;
  long total_steps = 0;
  for (int e = 0; e < cfg.epochs; ++e) {
    plan.push_back(plan_batches(instances, cfg, static_cast<std::uint64_t>(e)));
    total_steps += static_cast<long>(plan.back().size());
  }
  if (total_steps == 0) throw ValidationError("no full batch can be formed from the training data");
  if (out_dir) std::filesystem::create_directories(*out_dir);

  TrainResult result;
  const std::uint64_t chash = config_hash(cfg);
  double sum_total = 0.0, sum_con = 0.0, sum_kd = 0.0;
  long window = 0;
  long step = 0;
  auto save = [&](long at) {
    if (!out_dir) return;
    const std::string path = (std::filesystem::path(*out_dir) / ("checkpoint-" + std::to_string(at) + ".ckpt")).string();
    write_checkpoint(path, Checkpoint{params, static_cast<std::uint64_t>(at), chash});
    result.checkpoints.push_back(path);
  };

  for (const auto& epoch : plan) {
    for (const auto& batch : epoch) {
      const double lr = lr_at(step, total_steps, cfg);
      ++step;
      StepResult r = batch_loss_and_grad(batch, params, cfg);
      if (!std::isfinite(r.loss)) {
        std::string dump = "<no output directory>";
        if (out_dir) {
          dump = (std::filesystem::path(*out_dir) / ("batch_dump_step" + std::to_string(step) + ".jsonl")).string();
          write_batch_dump(dump, batch);
        }
        throw RuntimeError("non-finite loss at step " + std::to_string(step) + "; batch dumped to " + dump);
      }
      if (lr != 0.0) params.weights -= lr * r.grad_w;
      sum_total += r.loss;
      sum_con += r.loss_contrastive;
      sum_kd += r.loss_kd;
      ++window;
      if (step == 1 || step % cfg.log_every == 0 || step == total_steps) {
        result.log.push_back(MetricPoint{step, sum_total / window, sum_con / window, sum_kd / window, lr});
        sum_total = sum_con = sum_kd = 0.0;
        window = 0;
      }
      if (step % cfg.checkpoint_every == 0 || step == total_steps) save(step);
    }
  }
  result.steps = step;
  if (out_dir) {
    std::string log;
    for (const auto& m : result.log) {
      log += to_json(m).dump();
      log.push_back('\n');
    }
    write_file((std::filesystem::path(*out_dir) / "metrics.jsonl").string(), log);
  }
  result.params = std::move(params);
  return result;
}

}  // namespace afrie5

#include "sei/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "sei/error.hpp"
#include "sei/rng.hpp"

namespace sei {

std::string_view to_string(Optimizer o) {
  return o == Optimizer::kGradientDescent ? "gd" : "adamw";
}

Optimizer optimizer_from_string(std::string_view name) {
  if (name == "gd") return Optimizer::kGradientDescent;
  if (name == "adamw") return Optimizer::kAdamW;
  throw ConfigError("unknown optimizer: '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  if (in_batch_negatives && batch_size < 2) {
    throw ConfigError("batch_size must be >= 2 when in_batch_negatives is on");
  }
  if (learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
  if (warmup_steps < 0) throw ConfigError("warmup_steps must be non-negative");
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be non-negative");
  if (epochs < 1) throw ConfigError("epochs must be positive");
  if (temperature <= 0.0) throw ConfigError("temperature must be positive");
  if (negatives_per_example < 1) throw ConfigError("negatives_per_example must be positive");
}

namespace {

// Per-text state shared within one gradient evaluation. Texts are deduplicated
// by content so a positive reused as several in-batch negatives is featurized
// once and its embedding-gradient contributions accumulate in one slot.
struct TextSlot {
  SparseVector features;
  std::vector<double> embedding;
  std::vector<double> grad;  // dL/d(embedding)
  double norm = 0.0;
};

class TextCache {
 public:
  TextCache(const EmbedderParams& params, bool with_grad)
      : params_(params), with_grad_(with_grad) {}

  // Returns a stable slot id for the effective text.
  std::size_t slot_for(std::string_view instruction, std::string_view text) {
    std::string key;
    if (params_.instruction_mode == InstructionMode::kPrepend && !trim(instruction).empty()) {
      key.reserve(instruction.size() + 1 + text.size());
      key.append(instruction);
      key.push_back('\n');
      key.append(text);
    } else {
      key.assign(text);
    }
    auto it = index_.find(key);
    if (it != index_.end()) return it->second;

    TextSlot slot;
    slot.features = featurize(params_.featurizer, key);
    slot.embedding.assign(static_cast<std::size_t>(params_.dim), 0.0);
    const int d = params_.dim;
    for (const auto& [bucket, w] : slot.features.entries) {
      const double* row = params_.projection.data() +
                          static_cast<std::size_t>(bucket) * static_cast<std::size_t>(d);
      for (int k = 0; k < d; ++k) slot.embedding[static_cast<std::size_t>(k)] += w * row[k];
    }
    double n2 = 0.0;
    for (double v : slot.embedding) n2 += v * v;
    slot.norm = std::sqrt(n2);
    if (with_grad_) slot.grad.assign(static_cast<std::size_t>(params_.dim), 0.0);

    const std::size_t id = slots_.size();
    slots_.push_back(std::move(slot));
    index_.emplace(std::move(key), id);
    return id;
  }

  TextSlot& slot(std::size_t id) { return slots_[id]; }
  const std::vector<TextSlot>& slots() const { return slots_; }

 private:
  const EmbedderParams& params_;
  bool with_grad_;
  std::vector<TextSlot> slots_;
  std::unordered_map<std::string, std::size_t> index_;
};

double cosine(const TextSlot& a, const TextSlot& b) {
  if (a.norm == 0.0 || b.norm == 0.0) return 0.0;
  double dot = 0.0;
  for (std::size_t i = 0; i < a.embedding.size(); ++i) dot += a.embedding[i] * b.embedding[i];
  return std::clamp(dot / (a.norm * b.norm), -1.0, 1.0);
}

// Adds dL/ds * d cos(u, v)/du into u.grad and the v-side into v.grad.
// Zero-norm embeddings contribute nothing (similarity is 0 by convention).
void accumulate_cosine_grad(TextSlot& u, TextSlot& v, double cos_uv, double dl_ds) {
  if (u.norm == 0.0 || v.norm == 0.0 || dl_ds == 0.0) return;
  const std::size_t d = u.embedding.size();
  for (std::size_t k = 0; k < d; ++k) {
    const double u_hat = u.embedding[k] / u.norm;
    const double v_hat = v.embedding[k] / v.norm;
    u.grad[k] += dl_ds * (v_hat - cos_uv * u_hat) / u.norm;
    v.grad[k] += dl_ds * (u_hat - cos_uv * v_hat) / v.norm;
  }
}

struct InstanceSlots {
  std::size_t query;
  std::size_t positive;
  std::vector<std::size_t> negatives;
};

// Loss of one instance given resolved slots; optionally backpropagates into
// the slots' embedding gradients (scaled by `grad_scale`).
double instance_loss(TextCache& cache, const InstanceSlots& inst, double temperature,
                     bool with_grad, double grad_scale) {
  if (inst.negatives.empty()) throw ValidationError("contrastive loss requires >= 1 negative");

  TextSlot& q = cache.slot(inst.query);
  TextSlot& p = cache.slot(inst.positive);

  const double s_pos = cosine(q, p);
  std::vector<double> s_neg(inst.negatives.size());
  for (std::size_t j = 0; j < inst.negatives.size(); ++j) {
    s_neg[j] = cosine(q, cache.slot(inst.negatives[j]));
  }

  const double inv_t = 1.0 / temperature;
  double max_z = s_pos * inv_t;
  for (double s : s_neg) max_z = std::max(max_z, s * inv_t);

  // log1p over the non-max terms keeps the loss strictly positive even when
  // the positive dominates far enough that 1 + rest would round to 1.
  double rest = 0.0;
  bool anchored = s_pos * inv_t == max_z;  // the positive absorbs the max slot
  if (!anchored) rest += std::exp(s_pos * inv_t - max_z);
  bool max_spent = anchored;
  for (double s : s_neg) {
    if (!max_spent && s * inv_t == max_z) {
      max_spent = true;
      continue;
    }
    rest += std::exp(s * inv_t - max_z);
  }
  const double loss = std::log1p(rest) + (max_z - s_pos * inv_t);
  const double denom = 1.0 + rest;

  if (with_grad) {
    const double w_pos = std::exp(s_pos * inv_t - max_z) / denom;
    accumulate_cosine_grad(q, p, s_pos, grad_scale * (w_pos - 1.0) * inv_t);
    for (std::size_t j = 0; j < inst.negatives.size(); ++j) {
      const double w_j = std::exp(s_neg[j] * inv_t - max_z) / denom;
      accumulate_cosine_grad(q, cache.slot(inst.negatives[j]), s_neg[j],
                             grad_scale * w_j * inv_t);
    }
  }
  return loss;
}

InstanceSlots resolve(TextCache& cache, const ContrastiveInstance& inst) {
  InstanceSlots slots;
  slots.query = cache.slot_for(inst.instruction, inst.query);
  slots.positive = cache.slot_for({}, inst.positive);
  slots.negatives.reserve(inst.negatives.size());
  for (auto n : inst.negatives) slots.negatives.push_back(cache.slot_for({}, n));
  return slots;
}

}  // namespace

double contrastive_loss(const EmbedderParams& params, const ContrastiveInstance& instance,
                        double temperature) {
  if (temperature <= 0.0) throw ConfigError("temperature must be positive");
  TextCache cache(params, /*with_grad=*/false);
  const InstanceSlots slots = resolve(cache, instance);
  return instance_loss(cache, slots, temperature, /*with_grad=*/false, 0.0);
}

double loss_gradient(const EmbedderParams& params, std::span<const ContrastiveInstance> batch,
                     double temperature, std::vector<double>& grad_out) {
  if (temperature <= 0.0) throw ConfigError("temperature must be positive");
  if (batch.empty()) throw ValidationError("loss_gradient requires a non-empty batch");

  TextCache cache(params, /*with_grad=*/true);
  std::vector<InstanceSlots> resolved;
  resolved.reserve(batch.size());
  for (const auto& inst : batch) resolved.push_back(resolve(cache, inst));

  const double scale = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (std::size_t i = 0; i < resolved.size(); ++i) {
    const double l = instance_loss(cache, resolved[i], temperature, /*with_grad=*/true, scale);
    if (!std::isfinite(l)) {
      throw ValidationError("non-finite loss at batch instance " + std::to_string(i));
    }
    total += l;
  }

  grad_out.assign(params.projection.size(), 0.0);
  const int d = params.dim;
  for (const auto& slot : cache.slots()) {
    for (const auto& [bucket, w] : slot.features.entries) {
      double* row = grad_out.data() + static_cast<std::size_t>(bucket) * static_cast<std::size_t>(d);
      for (int k = 0; k < d; ++k) row[k] += w * slot.grad[static_cast<std::size_t>(k)];
    }
  }
  return total * scale;
}

TrainReport train(const Dataset& dataset, const EmbedderParams& base_params,
                  const TrainConfig& config) {
  config.validate();
  base_params.validate();
  if (dataset.empty()) throw ValidationError("train requires a non-empty dataset");
  if (!config.in_batch_negatives) {
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      if (!dataset[i].negative.has_value()) {
        throw ValidationError("example " + std::to_string(i) +
                              " has no negative and in_batch_negatives is off");
      }
    }
  }

  const auto t0 = std::chrono::steady_clock::now();

  TrainReport report;
  report.final_params = base_params;
  EmbedderParams& params = report.final_params;

  std::vector<double> grad;
  std::vector<double> m, v;  // AdamW moments
  if (config.optimizer == Optimizer::kAdamW) {
    m.assign(params.projection.size(), 0.0);
    v.assign(params.projection.size(), 0.0);
  }
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kAdamEps = 1e-8;

  Rng rng(config.seed);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);

  int step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));

      std::vector<ContrastiveInstance> batch;
      batch.reserve(stop - start);
      for (std::size_t b = start; b < stop; ++b) {
        const SyntheticExample& ex = dataset[order[b]];
        ContrastiveInstance inst;
        inst.instruction = ex.instruction;
        inst.query = ex.query;
        inst.positive = ex.positive;
        if (ex.negative.has_value() && config.negatives_per_example >= 1) {
          inst.negatives.push_back(*ex.negative);
        }
        if (config.in_batch_negatives) {
          for (std::size_t o = start; o < stop; ++o) {
            if (o == b) continue;
            inst.negatives.push_back(dataset[order[o]].positive);
          }
        }
        if (inst.negatives.empty()) continue;  // lone trailing instance, nothing to contrast
        batch.push_back(std::move(inst));
      }
      if (batch.empty()) continue;

      const double loss = loss_gradient(params, batch, config.temperature, grad);
      if (!std::isfinite(loss)) {
        throw ValidationError("training diverged (non-finite loss) at step " + std::to_string(step));
      }

      const double warmup =
          config.warmup_steps > 0
              ? std::min(1.0, static_cast<double>(step + 1) / static_cast<double>(config.warmup_steps))
              : 1.0;
      const double lr = config.learning_rate * warmup;

      if (config.optimizer == Optimizer::kGradientDescent) {
        const double decay = 1.0 - lr * config.weight_decay;
        for (std::size_t i = 0; i < params.projection.size(); ++i) {
          params.projection[i] = params.projection[i] * decay - lr * grad[i];
        }
      } else {
        const double bc1 = 1.0 - std::pow(kBeta1, step + 1);
        const double bc2 = 1.0 - std::pow(kBeta2, step + 1);
        const double decay = 1.0 - lr * config.weight_decay;
        for (std::size_t i = 0; i < params.projection.size(); ++i) {
          m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * grad[i];
          v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * grad[i] * grad[i];
          const double update = (m[i] / bc1) / (std::sqrt(v[i] / bc2) + kAdamEps);
          params.projection[i] = params.projection[i] * decay - lr * update;
        }
      }

      report.loss_curve.emplace_back(step, loss);
      report.examples_seen += static_cast<std::int64_t>(batch.size());
      ++step;
    }
  }

  if (report.loss_curve.empty()) {
    throw ValidationError("no trainable batches: every instance lacked a usable negative");
  }

  report.wall_time_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                            std::chrono::steady_clock::now() - t0)
                            .count();
  return report;
}

}  // namespace sei

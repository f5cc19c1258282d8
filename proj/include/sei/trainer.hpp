#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sei/core.hpp"
#include "sei/embedder.hpp"

namespace sei {

enum class Optimizer { kGradientDescent, kAdamW };

std::string_view to_string(Optimizer o);
Optimizer optimizer_from_string(std::string_view name);

struct TrainConfig {
  int batch_size = 64;
  double learning_rate = 1e-2;
  int warmup_steps = 100;
  double weight_decay = 0.1;
  int epochs = 1;
  double temperature = 1.0;  // 1.0 keeps the plain softmax-over-similarities objective
  int negatives_per_example = 1;
  bool in_batch_negatives = true;
  Optimizer optimizer = Optimizer::kGradientDescent;
  std::uint64_t seed = 0;

  void validate() const;
};

// One loss instance: a query (with its instruction), its positive, and one
// or more negative texts. Views must outlive the call.
struct ContrastiveInstance {
  std::string_view instruction;
  std::string_view query;
  std::string_view positive;
  std::vector<std::string_view> negatives;
};

// Softmax contrastive loss over cosine similarities:
//   L = -log( exp(s+/t) / (exp(s+/t) + sum_j exp(s-_j/t)) )
// computed with log-sum-exp stabilization. Always finite and > 0.
// Throws ValidationError when the negative list is empty.
double contrastive_loss(const EmbedderParams& params, const ContrastiveInstance& instance,
                        double temperature);

// Analytic gradient of the mean batch loss with respect to the projection
// matrix (flattened, same layout as EmbedderParams::projection). Returns the
// mean loss. Accumulation order is fixed, so results are bit-reproducible.
double loss_gradient(const EmbedderParams& params, std::span<const ContrastiveInstance> batch,
                     double temperature, std::vector<double>& grad_out);

struct TrainReport {
  std::vector<std::pair<int, double>> loss_curve;  // (step, mean batch loss)
  EmbedderParams final_params;
  std::int64_t examples_seen = 0;
  std::int64_t wall_time_ms = 0;
};

// Shuffled minibatch training with linear warmup and decoupled weight decay.
// Negatives per instance: the example's own negative (when present, capped
// at negatives_per_example) plus every other in-batch positive when
// in_batch_negatives is on. Instances that end up with no negatives at all
// (a trailing batch of one, no stored negative) are skipped.
// Throws ValidationError on divergence, naming the step.
TrainReport train(const Dataset& dataset, const EmbedderParams& base_params,
                  const TrainConfig& config);

}  // namespace sei

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "attnie/features.h"
#include "attnie/metrics.h"
#include "attnie/model.h"
#include "attnie/tensor.h"

namespace attnie {

// Mean binary cross-entropy over labels; confidences are clamped to
// [1e-7, 1-1e-7] and the clamp passes no gradient.
inline constexpr double kLossClamp = 1e-7;
Tensor bce_loss(const Tensor& confidences, std::span<const double> targets);

struct AdamConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::size_t step = 0;
};

// Bias-corrected Adam update of every parameter that requires grad, using
// `grads` (one vector per parameter). State is sized on first use and must
// match the parameters afterwards.
void adam_step(const std::vector<Tensor>& params,
               const std::vector<std::vector<double>>& grads, AdamState& state,
               const AdamConfig& config);
// Same, reading each parameter's accumulated gradient.
void adam_step(const std::vector<Tensor>& params, AdamState& state,
               const AdamConfig& config);

struct TrainConfig {
  double learning_rate = 0.001;
  double dropout = 0.1;
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;
  std::size_t patience = 7;  // 0 disables early stopping
  std::size_t ensemble_train = 20;
  std::size_t ensemble_keep = 5;
  double validation_fraction = 0.15;
  double threshold = 0.5;
  // Stop once validation micro-F reaches this value.
  double target_f = 2.0;
  std::size_t jobs = 0;  // 0 = hardware concurrency

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;  // epoch 0: eval-mode loss before any update
  PRF validation;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_f = 0.0;
};

// Minibatch Adam with seeded shuffling and dropout. Tracks validation
// micro-F after every epoch and leaves the model holding the parameters of
// the best epoch (earliest on ties). Throws ConfigError on an empty
// partition.
TrainResult train(Model& model, const std::vector<EncodedExample>& train_set,
                  const std::vector<EncodedExample>& validation_set,
                  const TrainConfig& config);

// Mean eval-mode loss over `examples`.
double mean_loss(const Model& model, const std::vector<EncodedExample>& examples);
Confidences predict_all(const Model& model, const std::vector<EncodedExample>& examples);
std::vector<std::vector<double>> targets_of(const std::vector<EncodedExample>& examples);

// epoch,loss,precision,recall,f1
std::string history_csv(const TrainResult& result);

struct MemberScore {
  std::size_t index = 0;
  std::uint64_t split_seed = 0;
  double validation_f = 0.0;
};

struct Member {
  Model model;
  MemberScore score;
  TrainResult result;
};

// Kept members sorted by validation micro-F, descending (lower index first
// on ties); `trained` lists every member by index.
struct Ensemble {
  std::vector<Member> members;
  std::vector<MemberScore> trained;

  std::size_t label_count() const;
};

// Seed of member `index`'s train/validation split.
std::uint64_t split_seed(std::uint64_t seed, std::size_t index);

// Trains config.ensemble_train models, each on its own seeded random split
// and with model seed base.seed + index, then keeps the best
// config.ensemble_keep. Members train in parallel on config.jobs threads;
// results do not depend on the thread count.
Ensemble train_ensemble(const std::vector<EncodedExample>& data, const ModelConfig& base,
                        const Vocab& vocab, const WordVectors* vectors,
                        const TrainConfig& config);

// Arithmetic mean of the member confidences per label.
std::vector<double> ensemble_predict(const Ensemble& ensemble, const EncodedExample& example);
Confidences ensemble_predict_all(const Ensemble& ensemble,
                                 const std::vector<EncodedExample>& examples);

// member<k>.ckpt/.json under `dir`, plus scores.csv.
void save_ensemble(const Ensemble& ensemble, const std::filesystem::path& dir);
Ensemble load_ensemble(const std::filesystem::path& dir);

// Runs `task(i)` for i in [0, count) on up to `jobs` threads.
void parallel_for(std::size_t count, std::size_t jobs,
                  const std::function<void(std::size_t)>& task);

}  // namespace attnie

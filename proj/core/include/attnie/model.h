#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "attnie/checkpoint.h"
#include "attnie/features.h"
#include "attnie/layers.h"
#include "attnie/tensor.h"

namespace attnie {

// The five lane topologies. Each lane pairs one attention block and/or one
// convolution width; lane outputs are max-pooled and concatenated.
enum class Variant {
  kFourCnn,         // conv(w_i) -> pool
  kOneMha,          // one attention block -> pool
  kFourMha,         // attention_i -> pool
  kFourCnnFourMha,  // conv(w_i) -> attention_i -> pool
  kFourMhaFourCnn,  // attention_i -> conv(w_i) -> pool
};

std::string variant_name(Variant v);  // "4cnn", "1mha", "4mha", ...
Variant parse_variant(std::string_view name);
const std::vector<Variant>& all_variants();

struct ArchitectureConfig {
  Variant variant = Variant::kFourMhaFourCnn;
  std::size_t filters = 64;
  std::size_t heads = 8;
  std::vector<std::size_t> widths{1, 3, 5, 7};
  bool scale_by_model_width = true;
  double dropout = 0.1;

  // Widths odd and strictly increasing; filters, heads >= 1.
  void validate() const;
  std::size_t lane_count() const;
  bool uses_attention() const { return variant != Variant::kFourCnn; }
};

struct Lane {
  std::optional<AttentionParams> attention;
  std::optional<ConvParams> conv;
  bool attention_first = true;
};

struct NetworkOutput {
  Tensor confidences;                   // [L], sigmoid outputs
  Tensor pooled;                        // merged pooled vector, pre-dropout
  std::vector<Tensor> lane_sequences;   // per-lane [I, *] before pooling
  std::vector<AttentionTrace> traces;   // one per attention block
};

// Lanes plus the sigmoid output layer, operating on an embedded sequence.
class Network {
 public:
  Network() = default;

  // Throws ConfigError when an attention block's width is not divisible by
  // the head count.
  static Network build(const ArchitectureConfig& arch, std::size_t input_width,
                       std::size_t labels, std::uint64_t seed);

  NetworkOutput forward(const Tensor& input, bool train_mode,
                        std::mt19937_64* rng, bool collect_traces) const;

  const ArchitectureConfig& arch() const { return arch_; }
  std::size_t input_width() const { return input_width_; }
  std::size_t pooled_width() const { return pooled_width_; }
  std::size_t label_count() const { return output_b_.dim(0); }
  const std::vector<Lane>& lanes() const { return lanes_; }
  std::vector<Lane>& mutable_lanes() { return lanes_; }
  Tensor& output_weight() { return output_w_; }
  void set_dropout(double rate) { arch_.dropout = rate; }
  Tensor& output_bias() { return output_b_; }

  void append_named(std::vector<NamedTensor>& out) const;

 private:
  ArchitectureConfig arch_;
  std::size_t input_width_ = 0;
  std::size_t pooled_width_ = 0;
  std::vector<Lane> lanes_;
  Tensor output_w_;  // [pooled, L]
  Tensor output_b_;  // [L]
};

// Builds the lane topology for `variant` over inputs of width `input_width`.
Network build_model(const ArchitectureConfig& arch, std::size_t input_width,
                    std::size_t labels, std::uint64_t seed);

struct ModelConfig {
  ArchitectureConfig arch;
  FeatureConfig features;
  std::vector<std::string> labels;
  std::uint64_t seed = 1;
};

struct ForwardResult {
  Tensor confidences;
  std::vector<AttentionTrace> traces;
};

// Embedding tables + network + label inventory. Copies share parameter
// storage; use clone() for an independent model.
class Model {
 public:
  Model() = default;

  // The embedding width is padded up to a multiple of the head count with
  // zero channels so the residual connection stays well-typed.
  static Model build(const ModelConfig& config, Vocab vocab,
                     const WordVectors* vectors = nullptr);

  ForwardResult forward(const EncodedExample& example, bool train_mode,
                        std::mt19937_64* rng = nullptr) const;
  NetworkOutput run(const EncodedExample& example, bool train_mode,
                    std::mt19937_64* rng, bool collect_traces) const;
  std::vector<double> predict(const EncodedExample& example) const;

  const ModelConfig& config() const { return config_; }
  const Vocab& vocab() const { return vocab_; }
  const FeatureTables& tables() const { return tables_; }
  const Network& network() const { return network_; }
  Network& mutable_network() { return network_; }
  // Throws ConfigError outside [0,1).
  void set_dropout(double rate);
  std::size_t input_width() const { return network_.input_width(); }
  std::size_t label_count() const { return config_.labels.size(); }

  // Every tensor including the frozen word table, in a fixed order.
  std::vector<NamedTensor> named_parameters() const;
  std::vector<Tensor> trainable_parameters() const;
  // Copies values by name; names and shapes must match exactly.
  void load_parameters(const std::vector<NamedTensor>& tensors);
  Model clone() const;

 private:
  ModelConfig config_;
  Vocab vocab_;
  FeatureTables tables_;
  Network network_;
};

// <stem>.ckpt holds the tensors, <stem>.json the configuration, label
// inventory and vocabulary.
void save_model(const Model& model, const std::filesystem::path& stem);
Model load_model(const std::filesystem::path& stem);

}  // namespace attnie

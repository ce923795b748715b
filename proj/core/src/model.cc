#include "attnie/model.h"

#include <algorithm>
#include <fstream>
#include <map>

#include "attnie/errors.h"
#include "attnie/ops.h"
#include "json.hpp"

namespace attnie {
namespace {

constexpr int kSidecarVersion = 1;

using nlohmann::json;

}  // namespace

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kFourCnn: return "4cnn";
    case Variant::kOneMha: return "1mha";
    case Variant::kFourMha: return "4mha";
    case Variant::kFourCnnFourMha: return "4cnn-4mha";
    case Variant::kFourMhaFourCnn: return "4mha-4cnn";
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  for (Variant v : all_variants()) {
    if (variant_name(v) == name) return v;
  }
  throw ConfigError("unknown variant '" + std::string(name) +
                    "' (expected 4cnn, 1mha, 4mha, 4cnn-4mha or 4mha-4cnn)");
}

const std::vector<Variant>& all_variants() {
  static const std::vector<Variant> kAll = {
      Variant::kFourCnn, Variant::kOneMha, Variant::kFourMha,
      Variant::kFourCnnFourMha, Variant::kFourMhaFourCnn};
  return kAll;
}

void ArchitectureConfig::validate() const {
  if (filters == 0) throw ConfigError("filters must be >= 1");
  if (heads == 0) throw ConfigError("heads must be >= 1");
  if (widths.empty()) throw ConfigError("at least one convolution width needed");
  for (std::size_t i = 0; i < widths.size(); ++i) {
    if (widths[i] % 2 == 0) {
      throw ConfigError("convolution widths must be odd, got " +
                        std::to_string(widths[i]));
    }
    if (i > 0 && widths[i] <= widths[i - 1]) {
      throw ConfigError("convolution widths must be strictly increasing");
    }
  }
  if (dropout < 0.0 || dropout >= 1.0) {
    throw ConfigError("dropout must lie in [0,1)");
  }
}

std::size_t ArchitectureConfig::lane_count() const {
  return variant == Variant::kOneMha ? 1 : widths.size();
}

Network Network::build(const ArchitectureConfig& arch, std::size_t input_width,
                       std::size_t labels, std::uint64_t seed) {
  arch.validate();
  if (labels == 0) throw ConfigError("model needs at least one label");
  if (input_width == 0) throw ConfigError("input width must be positive");
  Network net;
  net.arch_ = arch;
  net.input_width_ = input_width;
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < arch.lane_count(); ++i) {
    Lane lane;
    const std::size_t w = arch.widths[i];
    switch (arch.variant) {
      case Variant::kFourCnn:
        lane.conv = ConvParams::init(w, input_width, arch.filters, rng);
        net.pooled_width_ += arch.filters;
        break;
      case Variant::kOneMha:
      case Variant::kFourMha:
        lane.attention = AttentionParams::init(input_width, arch.heads, rng);
        net.pooled_width_ += input_width;
        break;
      case Variant::kFourMhaFourCnn:
        lane.attention = AttentionParams::init(input_width, arch.heads, rng);
        lane.conv = ConvParams::init(w, input_width, arch.filters, rng);
        net.pooled_width_ += arch.filters;
        break;
      case Variant::kFourCnnFourMha:
        lane.attention_first = false;
        lane.conv = ConvParams::init(w, input_width, arch.filters, rng);
        lane.attention = AttentionParams::init(arch.filters, arch.heads, rng);
        net.pooled_width_ += arch.filters;
        break;
    }
    net.lanes_.push_back(std::move(lane));
  }
  const double limit = glorot_limit(net.pooled_width_, labels);
  std::uniform_real_distribution<double> dist(-limit, limit);
  std::vector<double> w(net.pooled_width_ * labels);
  for (double& x : w) x = dist(rng);
  net.output_w_ = Tensor::from({net.pooled_width_, labels}, std::move(w), true);
  net.output_b_ = Tensor::zeros({labels}, true);
  return net;
}

NetworkOutput Network::forward(const Tensor& input, bool train_mode,
                               std::mt19937_64* rng,
                               bool collect_traces) const {
  if (input.rank() != 2 || input.dim(1) != input_width_) {
    throw DimensionError("network expects [I," + std::to_string(input_width_) +
                         "] input, got " + shape_string(input.shape()));
  }
  const bool drop = train_mode && arch_.dropout > 0.0;
  if (drop && rng == nullptr) {
    throw ContractError("training-mode forward needs a random generator");
  }
  AttentionOptions attn_opts;
  attn_opts.scale_by_model_width = arch_.scale_by_model_width;
  attn_opts.collect_trace = collect_traces;

  NetworkOutput out;
  Tensor x = drop ? dropout(input, arch_.dropout, *rng) : input;
  std::vector<Tensor> pooled_parts;
  for (const Lane& lane : lanes_) {
    Tensor seq = x;
    if (lane.attention_first) {
      if (lane.attention) {
        AttentionResult r = multi_head_attention(seq, *lane.attention, attn_opts);
        seq = r.output;
        if (collect_traces) out.traces.push_back(std::move(r.trace));
      }
      if (lane.conv) seq = conv_relu(seq, *lane.conv);
    } else {
      seq = conv_relu(seq, *lane.conv);
      AttentionResult r = multi_head_attention(seq, *lane.attention, attn_opts);
      seq = r.output;
      if (collect_traces) out.traces.push_back(std::move(r.trace));
    }
    out.lane_sequences.push_back(seq);
    pooled_parts.push_back(global_max_pool(seq));
  }
  out.pooled = pooled_parts.size() == 1 ? pooled_parts[0] : concat(pooled_parts);
  Tensor h = drop ? dropout(out.pooled, arch_.dropout, *rng) : out.pooled;
  Tensor logits = matmul(reshape(h, {1, pooled_width_}), output_w_);
  out.confidences =
      sigmoid(add(reshape(logits, {label_count()}), output_b_));
  return out;
}

void Network::append_named(std::vector<NamedTensor>& out) const {
  for (std::size_t i = 0; i < lanes_.size(); ++i) {
    const std::string prefix = "lane" + std::to_string(i);
    if (lanes_[i].attention) lanes_[i].attention->append_named(prefix + ".mha", out);
    if (lanes_[i].conv) lanes_[i].conv->append_named(prefix + ".conv", out);
  }
  out.push_back({"output.weight", output_w_});
  out.push_back({"output.bias", output_b_});
}

Network build_model(const ArchitectureConfig& arch, std::size_t input_width,
                    std::size_t labels, std::uint64_t seed) {
  return Network::build(arch, input_width, labels, seed);
}

Model Model::build(const ModelConfig& config, Vocab vocab,
                   const WordVectors* vectors) {
  config.arch.validate();
  config.features.validate();
  Model m;
  m.config_ = config;
  m.vocab_ = std::move(vocab);
  m.tables_ = make_feature_tables(m.vocab_, config.features, config.seed, vectors);
  const std::size_t width = config.arch.uses_attention()
                                ? padded_width(config.features.feature_width(),
                                               config.arch.heads)
                                : config.features.feature_width();
  m.network_ = Network::build(config.arch, width, config.labels.size(),
                              config.seed);
  return m;
}

NetworkOutput Model::run(const EncodedExample& example, bool train_mode,
                         std::mt19937_64* rng, bool collect_traces) const {
  if (!example.labels.empty() && example.labels.size() != label_count()) {
    throw EncodingError("example carries " +
                        std::to_string(example.labels.size()) +
                        " labels, model has " + std::to_string(label_count()));
  }
  Tensor e = embed(example, tables_, config_.features, input_width());
  return network_.forward(e, train_mode, rng, collect_traces);
}

ForwardResult Model::forward(const EncodedExample& example, bool train_mode,
                             std::mt19937_64* rng) const {
  NetworkOutput out = run(example, train_mode, rng, true);
  return {out.confidences, std::move(out.traces)};
}

std::vector<double> Model::predict(const EncodedExample& example) const {
  NetworkOutput out = run(example, false, nullptr, false);
  auto c = out.confidences.data();
  return {c.begin(), c.end()};
}

void Model::set_dropout(double rate) {
  if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout must lie in [0,1)");
  config_.arch.dropout = rate;
  network_.set_dropout(rate);
}

std::vector<NamedTensor> Model::named_parameters() const {
  std::vector<NamedTensor> out;
  for (const EmbeddingTable* t : tables_.all()) {
    out.push_back({"embed." + t->name, t->weights});
  }
  network_.append_named(out);
  return out;
}

std::vector<Tensor> Model::trainable_parameters() const {
  std::vector<Tensor> out;
  for (const auto& [name, t] : named_parameters()) {
    if (t.requires_grad()) out.push_back(t);
  }
  return out;
}

void Model::load_parameters(const std::vector<NamedTensor>& tensors) {
  std::map<std::string, const Tensor*> by_name;
  for (const auto& nt : tensors) by_name[nt.name] = &nt.tensor;
  auto params = named_parameters();
  if (params.size() != tensors.size()) {
    throw FormatError("checkpoint holds " + std::to_string(tensors.size()) +
                      " tensors, model expects " + std::to_string(params.size()));
  }
  for (auto& [name, t] : params) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw FormatError("checkpoint lacks tensor " + name);
    if (it->second->shape() != t.shape()) {
      throw FormatError("tensor " + name + " has shape " +
                        shape_string(it->second->shape()) + ", model expects " +
                        shape_string(t.shape()));
    }
    auto src = it->second->data();
    std::copy(src.begin(), src.end(), t.mutable_data().begin());
  }
}

Model Model::clone() const {
  Model copy = Model::build(config_, vocab_);
  copy.load_parameters(named_parameters());
  return copy;
}

void save_model(const Model& model, const std::filesystem::path& stem) {
  const ModelConfig& c = model.config();
  json j;
  j["format"] = "attnie-model";
  j["version"] = kSidecarVersion;
  j["variant"] = variant_name(c.arch.variant);
  j["filters"] = c.arch.filters;
  j["heads"] = c.arch.heads;
  j["widths"] = c.arch.widths;
  j["scale_by_model_width"] = c.arch.scale_by_model_width;
  j["dropout"] = c.arch.dropout;
  j["features"] = {{"word_dim", c.features.word_dim},
                   {"role_dim", c.features.role_dim},
                   {"distance_dim", c.features.distance_dim},
                   {"max_distance", c.features.max_distance},
                   {"max_window", c.features.max_window},
                   {"distance_anchors", c.features.distance_anchors},
                   {"use_roles", c.features.use_roles},
                   {"use_distances", c.features.use_distances},
                   {"pad_to_window", c.features.pad_to_window}};
  j["labels"] = c.labels;
  j["seed"] = c.seed;
  j["input_width"] = model.input_width();
  j["vocab"] = model.vocab().tokens();

  std::filesystem::path ckpt = stem;
  ckpt += ".ckpt";
  std::filesystem::path side = stem;
  side += ".json";
  save_checkpoint(ckpt, model.named_parameters());
  std::ofstream out(side, std::ios::trunc);
  if (!out) throw IngestionError("cannot write " + side.string());
  out << j.dump(1) << "\n";
}

Model load_model(const std::filesystem::path& stem) {
  std::filesystem::path ckpt = stem;
  ckpt += ".ckpt";
  std::filesystem::path side = stem;
  side += ".json";
  std::ifstream in(side);
  if (!in) throw IngestionError("cannot open model sidecar " + side.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError(side.string() + ": " + e.what());
  }
  try {
    if (j.at("format") != "attnie-model") {
      throw FormatError(side.string() + " is not a model sidecar");
    }
    const int version = j.at("version").get<int>();
    if (version != kSidecarVersion) {
      throw FormatError(side.string() + ": sidecar version " +
                        std::to_string(version) + " unsupported (expected " +
                        std::to_string(kSidecarVersion) + ")");
    }
    ModelConfig c;
    c.arch.variant = parse_variant(j.at("variant").get<std::string>());
    c.arch.filters = j.at("filters").get<std::size_t>();
    c.arch.heads = j.at("heads").get<std::size_t>();
    c.arch.widths = j.at("widths").get<std::vector<std::size_t>>();
    c.arch.scale_by_model_width = j.at("scale_by_model_width").get<bool>();
    c.arch.dropout = j.at("dropout").get<double>();
    const json& f = j.at("features");
    c.features.word_dim = f.at("word_dim").get<std::size_t>();
    c.features.role_dim = f.at("role_dim").get<std::size_t>();
    c.features.distance_dim = f.at("distance_dim").get<std::size_t>();
    c.features.max_distance = f.at("max_distance").get<int>();
    c.features.max_window = f.at("max_window").get<std::size_t>();
    c.features.distance_anchors = f.at("distance_anchors").get<std::size_t>();
    c.features.use_roles = f.at("use_roles").get<bool>();
    c.features.use_distances = f.at("use_distances").get<bool>();
    c.features.pad_to_window = f.at("pad_to_window").get<bool>();
    c.labels = j.at("labels").get<std::vector<std::string>>();
    c.seed = j.at("seed").get<std::uint64_t>();
    Model m = Model::build(
        c, Vocab::from_tokens(j.at("vocab").get<std::vector<std::string>>()));
    if (m.input_width() != j.at("input_width").get<std::size_t>()) {
      throw FormatError(side.string() + ": input width disagrees with config");
    }
    m.load_parameters(load_checkpoint(ckpt));
    return m;
  } catch (const json::exception& e) {
    throw FormatError(side.string() + ": " + e.what());
  }
}

}  // namespace attnie

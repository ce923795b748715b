#include "attnie/training.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "attnie/errors.h"
#include "attnie/ops.h"

namespace attnie {
namespace {

using Snapshot = std::vector<std::vector<double>>;

Snapshot snapshot(const std::vector<Tensor>& params) {
  Snapshot s;
  for (const auto& p : params) s.emplace_back(p.data().begin(), p.data().end());
  return s;
}

void restore(std::vector<Tensor>& params, const Snapshot& s) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    std::copy(s[i].begin(), s[i].end(), params[i].mutable_data().begin());
  }
}

std::string format_metric(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9f", v);
  return buf;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

Tensor bce_loss(const Tensor& confidences, std::span<const double> targets) {
  if (confidences.rank() != 1 || confidences.size() != targets.size()) {
    throw DimensionError("bce_loss: confidences " + shape_string(confidences.shape()) +
                         " vs " + std::to_string(targets.size()) + " targets");
  }
  const std::size_t n = targets.size();
  if (n == 0) throw DimensionError("bce_loss over zero labels");
  auto p = confidences.data();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double q = std::clamp(p[i], kLossClamp, 1.0 - kLossClamp);
    total -= targets[i] * std::log(q) + (1.0 - targets[i]) * std::log(1.0 - q);
  }
  std::vector<double> t(targets.begin(), targets.end());
  return make_op_result("bce_loss", {}, {total / static_cast<double>(n)}, {confidences},
                        [t = std::move(t)](detail::Node& o) {
    auto& in = *o.inputs[0];
    auto& g = in.ensure_grad();
    const double scale_by = o.grad[0] / static_cast<double>(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double q = in.value[i];
      if (q < kLossClamp || q > 1.0 - kLossClamp) continue;
      g[i] += scale_by * (-t[i] / q + (1.0 - t[i]) / (1.0 - q));
    }
  });
}

void adam_step(const std::vector<Tensor>& params,
               const std::vector<std::vector<double>>& grads, AdamState& state,
               const AdamConfig& config) {
  if (grads.size() != params.size()) {
    throw ContractError("adam_step: " + std::to_string(grads.size()) + " gradients for " +
                        std::to_string(params.size()) + " parameters");
  }
  if (state.m.empty() && state.step == 0) {
    for (const auto& p : params) {
      state.m.emplace_back(p.size(), 0.0);
      state.v.emplace_back(p.size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw ContractError("adam_step: state size mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state.m[i].size() != params[i].size() || grads[i].size() != params[i].size()) {
      throw ContractError("adam_step: shape mismatch for parameter " + std::to_string(i));
    }
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].requires_grad()) continue;
    Tensor p = params[i];
    auto w = p.mutable_data();
    auto& m = state.m[i];
    auto& v = state.v[i];
    const auto& g = grads[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = config.beta1 * m[j] + (1.0 - config.beta1) * g[j];
      v[j] = config.beta2 * v[j] + (1.0 - config.beta2) * g[j] * g[j];
      w[j] -= config.learning_rate * (m[j] / c1) / (std::sqrt(v[j] / c2) + config.epsilon);
    }
  }
}

void adam_step(const std::vector<Tensor>& params, AdamState& state, const AdamConfig& config) {
  std::vector<std::vector<double>> grads;
  grads.reserve(params.size());
  for (const auto& p : params) {
    if (p.has_grad()) {
      auto g = p.grad();
      grads.emplace_back(g.begin(), g.end());
    } else {
      grads.emplace_back(p.size(), 0.0);
    }
  }
  adam_step(params, grads, state, config);
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0)) throw ConfigError("learning rate must be >= 0");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must lie in [0,1)");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (ensemble_train == 0 || ensemble_keep == 0 || ensemble_keep > ensemble_train) {
    throw ConfigError("ensemble needs 1 <= keep <= train");
  }
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("validation fraction must lie in (0,1)");
  }
}

double mean_loss(const Model& model, const std::vector<EncodedExample>& examples) {
  if (examples.empty()) return 0.0;
  double total = 0.0;
  for (const auto& ex : examples) {
    NetworkOutput out = model.run(ex, false, nullptr, false);
    total += bce_loss(out.confidences, ex.labels).item();
  }
  return total / static_cast<double>(examples.size());
}

Confidences predict_all(const Model& model, const std::vector<EncodedExample>& examples) {
  Confidences out;
  out.reserve(examples.size());
  for (const auto& ex : examples) out.push_back(model.predict(ex));
  return out;
}

std::vector<std::vector<double>> targets_of(const std::vector<EncodedExample>& examples) {
  std::vector<std::vector<double>> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) out.push_back(ex.labels);
  return out;
}

TrainResult train(Model& model, const std::vector<EncodedExample>& train_set,
                  const std::vector<EncodedExample>& validation_set, const TrainConfig& config) {
  config.validate();
  if (train_set.empty()) throw ConfigError("training partition is empty");
  if (validation_set.empty()) throw ConfigError("validation partition is empty");
  model.set_dropout(config.dropout);

  std::vector<Tensor> params = model.trainable_parameters();
  const AdamConfig adam{config.learning_rate};
  AdamState state;
  std::mt19937_64 rng(config.seed);
  const auto val_targets = targets_of(validation_set);

  TrainResult result;
  auto evaluate = [&] {
    return multilabel_prf(val_targets, predict_all(model, validation_set), config.threshold);
  };
  result.history.push_back({0, mean_loss(model, train_set), evaluate()});
  result.best_f = result.history[0].validation.f1();
  Snapshot best = snapshot(params);

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    if (result.best_f >= config.target_f) break;
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      for (auto& p : params) p.zero_grad();
      const double weight = 1.0 / static_cast<double>(stop - start);
      for (std::size_t i = start; i < stop; ++i) {
        const EncodedExample& ex = train_set[order[i]];
        NetworkOutput out = model.run(ex, true, &rng, false);
        Tensor loss = bce_loss(out.confidences, ex.labels);
        total += loss.item();
        backward(scale(loss, weight));
      }
      adam_step(params, state, adam);
    }
    EpochRecord rec{epoch, total / static_cast<double>(order.size()), evaluate()};
    result.history.push_back(rec);
    if (rec.validation.f1() > result.best_f) {
      result.best_f = rec.validation.f1();
      result.best_epoch = epoch;
      best = snapshot(params);
      since_best = 0;
    } else if (config.patience > 0 && ++since_best >= config.patience) {
      break;
    }
  }
  restore(params, best);
  for (auto& p : params) p.zero_grad();
  return result;
}

std::string history_csv(const TrainResult& result) {
  std::string out = "epoch,loss,precision,recall,f1\n";
  for (const auto& r : result.history) {
    out += std::to_string(r.epoch) + "," + format_metric(r.loss) + "," +
           format_metric(r.validation.precision()) + "," +
           format_metric(r.validation.recall()) + "," + format_metric(r.validation.f1()) +
           "\n";
  }
  return out;
}

std::size_t Ensemble::label_count() const {
  return members.empty() ? 0 : members.front().model.label_count();
}

std::uint64_t split_seed(std::uint64_t seed, std::size_t index) {
  return splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(index) + 1));
}

void parallel_for(std::size_t count, std::size_t jobs,
                  const std::function<void(std::size_t)>& task) {
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min(jobs, count);
  if (jobs <= 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < jobs; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          task(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

Ensemble train_ensemble(const std::vector<EncodedExample>& data, const ModelConfig& base,
                        const Vocab& vocab, const WordVectors* vectors,
                        const TrainConfig& config) {
  config.validate();
  const std::size_t n = data.size();
  const std::size_t n_val = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(config.validation_fraction * static_cast<double>(n))));
  if (n <= n_val || n - n_val < config.batch_size) {
    throw ConfigError("ensemble needs at least batch size (" +
                      std::to_string(config.batch_size) + ") training examples after the " +
                      "validation split, got " + std::to_string(n > n_val ? n - n_val : 0));
  }

  std::vector<Member> all(config.ensemble_train);
  parallel_for(config.ensemble_train, config.jobs, [&](std::size_t i) {
    const std::uint64_t sseed = split_seed(config.seed, i);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 split_rng(sseed);
    std::shuffle(order.begin(), order.end(), split_rng);
    std::vector<EncodedExample> val, tr;
    for (std::size_t k = 0; k < n; ++k) (k < n_val ? val : tr).push_back(data[order[k]]);

    ModelConfig mc = base;
    mc.seed = base.seed + i;
    mc.arch.dropout = config.dropout;
    Member m;
    m.model = Model::build(mc, vocab, vectors);
    TrainConfig tc = config;
    tc.seed = sseed;
    m.result = train(m.model, tr, val, tc);
    m.score = {i, sseed, m.result.best_f};
    all[i] = std::move(m);
  });

  Ensemble e;
  for (const auto& m : all) e.trained.push_back(m.score);
  std::vector<std::size_t> rank(all.size());
  std::iota(rank.begin(), rank.end(), 0);
  std::stable_sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) {
    return all[a].score.validation_f > all[b].score.validation_f;
  });
  for (std::size_t k = 0; k < config.ensemble_keep; ++k) e.members.push_back(std::move(all[rank[k]]));
  return e;
}

std::vector<double> ensemble_predict(const Ensemble& ensemble, const EncodedExample& example) {
  if (ensemble.members.empty()) throw ContractError("ensemble has no members");
  const std::size_t labels = ensemble.label_count();
  std::vector<double> sum(labels, 0.0);
  for (const auto& m : ensemble.members) {
    if (m.model.label_count() != labels ||
        m.model.config().labels != ensemble.members.front().model.config().labels) {
      throw ContractError("ensemble members disagree on the label inventory");
    }
    const auto p = m.model.predict(example);
    for (std::size_t k = 0; k < labels; ++k) sum[k] += p[k];
  }
  for (double& v : sum) v /= static_cast<double>(ensemble.members.size());
  return sum;
}

Confidences ensemble_predict_all(const Ensemble& ensemble,
                                 const std::vector<EncodedExample>& examples) {
  Confidences out;
  out.reserve(examples.size());
  for (const auto& ex : examples) out.push_back(ensemble_predict(ensemble, ex));
  return out;
}

void save_ensemble(const Ensemble& ensemble, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ostringstream scores;
  scores << "rank,index,split_seed,validation_f1\n";
  for (std::size_t k = 0; k < ensemble.members.size(); ++k) {
    const Member& m = ensemble.members[k];
    save_model(m.model, dir / ("member" + std::to_string(k)));
    std::ofstream(dir / ("member" + std::to_string(k) + ".history.csv"), std::ios::binary)
        << history_csv(m.result);
    scores << k << ',' << m.score.index << ',' << m.score.split_seed << ','
           << format_metric(m.score.validation_f) << '\n';
  }
  std::ofstream(dir / "scores.csv", std::ios::binary) << scores.str();
}

Ensemble load_ensemble(const std::filesystem::path& dir) {
  Ensemble e;
  for (std::size_t k = 0;; ++k) {
    const auto stem = dir / ("member" + std::to_string(k));
    if (!std::filesystem::exists(stem.string() + ".ckpt")) break;
    Member m;
    m.model = load_model(stem);
    m.score.index = k;
    e.members.push_back(std::move(m));
  }
  if (e.members.empty()) throw IngestionError("no ensemble members under " + dir.string());
  // rank,index,split_seed,validation_f1
  std::ifstream scores(dir / "scores.csv", std::ios::binary);
  std::string line;
  if (scores && std::getline(scores, line)) {
    while (std::getline(scores, line)) {
      std::istringstream row(line);
      std::size_t rank = 0;
      MemberScore s;
      char c1 = 0, c2 = 0, c3 = 0;
      if (!(row >> rank >> c1 >> s.index >> c2 >> s.split_seed >> c3 >> s.validation_f) ||
          c1 != ',' || c2 != ',' || c3 != ',' || rank >= e.members.size()) {
        throw FormatError("malformed row in " + (dir / "scores.csv").string() + ": " + line);
      }
      e.members[rank].score = s;
    }
  }
  for (const auto& m : e.members) {
    if (m.model.config().labels != e.members.front().model.config().labels) {
      throw FormatError("ensemble members under " + dir.string() + " disagree on labels");
    }
  }
  return e;
}

}  // namespace attnie

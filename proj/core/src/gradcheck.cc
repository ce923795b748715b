#include "attnie/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "attnie/errors.h"
#include "attnie/layers.h"
#include "attnie/model.h"
#include "attnie/ops.h"
#include "attnie/training.h"

namespace attnie {
namespace {

using Rng = std::mt19937_64;

std::size_t extent(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

std::vector<double> uniform(Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

Tensor leaf(Rng& rng, Shape shape) {
  const std::size_t n = shape_size(shape);
  return Tensor::from(std::move(shape), uniform(rng, n), true);
}

// Values bounded away from zero, so ReLU kinks stay out of the stencil.
Tensor off_kink_leaf(Rng& rng, Shape shape) {
  const std::size_t n = shape_size(shape);
  std::vector<double> v = uniform(rng, n, 0.05, 1.0);
  std::bernoulli_distribution sign(0.5);
  for (double& x : v) {
    if (sign(rng)) x = -x;
  }
  return Tensor::from(std::move(shape), std::move(v), true);
}

// Projects y onto fixed random weights so every output element matters.
Tensor project(const Tensor& y, const Tensor& weights) {
  return sum(mul(y, weights));
}

// Small weights keep |loss| near 0.01, so the central-difference round-off
// on structurally zero gradients (key biases under softmax shift
// invariance) stays below the 1e-8 floor of relative_error().
Tensor weights_like(Rng& rng, const Shape& shape) {
  return Tensor::from(shape, uniform(rng, shape_size(shape), -0.01, 0.01));
}

struct Trial {
  std::function<Tensor()> loss;
  std::vector<Tensor> leaves;
};

using TrialMaker = std::function<Trial(Rng&)>;

// Wraps an op whose output gets projected to a scalar.
Trial projected(Rng& rng, std::vector<Tensor> leaves,
                std::function<Tensor(const std::vector<Tensor>&)> op) {
  const Shape out = op(leaves).shape();
  Tensor w = weights_like(rng, out);
  auto fn = [leaves, op, w] { return project(op(leaves), w); };
  return {fn, std::move(leaves)};
}

std::vector<std::pair<std::string, TrialMaker>> op_trials() {
  std::vector<std::pair<std::string, TrialMaker>> t;
  t.emplace_back("matmul", [](Rng& r) {
    const std::size_t m = extent(r, 1, 4), k = extent(r, 1, 4), n = extent(r, 1, 4);
    return projected(r, {leaf(r, {m, k}), leaf(r, {k, n})},
                     [](const auto& x) { return matmul(x[0], x[1]); });
  });
  t.emplace_back("transpose", [](Rng& r) {
    return projected(r, {leaf(r, {extent(r, 1, 4), extent(r, 1, 4)})},
                     [](const auto& x) { return transpose(x[0]); });
  });
  t.emplace_back("add", [](Rng& r) {
    const Shape s{extent(r, 1, 4), extent(r, 1, 4)};
    const bool scalar_rhs = extent(r, 0, 1) == 1;
    return projected(r, {leaf(r, s), scalar_rhs ? leaf(r, {1}) : leaf(r, s)},
                     [](const auto& x) { return add(x[0], x[1]); });
  });
  t.emplace_back("mul", [](Rng& r) {
    const Shape s{extent(r, 1, 4), extent(r, 1, 4)};
    const bool scalar_rhs = extent(r, 0, 1) == 1;
    return projected(r, {leaf(r, s), scalar_rhs ? leaf(r, {1}) : leaf(r, s)},
                     [](const auto& x) { return mul(x[0], x[1]); });
  });
  t.emplace_back("scale", [](Rng& r) {
    const double f = uniform(r, 1, -2.0, 2.0)[0];
    return projected(r, {leaf(r, {extent(r, 1, 4), extent(r, 1, 4)})},
                     [f](const auto& x) { return scale(x[0], f); });
  });
  t.emplace_back("relu", [](Rng& r) {
    return projected(r, {off_kink_leaf(r, {extent(r, 1, 4), extent(r, 1, 4)})},
                     [](const auto& x) { return relu(x[0]); });
  });
  t.emplace_back("sigmoid", [](Rng& r) {
    return projected(r, {leaf(r, {extent(r, 1, 4), extent(r, 1, 4)})},
                     [](const auto& x) { return sigmoid(x[0]); });
  });
  t.emplace_back("add_bias", [](Rng& r) {
    const std::size_t n = extent(r, 1, 4);
    return projected(r, {leaf(r, {extent(r, 1, 4), n}), leaf(r, {n})},
                     [](const auto& x) { return add_bias(x[0], x[1]); });
  });
  t.emplace_back("softmax", [](Rng& r) {
    const std::size_t axis = extent(r, 0, 1);
    return projected(r, {leaf(r, {extent(r, 1, 4), extent(r, 1, 4)})},
                     [axis](const auto& x) { return softmax(x[0], axis); });
  });
  t.emplace_back("layer_norm", [](Rng& r) {
    // At d=2 the output barely depends on x and the tiny gradients drown in
    // rounding noise.
    const std::size_t d = extent(r, 3, 6);
    return projected(r, {leaf(r, {extent(r, 1, 4), d}), leaf(r, {d}), leaf(r, {d})},
                     [](const auto& x) { return layer_norm(x[0], x[1], x[2]); });
  });
  t.emplace_back("conv1d", [](Rng& r) {
    const std::size_t w = 2 * extent(r, 0, 2) + 1, fi = extent(r, 1, 3), fo = extent(r, 1, 3);
    return projected(r, {leaf(r, {extent(r, 1, 6), fi}), leaf(r, {w, fi, fo}), leaf(r, {fo})},
                     [](const auto& x) { return conv1d(x[0], x[1], x[2]); });
  });
  t.emplace_back("global_max_pool", [](Rng& r) {
    return projected(r, {leaf(r, {extent(r, 1, 6), extent(r, 1, 4)})},
                     [](const auto& x) { return global_max_pool(x[0]); });
  });
  t.emplace_back("gather_rows", [](Rng& r) {
    const std::size_t rows = extent(r, 2, 5);
    std::vector<std::int64_t> idx(extent(r, 1, 6));
    for (auto& i : idx) i = static_cast<std::int64_t>(extent(r, 0, rows - 1));
    return projected(r, {leaf(r, {rows, extent(r, 1, 4)})},
                     [idx](const auto& x) { return gather_rows(x[0], idx); });
  });
  t.emplace_back("concat", [](Rng& r) {
    const std::size_t m = extent(r, 1, 4);
    return projected(r, {leaf(r, {m, extent(r, 1, 3)}), leaf(r, {m, extent(r, 1, 3)})},
                     [](const auto& x) { return concat({x[0], x[1]}); });
  });
  t.emplace_back("slice_cols", [](Rng& r) {
    const std::size_t n = extent(r, 2, 5);
    const std::size_t b = extent(r, 0, n - 1), e = extent(r, b + 1, n);
    return projected(r, {leaf(r, {extent(r, 1, 4), n})},
                     [b, e](const auto& x) { return slice_cols(x[0], b, e); });
  });
  t.emplace_back("reshape", [](Rng& r) {
    const std::size_t m = extent(r, 1, 4), n = extent(r, 1, 4);
    return projected(r, {leaf(r, {m, n})},
                     [m, n](const auto& x) { return reshape(x[0], {n, m}); });
  });
  t.emplace_back("sum", [](Rng& r) {
    Trial trial;
    trial.leaves = {leaf(r, {extent(r, 1, 4), extent(r, 1, 4)})};
    Tensor x = trial.leaves[0];
    trial.loss = [x] { return sum(mul(x, x)); };
    return trial;
  });
  t.emplace_back("mean", [](Rng& r) {
    Trial trial;
    trial.leaves = {leaf(r, {extent(r, 1, 4), extent(r, 1, 4)})};
    Tensor x = trial.leaves[0];
    trial.loss = [x] { return mean(mul(x, x)); };
    return trial;
  });
  t.emplace_back("dropout", [](Rng& r) {
    const std::uint64_t seed = r();
    return projected(r, {leaf(r, {extent(r, 1, 4), extent(r, 1, 4)})}, [seed](const auto& x) {
      Rng mask(seed);
      return dropout(x[0], 0.3, mask);
    });
  });
  t.emplace_back("bce_loss", [](Rng& r) {
    const std::size_t n = extent(r, 1, 5);
    std::vector<double> targets(n);
    for (double& y : targets) y = static_cast<double>(extent(r, 0, 1));
    Trial trial;
    trial.leaves = {Tensor::from({n}, uniform(r, n, 0.05, 0.95), true)};
    Tensor c = trial.leaves[0];
    trial.loss = [c, targets] { return bce_loss(c, targets); };
    return trial;
  });
  t.emplace_back("multi_head_attention", [](Rng& r) {
    const std::size_t heads = extent(r, 1, 2);
    const std::size_t width = heads == 1 ? extent(r, 3, 6) : 2 * extent(r, 2, 3);
    AttentionParams p = AttentionParams::init(width, heads, r);
    std::vector<Tensor> leaves{off_kink_leaf(r, {extent(r, 1, 4), width})};
    std::vector<NamedTensor> named;
    p.append_named("mha", named);
    for (auto& nt : named) {
      // Random biases keep the ReLU projections away from exact zeros.
      if (nt.name.find("norm") == std::string::npos) {
        auto v = uniform(r, nt.tensor.size(), -0.5, 0.5);
        std::copy(v.begin(), v.end(), nt.tensor.mutable_data().begin());
      }
      leaves.push_back(nt.tensor);
    }
    return projected(r, std::move(leaves), [p](const auto& x) {
      AttentionOptions opts;
      opts.collect_trace = false;
      return multi_head_attention(x[0], p, opts).output;
    });
  });
  return t;
}

}  // namespace

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
  return std::fabs(analytic - numeric) / denom;
}

double max_gradient_error(const std::function<Tensor()>& loss_fn,
                          const std::vector<Tensor>& leaves, double step) {
  for (const Tensor& t : leaves) {
    if (!t.requires_grad()) throw ContractError("gradient check leaf does not require grad");
    Tensor handle = t;
    handle.zero_grad();
  }
  backward(loss_fn());
  double worst = 0.0;
  for (const Tensor& t : leaves) {
    Tensor handle = t;
    const std::vector<double> analytic(t.grad().begin(), t.grad().end());
    auto values = handle.mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + step;
      const double up = loss_fn().item();
      values[i] = saved - step;
      const double down = loss_fn().item();
      values[i] = saved;
      worst = std::max(worst, relative_error(analytic[i], (up - down) / (2.0 * step)));
    }
  }
  return worst;
}

std::vector<GradCheck> op_gradient_suite(std::size_t trials, std::uint64_t seed,
                                         double tolerance) {
  std::vector<GradCheck> out;
  Rng rng(seed);
  for (const auto& [name, make] : op_trials()) {
    GradCheck check{name, trials, 0.0, tolerance};
    for (std::size_t i = 0; i < trials; ++i) {
      Trial trial = make(rng);
      check.max_error = std::max(check.max_error, max_gradient_error(trial.loss, trial.leaves));
    }
    out.push_back(check);
  }
  return out;
}

GradCheck network_gradient_check(std::uint64_t seed, double tolerance) {
  ArchitectureConfig arch;
  arch.variant = Variant::kFourMhaFourCnn;
  arch.filters = 3;
  arch.heads = 2;
  arch.widths = {1, 3};
  arch.dropout = 0.0;
  const std::size_t length = 6, width = 8, labels = 3;
  Network net = Network::build(arch, width, labels, seed);
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);

  std::vector<Tensor> leaves{leaf(rng, {length, width})};
  std::vector<NamedTensor> named;
  net.append_named(named);
  for (auto& nt : named) leaves.push_back(nt.tensor);
  std::vector<double> targets(labels);
  for (double& y : targets) y = static_cast<double>(extent(rng, 0, 1));

  Tensor input = leaves[0];
  auto loss = [&net, input, targets] {
    return bce_loss(net.forward(input, false, nullptr, false).confidences, targets);
  };
  return {"network:4mha-4cnn", 1, max_gradient_error(loss, leaves), tolerance};
}

}  // namespace attnie

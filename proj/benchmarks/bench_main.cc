#include <benchmark/benchmark.h>

#include <random>

#include "attnie/layers.h"
#include "attnie/model.h"
#include "attnie/ops.h"
#include "attnie/synth.h"
#include "attnie/training.h"
#include "attnie/workflow.h"

namespace {

using namespace attnie;

Tensor random_tensor(std::mt19937_64& rng, Shape shape, bool grad = false) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  std::vector<double> v(shape_size(shape));
  for (double& x : v) x = d(rng);
  return Tensor::from(std::move(shape), std::move(v), grad);
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(1);
  const Tensor a = random_tensor(rng, {n, n}), b = random_tensor(rng, {n, n});
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b).data().data());
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Matmul)->RangeMultiplier(2)->Range(16, 128)->Complexity(benchmark::oNCubed);

void BM_Softmax(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(2);
  const Tensor x = random_tensor(rng, {n, n});
  for (auto _ : state) benchmark::DoNotOptimize(softmax(x, 1).data().data());
}
BENCHMARK(BM_Softmax)->Arg(16)->Arg(64);

void BM_Conv1d(benchmark::State& state) {
  const auto len = static_cast<std::size_t>(state.range(0));
  const auto w = static_cast<std::size_t>(state.range(1));
  std::mt19937_64 rng(3);
  const Tensor x = random_tensor(rng, {len, 64});
  const Tensor k = random_tensor(rng, {w, 64, 64});
  const Tensor b = random_tensor(rng, {64});
  for (auto _ : state) benchmark::DoNotOptimize(conv1d(x, k, b).data().data());
}
BENCHMARK(BM_Conv1d)->Args({32, 1})->Args({32, 7})->Args({128, 7});

void BM_AttentionForward(benchmark::State& state) {
  const auto len = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(4);
  const auto params = AttentionParams::init(64, 8, rng);
  const Tensor x = random_tensor(rng, {len, 64});
  AttentionOptions opts;
  opts.collect_trace = false;
  for (auto _ : state) benchmark::DoNotOptimize(multi_head_attention(x, params, opts).output.data().data());
}
BENCHMARK(BM_AttentionForward)->Arg(16)->Arg(64);

void BM_AttentionBackward(benchmark::State& state) {
  const auto len = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(5);
  const auto params = AttentionParams::init(64, 8, rng);
  Tensor x = random_tensor(rng, {len, 64}, true);
  AttentionOptions opts;
  opts.collect_trace = false;
  for (auto _ : state) {
    x.zero_grad();
    backward(sum(multi_head_attention(x, params, opts).output));
  }
}
BENCHMARK(BM_AttentionBackward)->Arg(16)->Arg(64);

void BM_NetworkStep(benchmark::State& state) {
  const auto variant = all_variants()[static_cast<std::size_t>(state.range(0))];
  std::mt19937_64 rng(6);
  ArchitectureConfig arch;
  arch.variant = variant;
  arch.filters = 32;
  arch.heads = 8;
  const Network net = build_model(arch, 64, 4, 6);
  const Tensor x = random_tensor(rng, {40, 64});
  for (auto _ : state) {
    const NetworkOutput out = net.forward(x, true, &rng, false);
    backward(sum(out.confidences));
  }
  state.SetLabel(variant_name(variant));
}
BENCHMARK(BM_NetworkStep)->DenseRange(0, 4);

void BM_TrainEpoch(benchmark::State& state) {
  SynthSpec spec;
  spec.documents = 10;
  spec.sentences_per_doc = 10;
  spec.min_distance = spec.max_distance = 8;
  const SynthCorpus corpus = generate(spec);
  const Vocab vocab = build_vocab(corpus_sentences(corpus.documents), 1);
  const ExampleEncoder encoder{&vocab, {}};
  PipelineDatasets data = training_examples(corpus.documents, corpus.schema, encoder);
  ModelConfig mc;
  mc.arch.filters = 32;
  mc.labels = data[Stage::kEdges].labels;
  TrainConfig tc;
  tc.epochs = 1;
  tc.batch_size = 16;
  const auto& ex = data[Stage::kEdges].examples;
  for (auto _ : state) {
    Model model = Model::build(mc, vocab);
    benchmark::DoNotOptimize(train(model, ex, ex, tc).best_f);
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * ex.size()));
}
BENCHMARK(BM_TrainEpoch)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "catnet/aggregation.hpp"
#include "catnet/metrics.hpp"
#include "catnet/model.hpp"
#include "catnet/synth.hpp"

using namespace catnet;

namespace {

Tensor random_tensor(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor t({rows, cols});
  for (auto& v : t.storage()) v = rng.normal();
  return t;
}

void BM_TapeMatmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  Parameter a("a", random_tensor(n, n, rng));
  Parameter b("b", random_tensor(n, n, rng));
  for (auto _ : state) {
    Tape tape;
    const Var y = tape.sum_all(tape.matmul(tape.param(a), tape.param(b)));
    tape.backward(y);
    benchmark::DoNotOptimize(a.grad[0]);
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_TapeMatmul)->RangeMultiplier(2)->Range(16, 128)->Complexity();

struct ModelFixture {
  std::vector<TaskInstance> batch;
  ModelConfig config;
};

const ModelFixture& fixture(AttentionMode mode) {
  static const auto make = [](AttentionMode m) {
    auto gen = default_gen_config();
    gen.n_patients = 32;
    const auto cohort = generate(gen, 1);
    ModelFixture f;
    f.config.vocab = cohort.vocab;
    f.config.task = {TaskTarget::Med, m};
    f.batch = extract_task_instances(cohort.patients, f.config.task, cohort.vocab);
    return f;
  };
  static const ModelFixture aware = make(AttentionMode::TaskAware);
  static const ModelFixture unaware = make(AttentionMode::TaskUnaware);
  return mode == AttentionMode::TaskAware ? aware : unaware;
}

void BM_ModelForward(benchmark::State& state) {
  const auto& f = fixture(static_cast<AttentionMode>(state.range(0)));
  CatNetModel model(f.config, 1);
  for (auto _ : state) {
    Tape tape;
    benchmark::DoNotOptimize(tape.value(model.forward(tape, f.batch).probs)[0]);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.batch.size()));
}
BENCHMARK(BM_ModelForward)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_ModelForwardBackward(benchmark::State& state) {
  const auto& f = fixture(static_cast<AttentionMode>(state.range(0)));
  CatNetModel model(f.config, 1);
  std::vector<double> flat;
  for (const auto& i : f.batch) flat.insert(flat.end(), i.target.begin(), i.target.end());
  const Tensor y = Tensor::matrix(f.batch.size(), f.batch[0].target.size(), flat);
  for (auto _ : state) {
    model.zero_grad();
    Tape tape;
    tape.backward(bce_loss(tape, model.forward(tape, f.batch).probs, y));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.batch.size()));
}
BENCHMARK(BM_ModelForwardBackward)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_Auc(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  std::vector<double> s(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = rng.uniform(0.0, 1.0);
    y[i] = rng.bernoulli(0.2) ? 1.0 : 0.0;
  }
  for (auto _ : state) benchmark::DoNotOptimize(auc(s, y));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Auc)->RangeMultiplier(4)->Range(1 << 10, 1 << 16)->Complexity();

}  // namespace
BENCHMARK_MAIN();

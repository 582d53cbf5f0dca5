// Copyright 2026 The factlab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <benchmark/benchmark.h>

#include "factlab/adam.hpp"
#include "factlab/corpus.hpp"
#include "factlab/eval.hpp"
#include "factlab/trainer.hpp"

using namespace factlab;

namespace {

void BM_MatmulForwardBackward(benchmark::State& state) {
  const std::int64_t m = state.range(0), k = state.range(1), n = state.range(2);
  Rng rng(1);
  auto a = make_tensor<float>({m, k}, true);
  auto b = make_tensor<float>({k, n}, true);
  for (auto& x : a->v) x = static_cast<float>(rng.real01() - 0.5);
  for (auto& x : b->v) x = static_cast<float>(rng.real01() - 0.5);
  auto w = make_tensor<float>({n, 1});
  auto ones = make_tensor<float>({1, m});
  std::fill(w->v.begin(), w->v.end(), 1e-3f);
  std::fill(ones->v.begin(), ones->v.end(), 1e-3f);
  for (auto _ : state) {
    a->zero_grad();
    b->zero_grad();
    Tape<float> tape;
    auto loss = matmul(&tape, ones, matmul(&tape, matmul(&tape, a, b), w));
    tape.backward(loss);
    benchmark::DoNotOptimize(a->g.data());
  }
  state.SetItemsProcessed(state.iterations() * m * k * n);
}
BENCHMARK(BM_MatmulForwardBackward)
    ->Args({1024, 64, 64})
    ->Args({1024, 64, 256})
    ->Args({256, 64, 1024});

void BM_TrainStep(benchmark::State& state) {
  Vocabulary vocab = Vocabulary::build(VocabSpec{1000, 20, 200, 0, 0}, 1);
  GenParams p;
  p.n = 10;
  p.m = 400;
  p.seed = 1;
  auto corpus = generate(RuleKind::kSym, p, vocab);

  ModelConfig cfg;
  cfg.num_layers = state.range(0);
  cfg.num_heads = 4;
  cfg.hidden_size = state.range(1);
  cfg.intermediate_size = 4 * state.range(1);
  cfg.vocab_size = vocab.size();
  cfg.dropout = 0.0;
  auto params = init_params<float>(cfg, 2);
  params.set_requires_grad(true);
  auto pointers = params.param_pointers();
  std::span<Tensor<float>* const> span(pointers);
  auto adam = AdamState<float>::init(span);
  AdamConfig adam_cfg;
  adam_cfg.learning_rate = 1e-3;

  TrainConfig tc;
  Rng rng(3);
  std::vector<std::array<TokenId, 4>> batch;
  for (std::int64_t i = 0; i < 256; ++i)
    batch.push_back(vocab.encode(corpus.records[static_cast<std::size_t>(i)].fact));

  for (auto _ : state) {
    auto masked = dynamic_mask(batch, tc, vocab, rng);
    params.zero_grads();
    Tape<float> tape;
    auto loss = mlm_loss(&tape, params, masked.input_ids, 256, masked.positions, masked.targets,
                         nullptr);
    tape.backward(loss);
    adam_step(adam_cfg, span, adam);
    benchmark::DoNotOptimize(loss->v[0]);
  }
  state.SetItemsProcessed(state.iterations() * 256);
}
BENCHMARK(BM_TrainStep)->Args({1, 64})->Args({2, 64})->Args({2, 128});

void BM_GenerateSym(benchmark::State& state) {
  Vocabulary vocab = Vocabulary::build(VocabSpec{5000, 500, 1000, 0, 0}, 1);
  GenParams p;
  p.n = 20;
  p.m = state.range(0);
  p.seed = 7;
  for (auto _ : state) {
    auto corpus = generate(RuleKind::kSym, p, vocab);
    benchmark::DoNotOptimize(corpus.records.data());
  }
  state.SetItemsProcessed(state.iterations() * p.n * p.m * 3);
}
BENCHMARK(BM_GenerateSym)->Arg(800);

void BM_EvaluateQueries(benchmark::State& state) {
  Vocabulary vocab = Vocabulary::build(VocabSpec{1000, 20, 200, 0, 0}, 1);
  ModelConfig cfg;
  cfg.num_layers = 2;
  cfg.num_heads = 4;
  cfg.hidden_size = 64;
  cfg.intermediate_size = 256;
  cfg.vocab_size = vocab.size();
  cfg.dropout = 0.0;
  auto params = init_params<float>(cfg, 2);
  Rng rng(5);
  std::vector<TestQuery> queries;
  for (int i = 0; i < 512; ++i) {
    TestQuery q;
    q.fact = {vocab.entity(rng.index(1000)), vocab.relation(rng.index(20)),
              vocab.entity(rng.index(1000)), false};
    q.gold = {q.fact.object};
    q.category = "sym";
    queries.push_back(q);
  }
  Evaluator ev(params, vocab);
  for (auto _ : state) {
    auto report = ev.evaluate(queries);
    benchmark::DoNotOptimize(report.overall.precision_sum);
  }
  state.SetItemsProcessed(state.iterations() * 512);
}
BENCHMARK(BM_EvaluateQueries);

}  // namespace

BENCHMARK_MAIN();

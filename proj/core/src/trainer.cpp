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

#include "factlab/trainer.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <numeric>
#include <sstream>

namespace factlab {

using json = nlohmann::json;

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("train config: batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("train config: learning_rate must be > 0");
  if (max_epochs < 1) throw ConfigError("train config: max_epochs must be >= 1");
  if (eval_every < 1) throw ConfigError("train config: eval_every must be >= 1");
  if (bernoulli_rate <= 0.0 || bernoulli_rate >= 1.0)
    throw ConfigError("train config: bernoulli_rate outside (0, 1)");
}

json TrainConfig::to_json() const {
  return json{{"batch_size", batch_size},
              {"learning_rate", learning_rate},
              {"adam_beta1", adam_beta1},
              {"adam_beta2", adam_beta2},
              {"adam_eps", adam_eps},
              {"max_epochs", max_epochs},
              {"eval_every", eval_every},
              {"checkpoint_every", checkpoint_every},
              {"masking", masking == MaskPolicy::kOnePerFact ? "one_per_fact" : "bernoulli"},
              {"bernoulli_rate", bernoulli_rate},
              {"corrupt_80_10_10", corrupt_80_10_10},
              {"seed", seed},
              {"early_stop_precision", early_stop_precision},
              {"early_stop_patience", early_stop_patience},
              {"train_eval_sample", train_eval_sample},
              {"grad_clip_norm", grad_clip_norm}};
}

TrainConfig TrainConfig::from_json(const json& j) {
  TrainConfig c;
  c.batch_size = j.value("batch_size", c.batch_size);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
  c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
  c.adam_eps = j.value("adam_eps", c.adam_eps);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.eval_every = j.value("eval_every", c.eval_every);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  std::string masking = j.value("masking", "one_per_fact");
  if (masking == "one_per_fact")
    c.masking = MaskPolicy::kOnePerFact;
  else if (masking == "bernoulli")
    c.masking = MaskPolicy::kBernoulli;
  else
    throw ConfigError("train config: unknown masking policy " + masking);
  c.bernoulli_rate = j.value("bernoulli_rate", c.bernoulli_rate);
  c.corrupt_80_10_10 = j.value("corrupt_80_10_10", c.corrupt_80_10_10);
  c.seed = j.value("seed", c.seed);
  c.early_stop_precision = j.value("early_stop_precision", c.early_stop_precision);
  c.early_stop_patience = j.value("early_stop_patience", c.early_stop_patience);
  c.train_eval_sample = j.value("train_eval_sample", c.train_eval_sample);
  c.grad_clip_norm = j.value("grad_clip_norm", c.grad_clip_norm);
  return c;
}

MaskedBatch dynamic_mask(std::span<const std::array<TokenId, Vocabulary::kMaxSeqLen>> facts,
                         const TrainConfig& cfg, const Vocabulary& vocab, Rng& rng) {
  constexpr std::int64_t seq = Vocabulary::kMaxSeqLen;
  MaskedBatch out;
  out.input_ids.resize(facts.size() * seq);
  auto corrupt = [&](std::int64_t flat, TokenId original) {
    out.positions.push_back(static_cast<std::int32_t>(flat));
    out.targets.push_back(original);
    if (!cfg.corrupt_80_10_10) {
      out.input_ids[static_cast<std::size_t>(flat)] = Vocabulary::kMask;
      return;
    }
    double u = rng.real01();
    if (u < 0.8) {
      out.input_ids[static_cast<std::size_t>(flat)] = Vocabulary::kMask;
    } else if (u < 0.9) {
      std::int64_t candidates = vocab.size() - Vocabulary::kNumSpecial;
      out.input_ids[static_cast<std::size_t>(flat)] =
          static_cast<TokenId>(Vocabulary::kNumSpecial + rng.index(candidates));
    }  // else: keep the original token
  };
  for (std::size_t i = 0; i < facts.size(); ++i) {
    const auto& fact = facts[i];
    std::int64_t base = static_cast<std::int64_t>(i) * seq;
    std::int64_t maskable = 0;
    for (std::int64_t p = 0; p < seq; ++p) {
      out.input_ids[static_cast<std::size_t>(base + p)] = fact[static_cast<std::size_t>(p)];
      maskable += fact[static_cast<std::size_t>(p)] != Vocabulary::kPad;
    }
    if (maskable == 0) throw ConfigError("dynamic_mask: fact has no maskable token");
    if (cfg.masking == MaskPolicy::kOnePerFact) {
      std::int64_t pick = rng.index(maskable);
      corrupt(base + pick, fact[static_cast<std::size_t>(pick)]);
    } else {
      for (std::int64_t p = 0; p < maskable; ++p)
        if (rng.bernoulli(cfg.bernoulli_rate)) corrupt(base + p, fact[static_cast<std::size_t>(p)]);
    }
  }
  return out;
}

TrainData TrainData::load(const std::filesystem::path& dir, const Vocabulary& vocab) {
  TrainData d;
  d.train_facts = load_fact_lines(dir / CorpusFiles::kTrain, vocab);
  auto test_path = dir / CorpusFiles::kTest;
  if (std::filesystem::exists(test_path)) d.test_queries = load_queries(test_path, vocab);
  auto train_eval_path = dir / CorpusFiles::kTrainEval;
  if (std::filesystem::exists(train_eval_path))
    d.train_eval_queries = load_queries(train_eval_path, vocab);
  if (d.train_facts.empty()) throw ConfigError("train: corpus has no training facts");
  return d;
}

Trainer::Trainer(const Vocabulary& vocab, TrainData data, ModelConfig model_config,
                 TrainConfig train_config, std::filesystem::path run_dir)
    : vocab_(vocab),
      data_(std::move(data)),
      model_config_(model_config),
      config_(train_config),
      run_dir_(std::move(run_dir)),
      params_(init_params<float>(model_config, train_config.seed)),
      adam_{},
      rng_order_(train_config.seed ^ 0x6f72646572ull),
      rng_mask_(train_config.seed ^ 0x6d61736bull),
      rng_dropout_(train_config.seed ^ 0x64726f70ull) {
  config_.validate();
  if (model_config_.vocab_size != vocab.size())
    throw ConfigError("train: model vocab_size does not match the corpus vocabulary");
  auto pointers = params_.param_pointers();
  adam_ = AdamState<float>::init(std::span<Tensor<float>* const>(pointers));

  // Fixed subsample of train cloze queries for the learning curve and the
  // early-stopping signal; independent RNG so it never shifts training.
  std::int64_t total = static_cast<std::int64_t>(data_.train_eval_queries.size());
  if (config_.train_eval_sample > 0 && config_.train_eval_sample < total) {
    Rng rng(config_.seed ^ 0x73616d706c65ull);
    auto picks = rng.sample_distinct(total, config_.train_eval_sample);
    for (auto p : picks) train_sample_.push_back(static_cast<std::int32_t>(p));
  } else {
    train_sample_.resize(static_cast<std::size_t>(total));
    std::iota(train_sample_.begin(), train_sample_.end(), 0);
  }
}

void Trainer::log_metric(std::int64_t epoch, std::int64_t step, std::string split,
                         std::string category, std::string metric, double value) {
  metrics_.push_back(
      {epoch, step, std::move(split), std::move(category), std::move(metric), format_double(value)});
}

void Trainer::flush_metrics() {
  std::ostringstream out;
  out << "epoch,step,split,category,metric,value\n";
  for (const auto& r : metrics_)
    out << r.epoch << ',' << r.step << ',' << r.split << ',' << r.category << ',' << r.metric
        << ',' << r.value << '\n';
  write_text_file(run_dir_ / kMetricsFile, out.str());
}

void Trainer::run_eval(std::int64_t epoch) {
  Evaluator ev(params_, vocab_);
  auto emit = [&](const char* split, const EvalReport& report) {
    log_metric(epoch, global_step_, split, "all", "precision_at_m", report.overall.precision());
    log_metric(epoch, global_step_, split, "all", "hits_at_m", report.overall.hit_rate());
    for (const auto& [cat, s] : report.per_category) {
      log_metric(epoch, global_step_, split, cat, "precision_at_m", s.precision());
      log_metric(epoch, global_step_, split, cat, "hits_at_m", s.hit_rate());
    }
  };
  if (!train_sample_.empty()) {
    std::vector<TestQuery> sample;
    sample.reserve(train_sample_.size());
    for (auto i : train_sample_)
      sample.push_back(data_.train_eval_queries[static_cast<std::size_t>(i)]);
    EvalReport report = ev.evaluate(sample);
    emit("train", report);
    if (config_.early_stop_patience > 0) {
      if (report.overall.hit_rate() >= config_.early_stop_precision)
        early_stop_streak_ += config_.eval_every;
      else
        early_stop_streak_ = 0;
    }
  }
  if (!data_.test_queries.empty()) emit("test", ev.evaluate(data_.test_queries));
}

void Trainer::save_state(const std::filesystem::path& path) const {
  std::ostringstream order_state, mask_state, dropout_state;
  rng_order_.save(order_state);
  rng_mask_.save(mask_state);
  rng_dropout_.save(dropout_state);
  json extra;
  extra["rng_order"] = order_state.str();
  extra["rng_mask"] = mask_state.str();
  extra["rng_dropout"] = dropout_state.str();
  extra["adam_step"] = adam_.step;
  extra["early_stop_streak"] = early_stop_streak_;
  extra["train_config"] = config_.to_json();

  CheckpointMeta meta;
  meta.seed = config_.seed;
  meta.step = global_step_;
  meta.epoch = start_epoch_;  // epochs completed so far
  meta.extra_json = extra.dump();

  std::vector<std::pair<std::string, std::span<const float>>> extras;
  auto named = params_.named();
  for (std::size_t i = 0; i < named.size(); ++i) {
    extras.emplace_back("adam_m/" + named[i].first, adam_.m[i]);
    extras.emplace_back("adam_v/" + named[i].first, adam_.v[i]);
  }
  save_checkpoint(path, params_, meta, extras);
}

bool Trainer::load_latest_checkpoint() {
  auto dir = run_dir_ / kCheckpointDir;
  if (!std::filesystem::exists(dir)) return false;
  std::filesystem::path best;
  std::int64_t best_epoch = -1;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() != ".bin") continue;
    auto loaded = load_checkpoint(entry.path());
    if (loaded.meta.epoch > best_epoch) {
      best_epoch = loaded.meta.epoch;
      best = entry.path();
    }
  }
  if (best_epoch < 0) return false;

  auto loaded = load_checkpoint(best);
  if (!(loaded.params.config == model_config_))
    throw ConfigError("resume: checkpoint model config differs from the requested one");
  params_ = std::move(loaded.params);
  global_step_ = loaded.meta.step;
  start_epoch_ = loaded.meta.epoch;

  json extra = json::parse(loaded.meta.extra_json);
  std::istringstream order_state(extra.at("rng_order").get<std::string>());
  rng_order_.load(order_state);
  std::istringstream mask_state(extra.at("rng_mask").get<std::string>());
  rng_mask_.load(mask_state);
  std::istringstream dropout_state(extra.at("rng_dropout").get<std::string>());
  rng_dropout_.load(dropout_state);
  adam_.step = extra.at("adam_step").get<std::int64_t>();
  early_stop_streak_ = extra.value("early_stop_streak", static_cast<std::int64_t>(0));

  auto named = params_.named();
  for (std::size_t i = 0; i < named.size(); ++i) {
    adam_.m[i] = loaded.extra_arrays.at("adam_m/" + named[i].first);
    adam_.v[i] = loaded.extra_arrays.at("adam_v/" + named[i].first);
  }

  // Drop any metric rows from beyond the checkpoint; the replay regenerates
  // them identically.
  auto metrics_path = run_dir_ / kMetricsFile;
  metrics_.clear();
  if (std::filesystem::exists(metrics_path)) {
    auto lines = read_lines(metrics_path);
    for (std::size_t i = 1; i < lines.size(); ++i) {
      if (lines[i].empty()) continue;
      std::stringstream ss(lines[i]);
      std::string f[6];
      for (auto& part : f) std::getline(ss, part, ',');
      MetricRow row{std::stoll(f[0]), std::stoll(f[1]), f[2], f[3], f[4], f[5]};
      if (row.epoch <= start_epoch_) metrics_.push_back(std::move(row));
    }
  }
  return true;
}

void Trainer::write_diagnostic(std::int64_t epoch, std::int64_t step, double last_loss,
                               const std::string& what) {
  json j;
  j["error"] = what;
  j["epoch"] = epoch;
  j["step"] = step;
  j["last_loss"] = last_loss;
  double max_abs_param = 0.0, max_abs_grad = 0.0;
  for (const auto& [name, t] : params_.named()) {
    for (float x : t->v) max_abs_param = std::max(max_abs_param, std::fabs(static_cast<double>(x)));
    for (float g : t->g) max_abs_grad = std::max(max_abs_grad, std::fabs(static_cast<double>(g)));
  }
  j["max_abs_param"] = max_abs_param;
  j["max_abs_grad"] = max_abs_grad;
  write_text_file(run_dir_ / kDiagnosticFile, j.dump(2) + "\n");
}

TrainResult Trainer::run(bool resume) {
  std::filesystem::create_directories(run_dir_ / kCheckpointDir);
  bool resumed = resume && load_latest_checkpoint();
  if (!resumed) {
    start_epoch_ = 0;
    metrics_.clear();
  }
  params_.set_requires_grad(true);

  AdamConfig adam_cfg{config_.learning_rate, config_.adam_beta1, config_.adam_beta2,
                      config_.adam_eps};
  auto pointers = params_.param_pointers();
  std::span<Tensor<float>* const> param_span(pointers);

  const std::int64_t n_facts = static_cast<std::int64_t>(data_.train_facts.size());
  std::vector<std::int32_t> order(static_cast<std::size_t>(n_facts));
  std::iota(order.begin(), order.end(), 0);

  const std::int64_t patience_evals = config_.early_stop_patience;
  TrainResult result;
  result.steps = global_step_;

  std::int64_t epoch = start_epoch_;
  double last_loss = 0.0;
  try {
    for (; epoch < config_.max_epochs; ++epoch) {
      // Shuffle from the identity so the epoch's permutation depends only on
      // the stream state (which checkpoints capture), not on prior epochs.
      std::iota(order.begin(), order.end(), 0);
      rng_order_.shuffle(order);
      double loss_sum = 0.0;
      std::int64_t batches = 0;
      for (std::int64_t begin = 0; begin < n_facts; begin += config_.batch_size) {
        std::int64_t count = std::min<std::int64_t>(config_.batch_size, n_facts - begin);
        std::vector<std::array<TokenId, Vocabulary::kMaxSeqLen>> batch(
            static_cast<std::size_t>(count));
        for (std::int64_t i = 0; i < count; ++i)
          batch[static_cast<std::size_t>(i)] =
              data_.train_facts[static_cast<std::size_t>(order[static_cast<std::size_t>(begin + i)])];
        MaskedBatch masked = dynamic_mask(batch, config_, vocab_, rng_mask_);
        if (masked.positions.empty()) continue;  // possible under Bernoulli masking

        params_.zero_grads();
        Tape<float> tape;
        auto loss = mlm_loss(&tape, params_, masked.input_ids, count, masked.positions,
                             masked.targets, model_config_.dropout > 0 ? &rng_dropout_ : nullptr);
        tape.backward(loss);
        if (config_.grad_clip_norm > 0.0) clip_grad_norm(param_span, config_.grad_clip_norm);
        adam_step(adam_cfg, param_span, adam_);

        last_loss = static_cast<double>(loss->v[0]);
        loss_sum += last_loss;
        ++batches;
        ++global_step_;
      }
      log_metric(epoch + 1, global_step_, "train", "all", "loss",
                 batches ? loss_sum / static_cast<double>(batches) : 0.0);

      // Absolute cadence so resumed runs evaluate at the same epochs.
      bool eval_now = (epoch + 1) % config_.eval_every == 0 || epoch + 1 == config_.max_epochs;
      if (eval_now) run_eval(epoch + 1);
      flush_metrics();

      std::int64_t completed = epoch + 1;
      if (config_.checkpoint_every > 0 && completed % config_.checkpoint_every == 0 &&
          completed != config_.max_epochs) {
        std::int64_t saved_start = start_epoch_;
        start_epoch_ = completed;
        save_state(run_dir_ / kCheckpointDir / ("ckpt_epoch" + std::to_string(completed) + ".bin"));
        start_epoch_ = saved_start;
      }
      if (patience_evals > 0 && early_stop_streak_ >= config_.early_stop_patience) {
        result.early_stopped = true;
        ++epoch;
        break;
      }
    }
  } catch (const NumericError& e) {
    write_diagnostic(epoch + 1, global_step_, last_loss, e.what());
    flush_metrics();
    throw;
  }

  start_epoch_ = epoch;
  result.epochs_run = epoch;
  result.steps = global_step_;
  result.final_checkpoint = run_dir_ / kCheckpointDir / kFinalCheckpoint;
  save_state(result.final_checkpoint);
  flush_metrics();
  return result;
}

}  // namespace factlab

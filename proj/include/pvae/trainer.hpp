#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pvae/model.hpp"

namespace pvae {

enum class Optimizer { kSgd, kAdam };

Optimizer parse_optimizer(const std::string& name);
std::string optimizer_name(Optimizer o);

struct TrainConfig {
  double learning_rate = 5e-5;
  std::int64_t batch_size = 32;
  std::int64_t total_iterations = 0;      // required, no default schedule
  std::int64_t kl_warmup_iterations = -1; // -1: 20% of total_iterations
  Optimizer optimizer = Optimizer::kSgd;
  double gradient_clip_norm = 5.0;        // 0 disables clipping
  std::uint64_t seed = 0;
  std::int64_t checkpoint_every = 0;      // 0: final checkpoint only

  std::int64_t warmup() const {
    return kl_warmup_iterations >= 0 ? kl_warmup_iterations
                                     : total_iterations / 5;
  }
  void validate() const;
};

// min(1, iteration / warmup); constant 1 when warmup is 0.
double kl_anneal_weight(std::int64_t iteration, std::int64_t warmup_iterations);

struct LogRecord {
  std::int64_t iteration = 0;
  double nll = 0;
  double kl = 0;
  double kl_weight = 0;
  double grad_norm = 0;  // pre-clip global norm
};

std::string log_record_json(const LogRecord& r);

struct Checkpoint {
  std::uint32_t format_version = 1;
  ModelConfig model_config;
  TrainConfig train_config;
  Vocabulary vocab;
  std::vector<std::pair<std::string, Tensor>> tensors;  // manifest order
  std::int64_t iteration = 0;
  std::string rng_state;
};

Checkpoint make_checkpoint(const ParaphraseVaeParams& params,
                           const ModelConfig& model_config,
                           const TrainConfig& train_config,
                           const Vocabulary& vocab, std::int64_t iteration,
                           const std::string& rng_state);

ParaphraseVaeParams params_from_checkpoint(const Checkpoint& ckpt);

// Binary layout: magic "PVAE", u32 LE version, u32 LE header length, UTF-8
// JSON header (configs, vocabulary, tensor manifest, payload CRC32), then
// the tensors as little-endian IEEE-754 32-bit floats. Values are widened
// back to 64-bit exactly on load, so save/load/save is byte-stable.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Manifest-predicted on-disk byte count for a checkpoint.
std::int64_t predicted_checkpoint_bytes(const Checkpoint& ckpt);

std::uint32_t crc32(const std::uint8_t* data, std::size_t size);

// Scales gradients in place so the global norm is at most clip_norm
// (no-op when clip_norm is 0); returns the pre-clip global norm.
double clip_gradients(std::vector<Tensor>& grads, double clip_norm);

// The per-pair noise and word-dropout draws are pure functions of
// (seed, iteration, batch position), which makes any training prefix
// reproducible from the checkpoint's iteration counter alone.
Tensor training_noise(const TrainConfig& config, const ModelConfig& model,
                      std::int64_t iteration, std::int64_t batch_pos);
std::vector<std::uint8_t> training_dropout_mask(const TrainConfig& config,
                                                double rate,
                                                std::int64_t iteration,
                                                std::int64_t batch_pos,
                                                std::size_t steps);

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<LogRecord> log;
};

// Iteration-based loop: sequential batches with a reshuffle at each epoch
// boundary, single-sample ELBO per pair, sum-over-time / mean-over-batch
// reduction, global-norm clipping, SGD or Adam updates. Writes periodic
// checkpoints to checkpoint_path when configured; on a non-finite loss the
// last good parameters are saved there before NonFiniteError is thrown.
TrainResult train(ParaphraseVaeParams& params, const ModelConfig& model_config,
                  const TrainConfig& train_config,
                  const std::vector<SentencePair>& corpus,
                  const Vocabulary& vocab,
                  const std::string& checkpoint_path = "",
                  const std::function<void(const LogRecord&)>& on_log = {});

}  // namespace pvae

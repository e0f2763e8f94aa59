#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pvae/model.hpp"

namespace pvae {

enum class DecodeMode { kGreedy, kBeam };
enum class ZMode { kPriorSample, kPosteriorMean };

DecodeMode parse_decode_mode(const std::string& name);
std::string decode_mode_name(DecodeMode m);
ZMode parse_z_mode(const std::string& name);
std::string z_mode_name(ZMode m);

struct GenerationRequest {
  std::vector<TokenId> input;          // encoded s_o (EOS-terminated)
  std::int64_t num_samples = 3;
  DecodeMode mode = DecodeMode::kGreedy;
  std::int64_t beam_size = 10;
  std::int64_t max_decode_length = 0;  // 0: model max_length + 1
  std::uint64_t seed = 0;
  ZMode z_mode = ZMode::kPriorSample;

  void validate() const;
};

struct DecodingResult {
  std::vector<TokenId> tokens;  // EOS-stripped
  double logprob = 0;           // sum of per-step log-softmax, EOS included
  LatentCode z_used;
};

// Draws num_samples latent codes (prior samples, or the posterior mean for
// variants that can recognize without a paraphrase) and returns the best
// decode per draw, ordered by draw index.
std::vector<DecodingResult> sample_paraphrases(const ParaphraseVaeParams& params,
                                               const ModelConfig& config,
                                               const GenerationRequest& request);

// Argmax decoding from BOS (ties pick the lowest token id); stops at EOS or
// max_len steps. x_o may be empty for the unsupervised variant.
DecodingResult greedy_decode(const ParaphraseVaeParams& params,
                             const ModelConfig& config, const Tensor& z,
                             const Tensor& x_o, std::int64_t max_len);

// Length-normalized beam search: hypotheses ranked by summed log-probability
// while expanding, EOS freezes a hypothesis into the completed pool, and the
// final order is by logprob / steps with lexicographic tie-breaking.
std::vector<DecodingResult> beam_search(const ParaphraseVaeParams& params,
                                        const ModelConfig& config,
                                        const Tensor& z, const Tensor& x_o,
                                        std::int64_t beam_size,
                                        std::int64_t max_len);

// Final hidden state of the decoder-side original-sentence encoder; an empty
// tensor for the unsupervised variant.
Tensor encode_for_generation(const ParaphraseVaeParams& params,
                             const ModelConfig& config,
                             const std::vector<TokenId>& input);

// Posterior (mu, logvar) for variants that recognize from the original
// sentence alone (vae-s, unsupervised); ConfigError otherwise.
LatentCode posterior_from_original(const ParaphraseVaeParams& params,
                                   const ModelConfig& config,
                                   const std::vector<TokenId>& input);

// Sum of per-step log-softmax of `tokens` (plus EOS when the sequence ended
// before max_len) under the decoder; used for self-consistency re-scoring.
double rescore_sequence(const ParaphraseVaeParams& params,
                        const ModelConfig& config, const Tensor& z,
                        const Tensor& x_o, const std::vector<TokenId>& tokens,
                        std::int64_t max_len);

}  // namespace pvae

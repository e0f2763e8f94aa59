#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pvae/corpus.hpp"
#include "pvae/layers.hpp"

namespace pvae {

// vae-svg: conditional sentence variant generator (separate original-sentence
//          encoders on the recognition and decoder sides).
// vae-svg-eq: same model with one shared original-sentence encoder.
// vae-s: recognition reads the original sentence only (no paraphrase encoder).
// unsupervised: plain sentence VAE over the original sentence, unconditioned.
enum class Variant { kVaeSvg, kVaeSvgEq, kVaeS, kUnsupervised };

Variant parse_variant(const std::string& name);
std::string variant_name(Variant v);

struct ModelConfig {
  Variant variant = Variant::kVaeSvg;
  Index vocab_size = 0;
  Index embed_dim = 300;
  Index hidden_dim = 600;
  Index latent_dim = 1100;
  Index encoder_layers = 1;
  Index decoder_layers = 2;
  Index max_length = 15;
  double word_dropout_rate = 0.3;

  void validate() const;
};

// All learnable tensors. The word embedding is shared by every encoder and
// the decoder. In vae-svg-eq the decoder-side original-sentence encoder is
// the recognition-side one (same storage, so enc_original_decoder is empty);
// use decoder_side_original_encoder().
struct ParaphraseVaeParams {
  Variant variant = Variant::kVaeSvg;
  EmbeddingTable embedding;
  std::optional<LstmStackParams> enc_original_recognition;
  std::optional<LstmStackParams> enc_original_decoder;
  std::optional<LstmStackParams> enc_paraphrase;
  std::optional<Linear> enc_init_proj;  // x_o -> recognition encoder (h0, c0)
  std::optional<Linear> dec_init_proj;  // x_o -> decoder (h0, c0)
  GaussianHead head;
  LstmStackParams decoder;
  Linear output_proj;

  const LstmStackParams* decoder_side_original_encoder() const;
};

ParaphraseVaeParams init_params(const ModelConfig& config, std::uint64_t seed);

// Total learnable scalar count from config arithmetic alone (shared tensors
// counted once).
std::int64_t parameter_count(const ModelConfig& config);

// Every unique parameter tensor as (name, tensor) in a fixed order. This
// order defines the checkpoint manifest, optimizer state and leaf binding.
std::vector<std::pair<std::string, const Tensor*>> param_entries(
    const ParaphraseVaeParams& p);
std::vector<std::pair<std::string, Tensor*>> param_entries(
    ParaphraseVaeParams& p);

// Tape-bound leaves for one evaluation. In vae-svg-eq both original-encoder
// views alias the same leaves, so backward accumulates one gradient for the
// shared stack.
struct BoundModel {
  NodeId embedding = kNoNode;
  std::optional<LstmStackNodes> enc_original_recognition;
  std::optional<LstmStackNodes> enc_original_decoder;
  std::optional<LstmStackNodes> enc_paraphrase;
  std::optional<LinearNodes> enc_init_proj;
  std::optional<LinearNodes> dec_init_proj;
  GaussianHeadNodes head;
  LstmStackNodes decoder;
  LinearNodes output_proj;
  std::vector<std::pair<std::string, NodeId>> leaves;  // visit order
};

BoundModel bind_model(Tape& t, const ParaphraseVaeParams& params);

enum class WhichSide { kRecognition, kDecoder };

// Final top-layer hidden state (1 x hidden) of the selected original-sentence
// encoder over the embedded tokens.
NodeId encode_original(Tape& t, const BoundModel& m, const ModelConfig& config,
                       const std::vector<TokenId>& s_o, WhichSide side);

// Posterior parameters (mu, logvar), each 1 x latent.
//  - vae-svg / vae-svg-eq: recognition encoder over s_p, initialized from a
//    learned projection of x_o, final state through the Gaussian head.
//  - vae-s: head reads x_o directly; s_p is ignored.
//  - unsupervised: recognition encoder over s_p (callers pass s_p = s_o);
//    x_o must be kNoNode.
std::pair<NodeId, NodeId> recognize(Tape& t, const BoundModel& m,
                                    const ModelConfig& config, NodeId x_o,
                                    const std::vector<TokenId>& s_p);

// Teacher-forced decoding of `target` (EOS-terminated). Step t consumes
// concat(embed(prev), z) with prev = BOS at t = 0 else target[t-1], replaced
// by UNK where dropout_mask is set. Decoder state starts from a projection
// of x_o (zeros when x_o is kNoNode).
std::vector<NodeId> decode_teacher_forced(Tape& t, const BoundModel& m,
                                          const ModelConfig& config, NodeId z,
                                          NodeId x_o,
                                          const std::vector<TokenId>& target,
                                          const std::vector<std::uint8_t>& dropout_mask);

// steps x vocab matrix of the per-step logit values.
Tensor materialize_logits(const Tape& t, const std::vector<NodeId>& step_logits);

// -sum_t log softmax(logits[t])[target[t]], computed via a max-shifted
// log-sum-exp so large logits cannot overflow.
NodeId sequence_nll(Tape& t, const std::vector<NodeId>& step_logits,
                    const std::vector<TokenId>& target);

struct ElboNodes {
  NodeId total = kNoNode;
  NodeId nll = kNoNode;
  NodeId kl = kNoNode;
  NodeId mu = kNoNode;
  NodeId logvar = kNoNode;
  NodeId z = kNoNode;
};

// Single-sample bound for one pair: total = nll + kl_weight * kl, to be
// minimized. The unsupervised variant reconstructs the original sentence.
ElboNodes elbo_loss(Tape& t, const BoundModel& m, const ModelConfig& config,
                    const SentencePair& pair, double kl_weight,
                    const Tensor& noise,
                    const std::vector<std::uint8_t>& dropout_mask);

struct ElboValues {
  double total = 0;
  double nll = 0;
  double kl = 0;
};

ElboValues elbo_loss_value(const ParaphraseVaeParams& params,
                           const ModelConfig& config, const SentencePair& pair,
                           double kl_weight, const Tensor& noise,
                           const std::vector<std::uint8_t>& dropout_mask);

// The number of decoder steps for a target sequence (== its length, EOS
// included); dropout masks must have exactly this many entries.
inline std::size_t decode_steps(const std::vector<TokenId>& target) {
  return target.size();
}

}  // namespace pvae

#include "pvae/model.hpp"

#include <cmath>

namespace pvae {

Variant parse_variant(const std::string& name) {
  if (name == "vae-svg") return Variant::kVaeSvg;
  if (name == "vae-svg-eq") return Variant::kVaeSvgEq;
  if (name == "vae-s") return Variant::kVaeS;
  if (name == "unsupervised") return Variant::kUnsupervised;
  throw ConfigError("unknown variant: " + name);
}

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kVaeSvg: return "vae-svg";
    case Variant::kVaeSvgEq: return "vae-svg-eq";
    case Variant::kVaeS: return "vae-s";
    case Variant::kUnsupervised: return "unsupervised";
  }
  return "?";
}

void ModelConfig::validate() const {
  if (vocab_size < 4) throw ConfigError("vocab_size must be >= 4");
  if (embed_dim < 1 || hidden_dim < 1 || latent_dim < 1)
    throw ConfigError("dimensions must be >= 1");
  if (encoder_layers < 1 || decoder_layers < 1)
    throw ConfigError("layer counts must be >= 1");
  if (max_length < 1) throw ConfigError("max_length must be >= 1");
  if (word_dropout_rate < 0.0 || word_dropout_rate > 1.0)
    throw ConfigError("word_dropout_rate must be in [0, 1]");
}

const LstmStackParams* ParaphraseVaeParams::decoder_side_original_encoder()
    const {
  if (variant == Variant::kVaeSvgEq) {
    return enc_original_recognition ? &*enc_original_recognition : nullptr;
  }
  return enc_original_decoder ? &*enc_original_decoder : nullptr;
}

ParaphraseVaeParams init_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(mix_seed(seed, 0x70766165 /* "pvae" */));
  ParaphraseVaeParams p;
  p.variant = config.variant;
  p.embedding.matrix = xavier_uniform(config.vocab_size, config.embed_dim, rng);

  const bool conditioned = config.variant != Variant::kUnsupervised;
  const bool has_para_encoder = config.variant == Variant::kVaeSvg ||
                                config.variant == Variant::kVaeSvgEq ||
                                config.variant == Variant::kUnsupervised;

  if (conditioned)
    p.enc_original_recognition = init_lstm_stack(
        config.embed_dim, config.hidden_dim, config.encoder_layers, rng);
  if (config.variant == Variant::kVaeSvg || config.variant == Variant::kVaeS)
    p.enc_original_decoder = init_lstm_stack(
        config.embed_dim, config.hidden_dim, config.encoder_layers, rng);
  if (has_para_encoder)
    p.enc_paraphrase = init_lstm_stack(config.embed_dim, config.hidden_dim,
                                       config.encoder_layers, rng);
  if (config.variant == Variant::kVaeSvg || config.variant == Variant::kVaeSvgEq)
    p.enc_init_proj = init_linear(
        config.hidden_dim, 2 * config.encoder_layers * config.hidden_dim, rng);
  if (conditioned)
    p.dec_init_proj = init_linear(
        config.hidden_dim, 2 * config.decoder_layers * config.hidden_dim, rng);

  p.head = init_gaussian_head(config.hidden_dim, config.latent_dim, rng);
  p.decoder = init_lstm_stack(config.embed_dim + config.latent_dim,
                              config.hidden_dim, config.decoder_layers, rng);
  p.output_proj = init_linear(config.hidden_dim, config.vocab_size, rng);
  return p;
}

std::int64_t parameter_count(const ModelConfig& config) {
  auto lstm_stack = [&](std::int64_t input_dim) {
    std::int64_t total = 0;
    std::int64_t h = config.hidden_dim;
    for (Index l = 0; l < config.encoder_layers; ++l) {
      std::int64_t in = l == 0 ? input_dim : h;
      total += 4 * (in * h + h * h + h);
    }
    return total;
  };
  std::int64_t h = config.hidden_dim;
  std::int64_t total = config.vocab_size * config.embed_dim;  // embedding
  std::int64_t enc = lstm_stack(config.embed_dim);

  switch (config.variant) {
    case Variant::kVaeSvg:
      total += 3 * enc;  // two original-sentence encoders + paraphrase encoder
      total += h * (2 * config.encoder_layers * h) + 2 * config.encoder_layers * h;
      total += h * (2 * config.decoder_layers * h) + 2 * config.decoder_layers * h;
      break;
    case Variant::kVaeSvgEq:
      total += 2 * enc;  // shared original-sentence encoder + paraphrase encoder
      total += h * (2 * config.encoder_layers * h) + 2 * config.encoder_layers * h;
      total += h * (2 * config.decoder_layers * h) + 2 * config.decoder_layers * h;
      break;
    case Variant::kVaeS:
      total += 2 * enc;  // two original-sentence encoders, no paraphrase encoder
      total += h * (2 * config.decoder_layers * h) + 2 * config.decoder_layers * h;
      break;
    case Variant::kUnsupervised:
      total += enc;  // recognition encoder only
      break;
  }

  total += 2 * (h * config.latent_dim + config.latent_dim);  // head
  std::int64_t dec_in = config.embed_dim + config.latent_dim;
  for (Index l = 0; l < config.decoder_layers; ++l) {
    std::int64_t in = l == 0 ? dec_in : h;
    total += 4 * (in * h + h * h + h);
  }
  total += h * config.vocab_size + config.vocab_size;  // output projection
  return total;
}

namespace {

template <class P, class Fn>
void for_each_tensor(P& p, Fn&& fn) {
  auto stack = [&fn](const std::string& name, auto& s) {
    for (std::size_t l = 0; l < s.layers.size(); ++l) {
      const std::string base = name + ".l" + std::to_string(l);
      auto& c = s.layers[l];
      fn(base + ".wi", c.wi);
      fn(base + ".wf", c.wf);
      fn(base + ".wo", c.wo);
      fn(base + ".wg", c.wg);
      fn(base + ".ui", c.ui);
      fn(base + ".uf", c.uf);
      fn(base + ".uo", c.uo);
      fn(base + ".ug", c.ug);
      fn(base + ".bi", c.bi);
      fn(base + ".bf", c.bf);
      fn(base + ".bo", c.bo);
      fn(base + ".bg", c.bg);
    }
  };
  fn("embedding", p.embedding.matrix);
  if (p.enc_original_recognition)
    stack("enc_original_recognition", *p.enc_original_recognition);
  if (p.enc_original_decoder)
    stack("enc_original_decoder", *p.enc_original_decoder);
  if (p.enc_paraphrase) stack("enc_paraphrase", *p.enc_paraphrase);
  if (p.enc_init_proj) {
    fn("enc_init_proj.w", p.enc_init_proj->w);
    fn("enc_init_proj.b", p.enc_init_proj->b);
  }
  if (p.dec_init_proj) {
    fn("dec_init_proj.w", p.dec_init_proj->w);
    fn("dec_init_proj.b", p.dec_init_proj->b);
  }
  fn("head.mu_w", p.head.mu_w);
  fn("head.mu_b", p.head.mu_b);
  fn("head.logvar_w", p.head.logvar_w);
  fn("head.logvar_b", p.head.logvar_b);
  stack("decoder", p.decoder);
  fn("output_proj.w", p.output_proj.w);
  fn("output_proj.b", p.output_proj.b);
}

}  // namespace

std::vector<std::pair<std::string, const Tensor*>> param_entries(
    const ParaphraseVaeParams& p) {
  std::vector<std::pair<std::string, const Tensor*>> out;
  for_each_tensor(p, [&out](const std::string& name, const Tensor& t) {
    out.push_back({name, &t});
  });
  return out;
}

std::vector<std::pair<std::string, Tensor*>> param_entries(
    ParaphraseVaeParams& p) {
  std::vector<std::pair<std::string, Tensor*>> out;
  for_each_tensor(p, [&out](const std::string& name, Tensor& t) {
    out.push_back({name, &t});
  });
  return out;
}

BoundModel bind_model(Tape& t, const ParaphraseVaeParams& params) {
  Binder binder(t);
  BoundModel m;
  m.embedding = binder.bind("embedding", params.embedding.matrix);
  if (params.enc_original_recognition)
    m.enc_original_recognition =
        bind_params(binder, *params.enc_original_recognition, "enc_original_recognition");
  if (params.enc_original_decoder)
    m.enc_original_decoder =
        bind_params(binder, *params.enc_original_decoder, "enc_original_decoder");
  else if (params.variant == Variant::kVaeSvgEq)
    m.enc_original_decoder = m.enc_original_recognition;  // shared leaves
  if (params.enc_paraphrase)
    m.enc_paraphrase = bind_params(binder, *params.enc_paraphrase, "enc_paraphrase");
  if (params.enc_init_proj)
    m.enc_init_proj = bind_params(binder, *params.enc_init_proj, "enc_init_proj");
  if (params.dec_init_proj)
    m.dec_init_proj = bind_params(binder, *params.dec_init_proj, "dec_init_proj");
  m.head = bind_params(binder, params.head, "head");
  m.decoder = bind_params(binder, params.decoder, "decoder");
  m.output_proj = bind_params(binder, params.output_proj, "output_proj");
  m.leaves = binder.entries();
  return m;
}

namespace {

std::vector<NodeId> embed_sequence(Tape& t, NodeId table,
                                   const std::vector<TokenId>& tokens) {
  std::vector<NodeId> xs;
  xs.reserve(tokens.size());
  for (TokenId id : tokens)
    xs.push_back(embedding_lookup(t, table, {static_cast<Index>(id)}));
  return xs;
}

// Split a 1 x (2 * layers * hidden) projection into per-layer (h, c).
StackState state_from_projection(Tape& t, NodeId proj, Index layers,
                                 Index hidden) {
  StackState state;
  for (Index l = 0; l < layers; ++l) {
    NodeId h = slice(t, proj, 2 * l * hidden, (2 * l + 1) * hidden);
    NodeId c = slice(t, proj, (2 * l + 1) * hidden, (2 * l + 2) * hidden);
    state.push_back({h, c});
  }
  return state;
}

}  // namespace

NodeId encode_original(Tape& t, const BoundModel& m, const ModelConfig& config,
                       const std::vector<TokenId>& s_o, WhichSide side) {
  if (s_o.empty()) throw EmptyInputError("encode_original: empty sequence");
  const std::optional<LstmStackNodes>& stack =
      side == WhichSide::kRecognition ? m.enc_original_recognition
                                      : m.enc_original_decoder;
  if (!stack)
    throw ConfigError("encode_original: variant " +
                      variant_name(config.variant) +
                      " has no original-sentence encoder on this side");
  auto res = lstm_encode(t, *stack, embed_sequence(t, m.embedding, s_o));
  return res.outputs.back();
}

std::pair<NodeId, NodeId> recognize(Tape& t, const BoundModel& m,
                                    const ModelConfig& config, NodeId x_o,
                                    const std::vector<TokenId>& s_p) {
  if (config.variant == Variant::kVaeS) {
    if (x_o == kNoNode) throw ConfigError("recognize: vae-s requires x_o");
    return gaussian_head(t, m.head, x_o);
  }
  if (s_p.empty()) throw EmptyInputError("recognize: empty sequence");

  std::optional<StackState> init;
  if (config.variant == Variant::kUnsupervised) {
    if (x_o != kNoNode)
      throw ConfigError("recognize: unsupervised takes no x_o");
  } else {
    if (x_o == kNoNode) throw ConfigError("recognize: missing x_o");
    NodeId proj = linear_apply(t, *m.enc_init_proj, x_o);
    init = state_from_projection(t, proj, config.encoder_layers,
                                 config.hidden_dim);
  }
  auto res = lstm_encode(t, *m.enc_paraphrase,
                         embed_sequence(t, m.embedding, s_p), init);
  return gaussian_head(t, m.head, res.outputs.back());
}

std::vector<NodeId> decode_teacher_forced(
    Tape& t, const BoundModel& m, const ModelConfig& config, NodeId z,
    NodeId x_o, const std::vector<TokenId>& target,
    const std::vector<std::uint8_t>& dropout_mask) {
  if (target.empty()) throw EmptyInputError("decode_teacher_forced: empty target");
  if (dropout_mask.size() != target.size())
    throw ShapeError("decode_teacher_forced: mask length " +
                     std::to_string(dropout_mask.size()) + " != steps " +
                     std::to_string(target.size()));

  StackState state;
  if (x_o != kNoNode) {
    if (!m.dec_init_proj)
      throw ConfigError("decode_teacher_forced: variant has no decoder projection");
    NodeId proj = linear_apply(t, *m.dec_init_proj, x_o);
    state = state_from_projection(t, proj, config.decoder_layers,
                                  config.hidden_dim);
  } else {
    for (Index l = 0; l < config.decoder_layers; ++l) {
      state.push_back({t.leaf(Tensor::zeros({1, config.hidden_dim})),
                       t.leaf(Tensor::zeros({1, config.hidden_dim}))});
    }
  }

  std::vector<NodeId> step_logits;
  step_logits.reserve(target.size());
  for (std::size_t step = 0; step < target.size(); ++step) {
    TokenId prev = step == 0 ? Vocabulary::kBos : target[step - 1];
    if (dropout_mask[step]) prev = Vocabulary::kUnk;
    NodeId x = embedding_lookup(t, m.embedding, {static_cast<Index>(prev)});
    NodeId input = concat(t, {x, z});
    for (Index l = 0; l < config.decoder_layers; ++l) {
      state[l] = lstm_cell_step(t, m.decoder.layers[l], input, state[l]);
      input = state[l].h;
    }
    step_logits.push_back(linear_apply(t, m.output_proj, input));
  }
  return step_logits;
}

Tensor materialize_logits(const Tape& t,
                          const std::vector<NodeId>& step_logits) {
  Index steps = static_cast<Index>(step_logits.size());
  Index vocab = t.value(step_logits[0]).cols();
  Tensor out({steps, vocab});
  for (Index s = 0; s < steps; ++s)
    out.mat().row(s) = t.value(step_logits[s]).mat().row(0);
  return out;
}

NodeId sequence_nll(Tape& t, const std::vector<NodeId>& step_logits,
                    const std::vector<TokenId>& target) {
  if (step_logits.size() != target.size())
    throw ShapeError("sequence_nll: steps != targets");
  NodeId nll = kNoNode;
  for (std::size_t step = 0; step < target.size(); ++step) {
    NodeId logits = step_logits[step];
    // The shift constant cancels exactly in log-sum-exp minus the picked
    // logit; it only keeps exp in range.
    double shift = -t.value(logits).flat().maxCoeff();
    NodeId shifted =
        add(t, logits, t.leaf(Tensor::full(t.value(logits).shape(), shift)));
    NodeId lse = log(t, sum(t, exp(t, shifted)));
    NodeId picked = sum(t, slice(t, shifted, target[step], target[step] + 1));
    NodeId step_nll = add(t, lse, scalar_scale(t, picked, -1.0));
    nll = nll == kNoNode ? step_nll : add(t, nll, step_nll);
  }
  return nll;
}

ElboNodes elbo_loss(Tape& t, const BoundModel& m, const ModelConfig& config,
                    const SentencePair& pair, double kl_weight,
                    const Tensor& noise,
                    const std::vector<std::uint8_t>& dropout_mask) {
  if (kl_weight < 0.0 || kl_weight > 1.0)
    throw ConfigError("elbo_loss: kl_weight must be in [0, 1]");

  const bool unsupervised = config.variant == Variant::kUnsupervised;
  const std::vector<TokenId>& target =
      unsupervised ? pair.original : pair.paraphrase;

  ElboNodes out;
  NodeId x_o_rec = kNoNode;
  NodeId x_o_dec = kNoNode;
  if (!unsupervised) {
    x_o_rec = encode_original(t, m, config, pair.original, WhichSide::kRecognition);
    x_o_dec = encode_original(t, m, config, pair.original, WhichSide::kDecoder);
  }

  const std::vector<TokenId>& recog_input =
      unsupervised ? pair.original : pair.paraphrase;
  std::tie(out.mu, out.logvar) = recognize(t, m, config, x_o_rec, recog_input);
  out.z = reparameterize(t, out.mu, out.logvar, t.leaf(noise));

  auto step_logits =
      decode_teacher_forced(t, m, config, out.z, x_o_dec, target, dropout_mask);
  out.nll = sequence_nll(t, step_logits, target);
  out.kl = kl_gaussian(t, out.mu, out.logvar);
  out.total = add(t, out.nll, scalar_scale(t, out.kl, kl_weight));
  return out;
}

ElboValues elbo_loss_value(const ParaphraseVaeParams& params,
                           const ModelConfig& config, const SentencePair& pair,
                           double kl_weight, const Tensor& noise,
                           const std::vector<std::uint8_t>& dropout_mask) {
  Tape t;
  BoundModel m = bind_model(t, params);
  ElboNodes nodes = elbo_loss(t, m, config, pair, kl_weight, noise, dropout_mask);
  return {t.value(nodes.total)[0], t.value(nodes.nll)[0], t.value(nodes.kl)[0]};
}

}  // namespace pvae

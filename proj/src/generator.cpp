#include "pvae/generator.hpp"

#include <algorithm>
#include <cmath>

namespace pvae {

DecodeMode parse_decode_mode(const std::string& name) {
  if (name == "greedy") return DecodeMode::kGreedy;
  if (name == "beam") return DecodeMode::kBeam;
  throw ConfigError("unknown decode mode: " + name);
}

std::string decode_mode_name(DecodeMode m) {
  return m == DecodeMode::kGreedy ? "greedy" : "beam";
}

ZMode parse_z_mode(const std::string& name) {
  if (name == "prior-sample") return ZMode::kPriorSample;
  if (name == "posterior-mean") return ZMode::kPosteriorMean;
  throw ConfigError("unknown z mode: " + name);
}

std::string z_mode_name(ZMode m) {
  return m == ZMode::kPriorSample ? "prior-sample" : "posterior-mean";
}

void GenerationRequest::validate() const {
  if (num_samples < 1) throw ConfigError("num_samples must be >= 1");
  if (beam_size < 1) throw ConfigError("beam_size must be >= 1");
  if (max_decode_length < 0) throw ConfigError("max_decode_length must be >= 0");
}

namespace {

// One decoder evaluation context: a tape holding the bound parameters, the
// latent code and the conditioning-derived initial state.
struct DecoderContext {
  Tape tape;
  BoundModel bound;
  const ModelConfig* config = nullptr;
  NodeId z = kNoNode;
  StackState initial_state;
};

DecoderContext make_decoder(const ParaphraseVaeParams& params,
                            const ModelConfig& config, const Tensor& z,
                            const Tensor& x_o) {
  DecoderContext ctx;
  ctx.config = &config;
  ctx.bound = bind_model(ctx.tape, params);
  Tensor zr = z;
  if (zr.rank() == 1) zr = Tensor({1, zr.size()}, std::vector<double>(
                                      zr.flat().data(), zr.flat().data() + zr.size()));
  ctx.z = ctx.tape.leaf(zr);
  if (x_o.size() > 0) {
    if (!ctx.bound.dec_init_proj)
      throw ConfigError("decoder conditioning not available for this variant");
    NodeId proj =
        linear_apply(ctx.tape, *ctx.bound.dec_init_proj, ctx.tape.leaf(x_o));
    for (Index l = 0; l < config.decoder_layers; ++l) {
      Index h = config.hidden_dim;
      ctx.initial_state.push_back(
          {slice(ctx.tape, proj, 2 * l * h, (2 * l + 1) * h),
           slice(ctx.tape, proj, (2 * l + 1) * h, (2 * l + 2) * h)});
    }
  } else {
    for (Index l = 0; l < config.decoder_layers; ++l)
      ctx.initial_state.push_back(
          {ctx.tape.leaf(Tensor::zeros({1, config.hidden_dim})),
           ctx.tape.leaf(Tensor::zeros({1, config.hidden_dim}))});
  }
  return ctx;
}

struct StepResult {
  StackState state;
  Eigen::VectorXd log_probs;
};

StepResult decoder_step(DecoderContext& ctx, TokenId prev,
                        const StackState& state) {
  Tape& t = ctx.tape;
  NodeId x = embedding_lookup(t, ctx.bound.embedding,
                              {static_cast<Index>(prev)});
  NodeId input = concat(t, {x, ctx.z});
  StepResult out;
  out.state = state;
  for (Index l = 0; l < ctx.config->decoder_layers; ++l) {
    out.state[l] = lstm_cell_step(t, ctx.bound.decoder.layers[l], input,
                                  out.state[l]);
    input = out.state[l].h;
  }
  NodeId logits = linear_apply(t, ctx.bound.output_proj, input);
  Eigen::VectorXd row = t.value(logits).flat();
  double max = row.maxCoeff();
  double lse = max + std::log((row.array() - max).exp().sum());
  out.log_probs = row.array() - lse;
  return out;
}

// argmax with ties resolved to the lowest index
Index argmax_lowest(const Eigen::VectorXd& v) {
  Index best = 0;
  for (Index i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

LatentCode prior_code(const Tensor& z) {
  LatentCode code;
  code.z = z;
  code.mu = Tensor::zeros(z.shape());
  code.logvar = Tensor::zeros(z.shape());
  return code;
}

}  // namespace

DecodingResult greedy_decode(const ParaphraseVaeParams& params,
                             const ModelConfig& config, const Tensor& z,
                             const Tensor& x_o, std::int64_t max_len) {
  if (max_len < 1) throw ConfigError("greedy_decode: max_len must be >= 1");
  DecoderContext ctx = make_decoder(params, config, z, x_o);

  DecodingResult result;
  result.z_used = prior_code(z);
  StackState state = ctx.initial_state;
  TokenId prev = Vocabulary::kBos;
  for (std::int64_t step = 0; step < max_len; ++step) {
    StepResult sr = decoder_step(ctx, prev, state);
    Index pick = argmax_lowest(sr.log_probs);
    result.logprob += sr.log_probs[pick];
    if (pick == Vocabulary::kEos) return result;
    result.tokens.push_back(pick);
    state = std::move(sr.state);
    prev = pick;
  }
  return result;
}

std::vector<DecodingResult> beam_search(const ParaphraseVaeParams& params,
                                        const ModelConfig& config,
                                        const Tensor& z, const Tensor& x_o,
                                        std::int64_t beam_size,
                                        std::int64_t max_len) {
  if (beam_size < 1) throw ConfigError("beam_search: beam_size must be >= 1");
  if (max_len < 1) throw ConfigError("beam_search: max_len must be >= 1");
  DecoderContext ctx = make_decoder(params, config, z, x_o);

  struct Hypothesis {
    std::vector<TokenId> tokens;
    StackState state;         // after consuming BOS + tokens
    Eigen::VectorXd next_lp;  // distribution over the next token
    double sum_lp = 0;
  };
  struct Completed {
    std::vector<TokenId> tokens;
    double sum_lp = 0;
    std::int64_t steps = 0;  // EOS counted when present
  };

  std::vector<Hypothesis> live(1);
  {
    StepResult sr = decoder_step(ctx, Vocabulary::kBos, ctx.initial_state);
    live[0].state = std::move(sr.state);
    live[0].next_lp = std::move(sr.log_probs);
  }
  std::vector<Completed> pool;

  for (std::int64_t depth = 1; depth <= max_len; ++depth) {
    if (live.empty() ||
        static_cast<std::int64_t>(pool.size()) >= beam_size)
      break;

    struct Candidate {
      std::size_t parent;
      TokenId token;
      double sum_lp;
    };
    std::vector<Candidate> candidates;
    candidates.reserve(live.size() * config.vocab_size);
    for (std::size_t p = 0; p < live.size(); ++p)
      for (Index v = 0; v < config.vocab_size; ++v)
        candidates.push_back({p, v, live[p].sum_lp + live[p].next_lp[v]});

    auto child_less = [&](const Candidate& a, const Candidate& b) {
      if (a.sum_lp != b.sum_lp) return a.sum_lp > b.sum_lp;
      const auto& ta = live[a.parent].tokens;
      const auto& tb = live[b.parent].tokens;
      if (ta != tb) return std::lexicographical_compare(ta.begin(), ta.end(),
                                                        tb.begin(), tb.end());
      return a.token < b.token;
    };
    std::size_t keep = std::min<std::size_t>(beam_size, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + keep,
                      candidates.end(), child_less);
    candidates.resize(keep);

    std::vector<Hypothesis> next_live;
    for (const Candidate& c : candidates) {
      if (c.token == Vocabulary::kEos) {
        pool.push_back({live[c.parent].tokens, c.sum_lp, depth});
      } else if (depth < max_len) {
        Hypothesis h;
        h.tokens = live[c.parent].tokens;
        h.tokens.push_back(c.token);
        h.sum_lp = c.sum_lp;
        StepResult sr = decoder_step(ctx, c.token, live[c.parent].state);
        h.state = std::move(sr.state);
        h.next_lp = std::move(sr.log_probs);
        next_live.push_back(std::move(h));
      } else {
        // ran out of steps without EOS
        auto tokens = live[c.parent].tokens;
        tokens.push_back(c.token);
        pool.push_back({std::move(tokens), c.sum_lp, depth});
      }
    }
    live = std::move(next_live);
  }

  auto normalized = [](const Completed& c) {
    return c.sum_lp / static_cast<double>(c.steps);
  };
  std::stable_sort(pool.begin(), pool.end(),
                   [&](const Completed& a, const Completed& b) {
                     double na = normalized(a), nb = normalized(b);
                     if (na != nb) return na > nb;
                     return a.tokens < b.tokens;
                   });

  std::vector<DecodingResult> results;
  results.reserve(pool.size());
  for (const Completed& c : pool) {
    DecodingResult r;
    r.tokens = c.tokens;
    r.logprob = c.sum_lp;
    r.z_used = prior_code(z);
    results.push_back(std::move(r));
  }
  return results;
}

Tensor encode_for_generation(const ParaphraseVaeParams& params,
                             const ModelConfig& config,
                             const std::vector<TokenId>& input) {
  if (input.empty()) throw EmptyInputError("encode_for_generation: empty input");
  if (config.variant == Variant::kUnsupervised) return Tensor();
  Tape t;
  BoundModel m = bind_model(t, params);
  NodeId x_o = encode_original(t, m, config, input, WhichSide::kDecoder);
  return t.value(x_o);
}

LatentCode posterior_from_original(const ParaphraseVaeParams& params,
                                   const ModelConfig& config,
                                   const std::vector<TokenId>& input) {
  if (input.empty()) throw EmptyInputError("posterior_from_original: empty input");
  Tape t;
  BoundModel m = bind_model(t, params);
  NodeId mu = kNoNode, logvar = kNoNode;
  if (config.variant == Variant::kVaeS) {
    NodeId x_o = encode_original(t, m, config, input, WhichSide::kRecognition);
    std::tie(mu, logvar) = recognize(t, m, config, x_o, input);
  } else if (config.variant == Variant::kUnsupervised) {
    std::tie(mu, logvar) = recognize(t, m, config, kNoNode, input);
  } else {
    throw ConfigError(
        "posterior-mean is unavailable at test time for variant " +
        variant_name(config.variant) + " (no paraphrase input)");
  }
  LatentCode code;
  code.mu = t.value(mu);
  code.logvar = t.value(logvar);
  code.z = code.mu;  // zero-noise draw
  return code;
}

double rescore_sequence(const ParaphraseVaeParams& params,
                        const ModelConfig& config, const Tensor& z,
                        const Tensor& x_o, const std::vector<TokenId>& tokens,
                        std::int64_t max_len) {
  DecoderContext ctx = make_decoder(params, config, z, x_o);
  StackState state = ctx.initial_state;
  TokenId prev = Vocabulary::kBos;
  double total = 0;
  for (TokenId tok : tokens) {
    StepResult sr = decoder_step(ctx, prev, state);
    total += sr.log_probs[tok];
    state = std::move(sr.state);
    prev = tok;
  }
  if (static_cast<std::int64_t>(tokens.size()) < max_len) {
    StepResult sr = decoder_step(ctx, prev, state);
    total += sr.log_probs[Vocabulary::kEos];
  }
  return total;
}

std::vector<DecodingResult> sample_paraphrases(const ParaphraseVaeParams& params,
                                               const ModelConfig& config,
                                               const GenerationRequest& request) {
  request.validate();
  if (request.input.empty())
    throw EmptyInputError("sample_paraphrases: empty input");

  std::int64_t max_len = request.max_decode_length > 0
                             ? request.max_decode_length
                             : config.max_length + 1;
  Tensor x_o = encode_for_generation(params, config, request.input);

  LatentCode posterior;
  if (request.z_mode == ZMode::kPosteriorMean)
    posterior = posterior_from_original(params, config, request.input);

  Rng rng(mix_seed(request.seed, 0x67656e /* "gen" */));
  std::vector<DecodingResult> results;
  results.reserve(request.num_samples);
  for (std::int64_t i = 0; i < request.num_samples; ++i) {
    LatentCode code;
    if (request.z_mode == ZMode::kPosteriorMean) {
      code = posterior;
    } else {
      Tensor z({1, config.latent_dim});
      for (Index k = 0; k < z.size(); ++k) z[k] = rng.normal();
      code = prior_code(z);
    }
    DecodingResult r;
    if (request.mode == DecodeMode::kGreedy) {
      r = greedy_decode(params, config, code.z, x_o, max_len);
    } else {
      r = beam_search(params, config, code.z, x_o, request.beam_size,
                      max_len)
              .front();
    }
    r.z_used = code;
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace pvae

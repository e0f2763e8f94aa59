#include "pvae/config_json.hpp"

#include <set>

namespace pvae {

namespace {

void require_known_keys(const nlohmann::json& j,
                        const std::set<std::string>& known,
                        const std::string& where) {
  if (!j.is_object()) throw FormatError(where + ": expected a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key()))
      throw FormatError(where + ": unknown key \"" + it.key() + "\"");
}

template <class T>
void get_if_present(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

nlohmann::json to_json(const ModelConfig& c) {
  return {
      {"variant", variant_name(c.variant)},
      {"vocab_size", c.vocab_size},
      {"embed_dim", c.embed_dim},
      {"hidden_dim", c.hidden_dim},
      {"latent_dim", c.latent_dim},
      {"encoder_layers", c.encoder_layers},
      {"decoder_layers", c.decoder_layers},
      {"max_length", c.max_length},
      {"word_dropout_rate", c.word_dropout_rate},
  };
}

void from_json_into(const nlohmann::json& j, ModelConfig& c) {
  require_known_keys(j,
                     {"variant", "vocab_size", "embed_dim", "hidden_dim",
                      "latent_dim", "encoder_layers", "decoder_layers",
                      "max_length", "word_dropout_rate"},
                     "model config");
  if (j.contains("variant")) c.variant = parse_variant(j.at("variant"));
  get_if_present(j, "vocab_size", c.vocab_size);
  get_if_present(j, "embed_dim", c.embed_dim);
  get_if_present(j, "hidden_dim", c.hidden_dim);
  get_if_present(j, "latent_dim", c.latent_dim);
  get_if_present(j, "encoder_layers", c.encoder_layers);
  get_if_present(j, "decoder_layers", c.decoder_layers);
  get_if_present(j, "max_length", c.max_length);
  get_if_present(j, "word_dropout_rate", c.word_dropout_rate);
}

nlohmann::json to_json(const TrainConfig& c) {
  return {
      {"learning_rate", c.learning_rate},
      {"batch_size", c.batch_size},
      {"total_iterations", c.total_iterations},
      {"kl_warmup_iterations", c.kl_warmup_iterations},
      {"optimizer", optimizer_name(c.optimizer)},
      {"gradient_clip_norm", c.gradient_clip_norm},
      {"seed", c.seed},
      {"checkpoint_every", c.checkpoint_every},
  };
}

void from_json_into(const nlohmann::json& j, TrainConfig& c) {
  require_known_keys(j,
                     {"learning_rate", "batch_size", "total_iterations",
                      "kl_warmup_iterations", "optimizer",
                      "gradient_clip_norm", "seed", "checkpoint_every"},
                     "train config");
  get_if_present(j, "learning_rate", c.learning_rate);
  get_if_present(j, "batch_size", c.batch_size);
  get_if_present(j, "total_iterations", c.total_iterations);
  get_if_present(j, "kl_warmup_iterations", c.kl_warmup_iterations);
  if (j.contains("optimizer")) c.optimizer = parse_optimizer(j.at("optimizer"));
  get_if_present(j, "gradient_clip_norm", c.gradient_clip_norm);
  get_if_present(j, "seed", c.seed);
  get_if_present(j, "checkpoint_every", c.checkpoint_every);
}

nlohmann::json to_json(const GenerationRequest& r) {
  return {
      {"num_samples", r.num_samples},
      {"decode_mode", decode_mode_name(r.mode)},
      {"beam_size", r.beam_size},
      {"max_decode_length", r.max_decode_length},
      {"seed", r.seed},
      {"z_mode", z_mode_name(r.z_mode)},
  };
}

void from_json_into(const nlohmann::json& j, GenerationRequest& r) {
  require_known_keys(j,
                     {"num_samples", "decode_mode", "beam_size",
                      "max_decode_length", "seed", "z_mode"},
                     "generate config");
  get_if_present(j, "num_samples", r.num_samples);
  if (j.contains("decode_mode")) r.mode = parse_decode_mode(j.at("decode_mode"));
  get_if_present(j, "beam_size", r.beam_size);
  get_if_present(j, "max_decode_length", r.max_decode_length);
  get_if_present(j, "seed", r.seed);
  if (j.contains("z_mode")) r.z_mode = parse_z_mode(j.at("z_mode"));
}

}  // namespace pvae

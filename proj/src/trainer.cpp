#include "pvae/trainer.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "pvae/config_json.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace pvae {

Optimizer parse_optimizer(const std::string& name) {
  if (name == "sgd") return Optimizer::kSgd;
  if (name == "adam") return Optimizer::kAdam;
  throw ConfigError("unknown optimizer: " + name);
}

std::string optimizer_name(Optimizer o) {
  return o == Optimizer::kSgd ? "sgd" : "adam";
}

void TrainConfig::validate() const {
  if (learning_rate <= 0) throw ConfigError("learning_rate must be > 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (total_iterations < 0) throw ConfigError("total_iterations must be >= 0");
  if (warmup() > total_iterations && total_iterations > 0)
    throw ConfigError("kl_warmup_iterations must be <= total_iterations");
  if (gradient_clip_norm < 0) throw ConfigError("gradient_clip_norm must be >= 0");
}

double kl_anneal_weight(std::int64_t iteration, std::int64_t warmup_iterations) {
  if (iteration < 0) throw ConfigError("kl_anneal_weight: iteration must be >= 0");
  if (warmup_iterations <= 0) return 1.0;
  return std::min(1.0, static_cast<double>(iteration) /
                           static_cast<double>(warmup_iterations));
}

std::string log_record_json(const LogRecord& r) {
  nlohmann::json j{{"iteration", r.iteration},
                   {"nll", r.nll},
                   {"kl", r.kl},
                   {"kl_weight", r.kl_weight},
                   {"grad_norm", r.grad_norm}};
  return j.dump();
}

// ---------------------------------------------------------------------------
// Checkpoint I/O
// ---------------------------------------------------------------------------

std::uint32_t crc32(const std::uint8_t* data, std::size_t size) {
  static const auto table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k)
        c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  std::uint32_t crc = 0xFFFFFFFFu;
  for (std::size_t i = 0; i < size; ++i)
    crc = table[(crc ^ data[i]) & 0xFFu] ^ (crc >> 8);
  return crc ^ 0xFFFFFFFFu;
}

Checkpoint make_checkpoint(const ParaphraseVaeParams& params,
                           const ModelConfig& model_config,
                           const TrainConfig& train_config,
                           const Vocabulary& vocab, std::int64_t iteration,
                           const std::string& rng_state) {
  Checkpoint ckpt;
  ckpt.model_config = model_config;
  ckpt.train_config = train_config;
  ckpt.vocab = vocab;
  ckpt.iteration = iteration;
  ckpt.rng_state = rng_state;
  for (const auto& [name, tensor] : param_entries(params))
    ckpt.tensors.push_back({name, *tensor});
  return ckpt;
}

ParaphraseVaeParams params_from_checkpoint(const Checkpoint& ckpt) {
  ParaphraseVaeParams params = init_params(ckpt.model_config, 0);
  auto entries = param_entries(params);
  if (entries.size() != ckpt.tensors.size())
    throw CorruptionError("checkpoint manifest does not match the model");
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& [name, tensor] = ckpt.tensors[i];
    if (entries[i].first != name || !entries[i].second->same_shape(tensor))
      throw CorruptionError("checkpoint tensor mismatch at " + name);
    *entries[i].second = tensor;
  }
  return params;
}

namespace {

constexpr char kMagic[4] = {'P', 'V', 'A', 'E'};
constexpr std::uint32_t kFormatVersion = 1;

std::vector<std::uint8_t> payload_bytes(const Checkpoint& ckpt) {
  std::int64_t total = 0;
  for (const auto& [name, tensor] : ckpt.tensors) total += tensor.size();
  std::vector<std::uint8_t> bytes(total * 4);
  std::size_t off = 0;
  for (const auto& [name, tensor] : ckpt.tensors) {
    for (Index i = 0; i < tensor.size(); ++i) {
      float f = static_cast<float>(tensor[i]);
      std::memcpy(bytes.data() + off, &f, 4);
      off += 4;
    }
  }
  return bytes;
}

}  // namespace

std::int64_t predicted_checkpoint_bytes(const Checkpoint& ckpt) {
  std::int64_t payload = 0;
  for (const auto& [name, tensor] : ckpt.tensors) payload += tensor.size() * 4;
  return payload;  // header adds 12 bytes + JSON on top
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::vector<std::uint8_t> payload = payload_bytes(ckpt);

  nlohmann::json manifest = nlohmann::json::array();
  std::int64_t offset = 0;
  for (const auto& [name, tensor] : ckpt.tensors) {
    manifest.push_back({{"name", name},
                        {"shape", tensor.shape()},
                        {"byte_offset", offset}});
    offset += tensor.size() * 4;
  }
  nlohmann::json header{
      {"model_config", to_json(ckpt.model_config)},
      {"train_config", to_json(ckpt.train_config)},
      {"vocabulary", ckpt.vocab.id_to_token},
      {"manifest", manifest},
      {"crc32", crc32(payload.data(), payload.size())},
      {"iteration", ckpt.iteration},
      {"rng_state", ckpt.rng_state},
  };
  std::string header_str = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out.write(kMagic, 4);
  std::uint32_t version = kFormatVersion;
  std::uint32_t header_len = static_cast<std::uint32_t>(header_str.size());
  out.write(reinterpret_cast<const char*>(&version), 4);
  out.write(reinterpret_cast<const char*>(&header_len), 4);
  out.write(header_str.data(), header_str.size());
  out.write(reinterpret_cast<const char*>(payload.data()), payload.size());
  if (!out) throw IoError("write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);

  char magic[4];
  std::uint32_t version = 0, header_len = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&version), 4);
  in.read(reinterpret_cast<char*>(&header_len), 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw CorruptionError(path + ": not a PVAE checkpoint");
  if (version != kFormatVersion)
    throw VersionError(path + ": unsupported format version " +
                       std::to_string(version));

  std::string header_str(header_len, '\0');
  in.read(header_str.data(), header_len);
  if (!in) throw CorruptionError(path + ": truncated header");
  nlohmann::json header = nlohmann::json::parse(header_str, nullptr, false);
  if (header.is_discarded() || !header.is_object())
    throw CorruptionError(path + ": bad header JSON");

  Checkpoint ckpt;
  ckpt.format_version = version;
  try {
    from_json_into(header.at("model_config"), ckpt.model_config);
    from_json_into(header.at("train_config"), ckpt.train_config);
    ckpt.vocab.id_to_token =
        header.at("vocabulary").get<std::vector<std::string>>();
    ckpt.iteration = header.at("iteration").get<std::int64_t>();
    ckpt.rng_state = header.at("rng_state").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw CorruptionError(path + ": bad header: " + e.what());
  }
  for (TokenId i = 0; i < ckpt.vocab.size(); ++i)
    ckpt.vocab.token_to_id[ckpt.vocab.id_to_token[i]] = i;

  std::vector<std::uint8_t> payload{std::istreambuf_iterator<char>(in),
                                    std::istreambuf_iterator<char>()};

  std::int64_t expected = 0;
  for (const auto& entry : header.at("manifest")) {
    std::string name = entry.at("name").get<std::string>();
    std::vector<Index> shape = entry.at("shape").get<std::vector<Index>>();
    std::int64_t byte_offset = entry.at("byte_offset").get<std::int64_t>();
    if (byte_offset != expected)
      throw CorruptionError(path + ": non-contiguous manifest at " + name);
    Tensor t(shape);
    if (byte_offset + t.size() * 4 > static_cast<std::int64_t>(payload.size()))
      throw CorruptionError(path + ": truncated payload at " + name);
    for (Index i = 0; i < t.size(); ++i) {
      float f;
      std::memcpy(&f, payload.data() + byte_offset + i * 4, 4);
      t[i] = static_cast<double>(f);  // exact widening
    }
    expected += t.size() * 4;
    ckpt.tensors.push_back({std::move(name), std::move(t)});
  }
  if (expected != static_cast<std::int64_t>(payload.size()))
    throw CorruptionError(path + ": payload size mismatch");
  if (header.at("crc32").get<std::uint32_t>() !=
      crc32(payload.data(), payload.size()))
    throw CorruptionError(path + ": payload checksum failure");
  return ckpt;
}

// ---------------------------------------------------------------------------
// Optimization
// ---------------------------------------------------------------------------

double clip_gradients(std::vector<Tensor>& grads, double clip_norm) {
  double sq = 0;
  for (const Tensor& g : grads) sq += g.flat().squaredNorm();
  double norm = std::sqrt(sq);
  if (clip_norm > 0 && norm > clip_norm) {
    double scale = clip_norm / norm;
    for (Tensor& g : grads) g.flat() *= scale;
  }
  return norm;
}

namespace {

constexpr std::uint64_t kNoiseTag = 0x6e6f6973u;  // "nois"
constexpr std::uint64_t kMaskTag = 0x6d61736bu;   // "mask"

}  // namespace

Tensor training_noise(const TrainConfig& config, const ModelConfig& model,
                      std::int64_t iteration, std::int64_t batch_pos) {
  Rng rng(mix_seed(config.seed ^ kNoiseTag, iteration, batch_pos));
  Tensor noise({1, model.latent_dim});
  for (Index i = 0; i < noise.size(); ++i) noise[i] = rng.normal();
  return noise;
}

std::vector<std::uint8_t> training_dropout_mask(const TrainConfig& config,
                                                double rate,
                                                std::int64_t iteration,
                                                std::int64_t batch_pos,
                                                std::size_t steps) {
  Rng rng(mix_seed(config.seed ^ kMaskTag, iteration, batch_pos));
  std::vector<std::uint8_t> mask(steps);
  for (std::size_t i = 0; i < steps; ++i) mask[i] = rng.bernoulli(rate);
  return mask;
}

TrainResult train(ParaphraseVaeParams& params, const ModelConfig& model_config,
                  const TrainConfig& train_config,
                  const std::vector<SentencePair>& corpus,
                  const Vocabulary& vocab, const std::string& checkpoint_path,
                  const std::function<void(const LogRecord&)>& on_log) {
  model_config.validate();
  train_config.validate();
  if (corpus.empty()) throw EmptyInputError("train: empty corpus");

  const std::string rng_state =
      "derived:" + std::to_string(train_config.seed);
  auto entries = param_entries(params);
  const std::int64_t warmup = train_config.warmup();
  const bool adam = train_config.optimizer == Optimizer::kAdam;

  std::vector<Tensor> m_state, v_state;
  if (adam) {
    for (const auto& [name, tensor] : entries) {
      m_state.push_back(Tensor::zeros(tensor->shape()));
      v_state.push_back(Tensor::zeros(tensor->shape()));
    }
  }

  auto snapshot = [&](std::int64_t iteration) {
    return make_checkpoint(params, model_config, train_config, vocab,
                           iteration, rng_state);
  };

  TrainResult result;
  std::int64_t epoch = 0;
  auto batches = make_batches(corpus, train_config.batch_size,
                              mix_seed(train_config.seed, epoch));
  std::size_t batch_idx = 0;

  for (std::int64_t iter = 0; iter < train_config.total_iterations; ++iter) {
    if (batch_idx == batches.size()) {
      ++epoch;
      batches = make_batches(corpus, train_config.batch_size,
                             mix_seed(train_config.seed, epoch));
      batch_idx = 0;
    }
    const Batch& batch = batches[batch_idx++];
    double kl_weight = kl_anneal_weight(iter, warmup);

    std::vector<Tensor> grad_acc;
    grad_acc.reserve(entries.size());
    for (const auto& [name, tensor] : entries)
      grad_acc.push_back(Tensor::zeros(tensor->shape()));

    double nll_sum = 0, kl_sum = 0;
    try {
      for (std::int64_t j = 0; j < batch.size; ++j) {
        SentencePair pair = batch.pair(j);
        const auto& target = model_config.variant == Variant::kUnsupervised
                                 ? pair.original
                                 : pair.paraphrase;
        Tensor noise = training_noise(train_config, model_config, iter, j);
        auto mask = training_dropout_mask(train_config,
                                          model_config.word_dropout_rate, iter,
                                          j, decode_steps(target));
        Tape tape;
        BoundModel bound = bind_model(tape, params);
        ElboNodes nodes =
            elbo_loss(tape, bound, model_config, pair, kl_weight, noise, mask);
        nll_sum += tape.value(nodes.nll)[0];
        kl_sum += tape.value(nodes.kl)[0];
        GradientMap grads = tape.backward(nodes.total);
        for (std::size_t k = 0; k < entries.size(); ++k)
          grad_acc[k].flat() += grads[bound.leaves[k].second].flat();
      }
    } catch (const NonFiniteError& e) {
      if (!checkpoint_path.empty()) save_checkpoint(snapshot(iter), checkpoint_path);
      throw NonFiniteError("training diverged at iteration " +
                           std::to_string(iter) + ": " + e.what());
    }

    double inv = 1.0 / static_cast<double>(batch.size);
    for (Tensor& g : grad_acc) g.flat() *= inv;
    double grad_norm = clip_gradients(grad_acc, train_config.gradient_clip_norm);

    if (adam) {
      const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
      double t = static_cast<double>(iter + 1);
      double c1 = 1.0 - std::pow(b1, t);
      double c2 = 1.0 - std::pow(b2, t);
      for (std::size_t k = 0; k < entries.size(); ++k) {
        auto g = grad_acc[k].flat().array();
        auto m = m_state[k].flat().array();
        auto v = v_state[k].flat().array();
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g.square();
        entries[k].second->flat().array() -=
            train_config.learning_rate * (m / c1) / ((v / c2).sqrt() + eps);
      }
    } else {
      for (std::size_t k = 0; k < entries.size(); ++k)
        entries[k].second->flat() -=
            train_config.learning_rate * grad_acc[k].flat();
    }

    LogRecord rec{iter, nll_sum * inv, kl_sum * inv, kl_weight, grad_norm};
    result.log.push_back(rec);
    if (on_log) on_log(rec);

    if (!checkpoint_path.empty() && train_config.checkpoint_every > 0 &&
        (iter + 1) % train_config.checkpoint_every == 0 &&
        iter + 1 < train_config.total_iterations) {
      save_checkpoint(snapshot(iter + 1), checkpoint_path);
    }
  }

  result.checkpoint = snapshot(train_config.total_iterations);
  if (!checkpoint_path.empty())
    save_checkpoint(result.checkpoint, checkpoint_path);
  return result;
}

}  // namespace pvae

#include "pvae/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "pvae/rng.hpp"

namespace pvae {

namespace {

constexpr std::string_view kPunct = ".,?!;:'\"()-";

bool is_punct(char c) { return kPunct.find(c) != std::string_view::npos; }

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) {
      tokens.push_back(current);
      current.clear();
    }
  };
  for (char ch : text) {
    unsigned char u = static_cast<unsigned char>(ch);
    if (std::isspace(u)) {
      flush();
    } else if (is_punct(ch)) {
      flush();
      tokens.push_back(std::string(1, ch));
    } else {
      // ASCII lowercasing only; multi-byte UTF-8 passes through untouched
      current.push_back(u < 0x80 ? static_cast<char>(std::tolower(u)) : ch);
    }
  }
  flush();
  return tokens;
}

PairFormat parse_pair_format(const std::string& name) {
  if (name == "tsv") return PairFormat::kTsv;
  if (name == "jsonl") return PairFormat::kJsonl;
  throw FormatError("unknown pair format: " + name);
}

LoadResult load_pairs(const std::string& path, PairFormat format) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);

  LoadResult result;
  std::size_t considered = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++considered;

    std::string original, paraphrase;
    bool ok = false;
    if (format == PairFormat::kTsv) {
      auto first = line.find('\t');
      if (first != std::string::npos && line.find('\t', first + 1) == std::string::npos) {
        original = line.substr(0, first);
        paraphrase = line.substr(first + 1);
        ok = true;
      }
    } else {
      nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_object() && j.contains("original") && j.contains("paraphrase") &&
          j["original"].is_string() && j["paraphrase"].is_string()) {
        original = j["original"].get<std::string>();
        paraphrase = j["paraphrase"].get<std::string>();
        ok = true;
      }
    }

    if (ok) {
      RawPair pair{tokenize(original), tokenize(paraphrase)};
      ok = !pair.original.empty() && !pair.paraphrase.empty();
      if (ok) result.pairs.push_back(std::move(pair));
    }
    if (!ok) ++result.malformed;
  }

  if (considered > 0 && result.malformed * 2 > considered)
    throw FormatError(path + ": " + std::to_string(result.malformed) + " of " +
                      std::to_string(considered) + " lines malformed");
  return result;
}

Vocabulary build_vocab(const std::vector<RawPair>& pairs, std::int64_t min_count,
                       std::int64_t max_size) {
  if (min_count < 1) throw ConfigError("build_vocab: min_count must be >= 1");
  if (max_size < 4) throw ConfigError("build_vocab: max_size must be >= 4");

  // std::map keeps ties lexicographic after the stable sort by count
  std::map<std::string, std::int64_t> counts;
  for (const RawPair& p : pairs) {
    for (const std::string& t : p.original) ++counts[t];
    for (const std::string& t : p.paraphrase) ++counts[t];
  }

  std::vector<std::pair<std::string, std::int64_t>> kept;
  for (const auto& [token, count] : counts)
    if (count >= min_count) kept.push_back({token, count});
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (static_cast<std::int64_t>(kept.size()) > max_size - 4)
    kept.resize(max_size - 4);

  Vocabulary vocab;
  vocab.id_to_token = {"<pad>", "<bos>", "<eos>", "<unk>"};
  for (const auto& [token, count] : kept) vocab.id_to_token.push_back(token);
  for (TokenId i = 0; i < vocab.size(); ++i)
    vocab.token_to_id[vocab.id_to_token[i]] = i;
  return vocab;
}

std::vector<TokenId> encode(const Vocabulary& vocab,
                            const std::vector<std::string>& tokens,
                            std::int64_t max_length) {
  if (max_length < 1) throw ConfigError("encode: max_length must be >= 1");
  std::vector<TokenId> ids;
  std::int64_t n = std::min<std::int64_t>(tokens.size(), max_length);
  ids.reserve(n + 1);
  for (std::int64_t i = 0; i < n; ++i) ids.push_back(vocab.id(tokens[i]));
  ids.push_back(Vocabulary::kEos);
  return ids;
}

std::vector<std::string> decode(const Vocabulary& vocab,
                                const std::vector<TokenId>& ids) {
  std::vector<std::string> tokens;
  for (TokenId id : ids) {
    if (id == Vocabulary::kEos) break;
    tokens.push_back(vocab.token(id));
  }
  return tokens;
}

std::vector<SentencePair> encode_pairs(const Vocabulary& vocab,
                                       const std::vector<RawPair>& pairs,
                                       std::int64_t max_length) {
  std::vector<SentencePair> out;
  out.reserve(pairs.size());
  for (const RawPair& p : pairs)
    out.push_back({encode(vocab, p.original, max_length),
                   encode(vocab, p.paraphrase, max_length)});
  return out;
}

SentencePair Batch::pair(std::int64_t i) const {
  SentencePair p;
  p.original.assign(originals[i].begin(),
                    originals[i].begin() + original_lengths[i]);
  p.paraphrase.assign(paraphrases[i].begin(),
                      paraphrases[i].begin() + paraphrase_lengths[i]);
  return p;
}

std::vector<Batch> make_batches(const std::vector<SentencePair>& pairs,
                                std::int64_t batch_size,
                                std::uint64_t shuffle_seed) {
  if (pairs.empty()) throw EmptyInputError("make_batches: empty corpus");
  if (batch_size < 1) throw ConfigError("make_batches: batch_size must be >= 1");

  std::vector<std::size_t> order(pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(shuffle_seed);
  rng.shuffle(order);

  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    std::size_t end = std::min(order.size(), start + batch_size);
    Batch b;
    b.size = static_cast<std::int64_t>(end - start);
    std::size_t max_o = 0, max_p = 0;
    for (std::size_t k = start; k < end; ++k) {
      max_o = std::max(max_o, pairs[order[k]].original.size());
      max_p = std::max(max_p, pairs[order[k]].paraphrase.size());
    }
    for (std::size_t k = start; k < end; ++k) {
      const SentencePair& p = pairs[order[k]];
      std::vector<TokenId> o = p.original;
      std::vector<TokenId> q = p.paraphrase;
      b.original_lengths.push_back(static_cast<std::int64_t>(o.size()));
      b.paraphrase_lengths.push_back(static_cast<std::int64_t>(q.size()));
      o.resize(max_o, Vocabulary::kPad);
      q.resize(max_p, Vocabulary::kPad);
      b.originals.push_back(std::move(o));
      b.paraphrases.push_back(std::move(q));
    }
    batches.push_back(std::move(b));
  }
  return batches;
}

void save_vocab(const Vocabulary& vocab, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  for (const std::string& token : vocab.id_to_token) out << token << '\n';
}

Vocabulary load_vocab(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  Vocabulary vocab;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    vocab.token_to_id[line] = vocab.size();
    vocab.id_to_token.push_back(line);
  }
  if (vocab.size() < 4) throw FormatError(path + ": vocabulary too small");
  return vocab;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

}  // namespace pvae

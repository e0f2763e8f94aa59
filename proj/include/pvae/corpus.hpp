#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "pvae/errors.hpp"
#include "pvae/tensor.hpp"

namespace pvae {

using TokenId = std::int64_t;

// Dense token <-> id bijection with four reserved ids up front.
struct Vocabulary {
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kBos = 1;
  static constexpr TokenId kEos = 2;
  static constexpr TokenId kUnk = 3;

  std::vector<std::string> id_to_token;
  std::unordered_map<std::string, TokenId> token_to_id;

  TokenId size() const { return static_cast<TokenId>(id_to_token.size()); }

  TokenId id(const std::string& token) const {
    auto it = token_to_id.find(token);
    return it == token_to_id.end() ? kUnk : it->second;
  }

  const std::string& token(TokenId id) const { return id_to_token.at(id); }
};

// Lowercased whitespace split with .,?!;:'"()- detached as single tokens.
std::vector<std::string> tokenize(std::string_view text);

// A tokenized (original, paraphrase) pair before id encoding.
struct RawPair {
  std::vector<std::string> original;
  std::vector<std::string> paraphrase;
};

enum class PairFormat { kTsv, kJsonl };

PairFormat parse_pair_format(const std::string& name);

struct LoadResult {
  std::vector<RawPair> pairs;
  std::size_t malformed = 0;  // skipped lines
};

// One pair per line. Lines that do not parse (or have an empty side) are
// counted and skipped; more than 50% bad lines aborts with FormatError.
LoadResult load_pairs(const std::string& path, PairFormat format);

// Tokens with count >= min_count, most frequent first (ties lexicographic),
// capped at max_size - 4, specials prepended.
Vocabulary build_vocab(const std::vector<RawPair>& pairs, std::int64_t min_count,
                       std::int64_t max_size);

// Unknown tokens become UNK; keeps the first max_length tokens, then appends
// EOS. BOS is never stored (the decoder supplies it).
std::vector<TokenId> encode(const Vocabulary& vocab,
                            const std::vector<std::string>& tokens,
                            std::int64_t max_length);

// Inverse of encode up to EOS (EOS and anything after it is dropped).
std::vector<std::string> decode(const Vocabulary& vocab,
                                const std::vector<TokenId>& ids);

// EOS-terminated id sequences; never contains PAD.
struct SentencePair {
  std::vector<TokenId> original;
  std::vector<TokenId> paraphrase;
};

std::vector<SentencePair> encode_pairs(const Vocabulary& vocab,
                                       const std::vector<RawPair>& pairs,
                                       std::int64_t max_length);

struct Batch {
  std::vector<std::vector<TokenId>> originals;    // padded to max length
  std::vector<std::vector<TokenId>> paraphrases;  // padded to max length
  std::vector<std::int64_t> original_lengths;
  std::vector<std::int64_t> paraphrase_lengths;
  std::int64_t size = 0;

  SentencePair pair(std::int64_t i) const;  // strips padding
};

// Deterministic shuffle by seed, then sequential slices; the last short
// batch is kept.
std::vector<Batch> make_batches(const std::vector<SentencePair>& pairs,
                                std::int64_t batch_size,
                                std::uint64_t shuffle_seed);

// One token per line; line number = id.
void save_vocab(const Vocabulary& vocab, const std::string& path);
Vocabulary load_vocab(const std::string& path);

std::string join_tokens(const std::vector<std::string>& tokens);

}  // namespace pvae

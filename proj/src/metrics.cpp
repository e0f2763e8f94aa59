#include "pvae/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

namespace pvae {

MetricId parse_metric_id(const std::string& name) {
  if (name == "bleu") return MetricId::kBleu;
  if (name == "meteor") return MetricId::kMeteor;
  if (name == "ter") return MetricId::kTer;
  throw ConfigError("unknown metric: " + name);
}

std::string metric_id_name(MetricId m) {
  switch (m) {
    case MetricId::kBleu: return "bleu";
    case MetricId::kMeteor: return "meteor";
    case MetricId::kTer: return "ter";
  }
  return "?";
}

double MetricScores::get(MetricId m) const {
  switch (m) {
    case MetricId::kBleu: return bleu;
    case MetricId::kMeteor: return meteor;
    case MetricId::kTer: return ter;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// BLEU
// ---------------------------------------------------------------------------

namespace {

constexpr int kMaxOrder = 4;

using NgramCounts = std::unordered_map<std::string, std::int64_t>;

NgramCounts ngram_counts(const Tokens& tokens, int n) {
  NgramCounts counts;
  if (static_cast<int>(tokens.size()) < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string key;
    for (int k = 0; k < n; ++k) {
      if (k) key.push_back('\x1f');
      key += tokens[i + k];
    }
    ++counts[key];
  }
  return counts;
}

struct BleuCounts {
  std::int64_t matched[kMaxOrder] = {0, 0, 0, 0};
  std::int64_t total[kMaxOrder] = {0, 0, 0, 0};
};

BleuCounts clipped_counts(const Tokens& candidate,
                          const std::vector<Tokens>& references) {
  BleuCounts c;
  for (int n = 1; n <= kMaxOrder; ++n) {
    NgramCounts cand = ngram_counts(candidate, n);
    std::vector<NgramCounts> refs;
    refs.reserve(references.size());
    for (const Tokens& r : references) refs.push_back(ngram_counts(r, n));
    std::int64_t total = std::max<std::int64_t>(
        0, static_cast<std::int64_t>(candidate.size()) - n + 1);
    std::int64_t matched = 0;
    for (const auto& [key, count] : cand) {
      std::int64_t clip = 0;
      for (const NgramCounts& r : refs) {
        auto it = r.find(key);
        if (it != r.end()) clip = std::max(clip, it->second);
      }
      matched += std::min(count, clip);
    }
    c.matched[n - 1] = matched;
    c.total[n - 1] = total;
  }
  return c;
}

// reference length closest to the candidate length, ties to the shorter
std::int64_t effective_ref_length(std::size_t cand_len,
                                  const std::vector<Tokens>& references) {
  std::int64_t best = static_cast<std::int64_t>(references[0].size());
  auto c = static_cast<std::int64_t>(cand_len);
  for (const Tokens& r : references) {
    auto len = static_cast<std::int64_t>(r.size());
    std::int64_t d = std::abs(len - c), db = std::abs(best - c);
    if (d < db || (d == db && len < best)) best = len;
  }
  return best;
}

double brevity_penalty(std::int64_t cand_len, std::int64_t ref_len) {
  if (cand_len > ref_len) return 1.0;
  return std::exp(1.0 - static_cast<double>(ref_len) /
                            static_cast<double>(cand_len));
}

}  // namespace

double bleu(const Tokens& candidate, const std::vector<Tokens>& references) {
  if (candidate.empty()) throw EmptyInputError("bleu: empty candidate");
  if (references.empty()) throw EmptyInputError("bleu: no references");

  BleuCounts c = clipped_counts(candidate, references);
  if (c.matched[0] == 0) return 0.0;

  bool all_positive = true;
  for (int n = 0; n < kMaxOrder; ++n)
    all_positive = all_positive && c.matched[n] > 0;

  double log_sum = 0;
  for (int n = 0; n < kMaxOrder; ++n) {
    double p;
    if (all_positive) {
      p = static_cast<double>(c.matched[n]) / static_cast<double>(c.total[n]);
    } else if (n == 0) {
      p = static_cast<double>(c.matched[0]) / static_cast<double>(c.total[0]);
    } else {
      // add-one smoothing for the higher orders only
      p = static_cast<double>(c.matched[n] + 1) /
          static_cast<double>(c.total[n] + 1);
    }
    log_sum += std::log(p) / kMaxOrder;
  }
  std::int64_t r = effective_ref_length(candidate.size(), references);
  return brevity_penalty(static_cast<std::int64_t>(candidate.size()), r) *
         std::exp(log_sum);
}

double corpus_bleu(const std::vector<Tokens>& candidates,
                   const std::vector<std::vector<Tokens>>& references) {
  if (candidates.empty()) throw EmptyInputError("corpus_bleu: no candidates");
  if (candidates.size() != references.size())
    throw ShapeError("corpus_bleu: candidate/reference count mismatch");

  BleuCounts pooled;
  std::int64_t cand_len = 0, ref_len = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i].empty()) continue;
    BleuCounts c = clipped_counts(candidates[i], references[i]);
    for (int n = 0; n < kMaxOrder; ++n) {
      pooled.matched[n] += c.matched[n];
      pooled.total[n] += c.total[n];
    }
    cand_len += static_cast<std::int64_t>(candidates[i].size());
    ref_len += effective_ref_length(candidates[i].size(), references[i]);
  }
  double log_sum = 0;
  for (int n = 0; n < kMaxOrder; ++n) {
    if (pooled.matched[n] == 0 || pooled.total[n] == 0) return 0.0;
    log_sum += std::log(static_cast<double>(pooled.matched[n]) /
                        static_cast<double>(pooled.total[n])) /
               kMaxOrder;
  }
  if (cand_len == 0) return 0.0;
  return brevity_penalty(cand_len, ref_len) * std::exp(log_sum);
}

// ---------------------------------------------------------------------------
// METEOR-lite
// ---------------------------------------------------------------------------

namespace {

bool ends_with(const std::string& s, const char* suffix) {
  std::size_t n = std::char_traits<char>::length(suffix);
  return s.size() >= n && s.compare(s.size() - n, n, suffix) == 0;
}

bool is_vowel(char c) {
  return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u';
}

// Porter-style guard: undouble trailing double consonants except l, s, z.
void undouble(std::string& s) {
  if (s.size() < 2) return;
  char c = s.back();
  if (c != s[s.size() - 2] || is_vowel(c)) return;
  if (c == 'l' || c == 's' || c == 'z') return;
  s.pop_back();
}

}  // namespace

std::string stem(const std::string& word) {
  std::string s = word;
  // plurals
  if (ends_with(s, "sses")) {
    s.erase(s.size() - 2);
  } else if (ends_with(s, "ies") && s.size() > 4) {
    s.erase(s.size() - 3);
    s.push_back('y');
  } else if (!ends_with(s, "ss") && ends_with(s, "s") && s.size() > 3) {
    s.pop_back();
  }
  // one suffix rule
  if (ends_with(s, "ing") && s.size() > 5) {
    s.erase(s.size() - 3);
    undouble(s);
  } else if (ends_with(s, "est") && s.size() > 5) {
    s.erase(s.size() - 3);
    undouble(s);
  } else if (ends_with(s, "ed") && s.size() > 4) {
    s.erase(s.size() - 2);
    undouble(s);
  } else if (ends_with(s, "ly") && s.size() > 4) {
    s.erase(s.size() - 2);
  } else if (ends_with(s, "er") && s.size() > 4) {
    s.erase(s.size() - 2);
    undouble(s);
  }
  return s;
}

double meteor_lite(const Tokens& candidate, const Tokens& reference) {
  if (candidate.empty() || reference.empty())
    throw EmptyInputError("meteor_lite: empty input");

  std::vector<std::int64_t> align(candidate.size(), -1);
  std::vector<bool> ref_used(reference.size(), false);

  // stage 1: exact matches, leftmost reference position first
  for (std::size_t i = 0; i < candidate.size(); ++i) {
    for (std::size_t j = 0; j < reference.size(); ++j) {
      if (!ref_used[j] && reference[j] == candidate[i]) {
        align[i] = static_cast<std::int64_t>(j);
        ref_used[j] = true;
        break;
      }
    }
  }
  // stage 2: stemmed matches over what is left
  for (std::size_t i = 0; i < candidate.size(); ++i) {
    if (align[i] >= 0) continue;
    std::string cs = stem(candidate[i]);
    for (std::size_t j = 0; j < reference.size(); ++j) {
      if (!ref_used[j] && stem(reference[j]) == cs) {
        align[i] = static_cast<std::int64_t>(j);
        ref_used[j] = true;
        break;
      }
    }
  }

  std::int64_t m = 0;
  for (std::int64_t a : align)
    if (a >= 0) ++m;
  if (m == 0) return 0.0;

  double p = static_cast<double>(m) / static_cast<double>(candidate.size());
  double r = static_cast<double>(m) / static_cast<double>(reference.size());
  constexpr double kAlpha = 0.9;
  double f = p * r / (kAlpha * p + (1.0 - kAlpha) * r);

  // chunks: maximal runs adjacent in both the candidate and the reference
  std::int64_t chunks = 0;
  std::int64_t prev_i = -2, prev_j = -2;
  for (std::size_t i = 0; i < candidate.size(); ++i) {
    if (align[i] < 0) continue;
    if (static_cast<std::int64_t>(i) != prev_i + 1 || align[i] != prev_j + 1)
      ++chunks;
    prev_i = static_cast<std::int64_t>(i);
    prev_j = align[i];
  }

  constexpr double kGamma = 0.5;
  constexpr double kBeta = 3.0;
  double penalty =
      kGamma * std::pow(static_cast<double>(chunks) / static_cast<double>(m),
                        kBeta);
  return f * (1.0 - penalty);
}

// ---------------------------------------------------------------------------
// TER
// ---------------------------------------------------------------------------

std::int64_t levenshtein(const Tokens& a, const Tokens& b) {
  std::vector<std::int64_t> prev(b.size() + 1), curr(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = static_cast<std::int64_t>(j);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    curr[0] = static_cast<std::int64_t>(i);
    for (std::size_t j = 1; j <= b.size(); ++j) {
      std::int64_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      curr[j] = std::min({prev[j] + 1, curr[j - 1] + 1, sub});
    }
    std::swap(prev, curr);
  }
  return prev[b.size()];
}

namespace {

Tokens apply_shift(const Tokens& seq, std::size_t start, std::size_t len,
                   std::size_t dest) {
  Tokens rest;
  rest.reserve(seq.size() - len);
  rest.insert(rest.end(), seq.begin(), seq.begin() + start);
  rest.insert(rest.end(), seq.begin() + start + len, seq.end());
  Tokens out;
  out.reserve(seq.size());
  out.insert(out.end(), rest.begin(), rest.begin() + dest);
  out.insert(out.end(), seq.begin() + start, seq.begin() + start + len);
  out.insert(out.end(), rest.begin() + dest, rest.end());
  return out;
}

}  // namespace

double ter(const Tokens& candidate, const Tokens& reference) {
  if (reference.empty()) throw EmptyInputError("ter: empty reference");

  Tokens work = candidate;
  std::int64_t shifts = 0;
  while (true) {
    std::int64_t base = levenshtein(work, reference);
    if (base == 0) break;

    std::int64_t best_reduction = 0;
    Tokens best;
    std::size_t n = work.size();
    for (std::size_t start = 0; start < n; ++start) {
      for (std::size_t len = 1; start + len <= n; ++len) {
        for (std::size_t dest = 0; dest <= n - len; ++dest) {
          if (dest == start) continue;
          Tokens shifted = apply_shift(work, start, len, dest);
          std::int64_t reduction = base - levenshtein(shifted, reference);
          if (reduction > best_reduction) {
            best_reduction = reduction;
            best = std::move(shifted);
          }
        }
      }
    }
    if (best_reduction <= 0) break;
    work = std::move(best);
    ++shifts;
  }
  double edits =
      static_cast<double>(shifts + levenshtein(work, reference));
  return edits / static_cast<double>(reference.size());
}

double ter(const Tokens& candidate, const std::vector<Tokens>& references) {
  if (references.empty()) throw EmptyInputError("ter: no references");
  double best = ter(candidate, references[0]);
  for (std::size_t i = 1; i < references.size(); ++i)
    best = std::min(best, ter(candidate, references[i]));
  return best;
}

// ---------------------------------------------------------------------------
// avg / best aggregation and recall curves
// ---------------------------------------------------------------------------

MetricScores score_all(const Tokens& candidate,
                       const std::vector<Tokens>& references) {
  if (references.empty()) throw EmptyInputError("score_all: no references");
  MetricScores s;
  if (candidate.empty()) {
    // empty generations score zero overlap and pure-insertion TER
    s.bleu = 0;
    s.meteor = 0;
    s.ter = ter(candidate, references);
    return s;
  }
  s.bleu = bleu(candidate, references);
  s.meteor = 0;
  for (const Tokens& r : references)
    s.meteor = std::max(s.meteor, meteor_lite(candidate, r));
  s.ter = ter(candidate, references);
  return s;
}

namespace {

double confidence(const Tokens& variant, const Tokens& input, MetricId metric) {
  if (variant.empty())
    return metric == MetricId::kTer ? ter(variant, input) : 0.0;
  switch (metric) {
    case MetricId::kBleu: return bleu(variant, {input});
    case MetricId::kMeteor: return meteor_lite(variant, input);
    case MetricId::kTer: return ter(variant, input);
  }
  return 0;
}

}  // namespace

MetricReport aggregate(const std::vector<Tokens>& variants, const Tokens& input,
                       const std::vector<Tokens>& ground_truth) {
  if (variants.empty()) throw EmptyInputError("aggregate: no variants");
  if (input.empty()) throw EmptyInputError("aggregate: empty input sentence");

  MetricReport report;
  report.per_variant.reserve(variants.size());
  for (const Tokens& v : variants)
    report.per_variant.push_back(score_all(v, ground_truth));

  for (const MetricScores& s : report.per_variant) {
    report.avg.bleu += s.bleu;
    report.avg.meteor += s.meteor;
    report.avg.ter += s.ter;
  }
  double inv = 1.0 / static_cast<double>(variants.size());
  report.avg.bleu *= inv;
  report.avg.meteor *= inv;
  report.avg.ter *= inv;

  // selection sees only the input sentence, never the ground truth
  std::size_t best_b = 0, best_m = 0;
  double conf_b = -1, conf_m = -1;
  for (std::size_t i = 0; i < variants.size(); ++i) {
    double cb = confidence(variants[i], input, MetricId::kBleu);
    double cm = confidence(variants[i], input, MetricId::kMeteor);
    if (cb > conf_b) {
      conf_b = cb;
      best_b = i;
    }
    if (cm > conf_m) {
      conf_m = cm;
      best_m = i;
    }
  }
  report.chosen_bleu_index = best_b;
  report.chosen_meteor_index = best_m;
  report.best_bleu = report.per_variant[best_b];
  report.best_meteor = report.per_variant[best_m];
  return report;
}

std::vector<CurvePoint> recall_curve(const std::vector<CurveRecord>& records,
                                     MetricId confidence_metric,
                                     const std::vector<double>& thresholds) {
  if (records.empty()) throw EmptyInputError("recall_curve: empty records");
  for (std::size_t i = 1; i < thresholds.size(); ++i)
    if (thresholds[i] <= thresholds[i - 1])
      throw ConfigError("recall_curve: thresholds must be strictly ascending");

  std::vector<double> conf(records.size());
  std::vector<MetricScores> scores(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    conf[i] = confidence(records[i].variant, records[i].input, confidence_metric);
    scores[i] = score_all(records[i].variant, records[i].ground_truth);
  }

  std::vector<CurvePoint> curve;
  curve.reserve(thresholds.size());
  for (double tau : thresholds) {
    CurvePoint pt;
    pt.threshold = tau;
    std::size_t kept = 0;
    MetricScores sums;
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (conf[i] > tau) {
        ++kept;
        sums.bleu += scores[i].bleu;
        sums.meteor += scores[i].meteor;
        sums.ter += scores[i].ter;
      }
    }
    pt.recall = static_cast<double>(kept) / static_cast<double>(records.size());
    if (kept > 0) {
      pt.bleu = sums.bleu / kept;
      pt.meteor = sums.meteor / kept;
      pt.ter = sums.ter / kept;
    }
    curve.push_back(pt);
  }
  return curve;
}

std::vector<double> auto_thresholds(const std::vector<double>& confidences,
                                    std::size_t count) {
  if (confidences.empty())
    throw EmptyInputError("auto_thresholds: no confidences");
  std::vector<double> sorted = confidences;
  std::sort(sorted.begin(), sorted.end());

  std::vector<double> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    double level = count == 1 ? 0.0
                              : static_cast<double>(i) /
                                    static_cast<double>(count - 1);
    auto idx = static_cast<std::size_t>(
        std::llround(level * static_cast<double>(sorted.size() - 1)));
    double v = sorted[idx];
    // duplicate quantiles are nudged up to keep the list strictly ascending
    if (!out.empty() && v <= out.back())
      v = std::nextafter(out.back(), std::numeric_limits<double>::infinity());
    out.push_back(v);
  }
  return out;
}

}  // namespace pvae

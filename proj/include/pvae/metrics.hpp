#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pvae/errors.hpp"

namespace pvae {

using Tokens = std::vector<std::string>;

enum class MetricId { kBleu, kMeteor, kTer };

MetricId parse_metric_id(const std::string& name);
std::string metric_id_name(MetricId m);

// Sentence-level BLEU-4 with reference-clipped counts. When every raw
// modified precision is positive the plain product is used; otherwise
// add-one smoothing applies to the n >= 2 precisions. Zero unigram overlap
// scores 0. Brevity penalty uses the reference length closest to the
// candidate (ties to the shorter).
double bleu(const Tokens& candidate, const std::vector<Tokens>& references);

// Corpus-level BLEU-4 (unsmoothed, pooled counts, effective reference
// length); provided for corpus reports.
double corpus_bleu(const std::vector<Tokens>& candidates,
                   const std::vector<std::vector<Tokens>>& references);

// Fixed suffix-stripping stemmer used by the METEOR stage-2 matcher:
// plural -sses/-ies/-s, then one of -ing/-ed/-ly/-er/-est with length
// guards and final double-consonant undoubling.
std::string stem(const std::string& word);

// Unigram F(alpha = 0.9) from a two-stage greedy alignment (exact match,
// then stemmed match; leftmost reference token first), discounted by the
// chunk penalty 0.5 * (chunks / matches)^3. No synonym lookup.
double meteor_lite(const Tokens& candidate, const Tokens& reference);

// Translation edit rate: greedy block shifts (pick the shift that most
// reduces word Levenshtein distance; ties to smallest start index, then
// smallest block length, then smallest destination) plus the residual
// Levenshtein distance, divided by reference length. Multiple references
// take the minimum score.
double ter(const Tokens& candidate, const Tokens& reference);
double ter(const Tokens& candidate, const std::vector<Tokens>& references);

std::int64_t levenshtein(const Tokens& a, const Tokens& b);

struct MetricScores {
  double bleu = 0;
  double meteor = 0;
  double ter = 0;
  double get(MetricId m) const;
};

// The avg / best-BLEU / best-METEOR measurement protocol: the "best" variant
// is selected by the metric against the *input sentence* (never the ground
// truth), and the reported numbers are against the ground truth.
struct MetricReport {
  std::vector<MetricScores> per_variant;  // against the ground truth
  MetricScores avg;
  MetricScores best_bleu;
  MetricScores best_meteor;
  std::size_t chosen_bleu_index = 0;
  std::size_t chosen_meteor_index = 0;
};

MetricReport aggregate(const std::vector<Tokens>& variants, const Tokens& input,
                       const std::vector<Tokens>& ground_truth);

MetricScores score_all(const Tokens& candidate,
                       const std::vector<Tokens>& references);

struct CurveRecord {
  Tokens input;
  Tokens variant;
  std::vector<Tokens> ground_truth;
};

struct CurvePoint {
  double threshold = 0;
  double recall = 0;
  std::optional<double> bleu;  // absent when nothing passes the threshold
  std::optional<double> meteor;
  std::optional<double> ter;
};

// Per threshold t: keep records whose confidence (the metric between input
// and variant) exceeds t; recall is kept/total and the averages are over
// kept records against the ground truth.
std::vector<CurvePoint> recall_curve(const std::vector<CurveRecord>& records,
                                     MetricId confidence,
                                     const std::vector<double>& thresholds);

// 20 evenly spaced quantiles of the observed confidences, nudged upward
// where needed so the list is strictly ascending.
std::vector<double> auto_thresholds(const std::vector<double>& confidences,
                                    std::size_t count = 20);

}  // namespace pvae

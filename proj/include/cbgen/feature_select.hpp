#ifndef CBGEN_FEATURE_SELECT_HPP
#define CBGEN_FEATURE_SELECT_HPP

#include <string>
#include <vector>

#include "cbgen/association_matrix.hpp"
#include "cbgen/corpus.hpp"

namespace cbgen {

// One evoking n-gram of a feature, with its occurrence counts inside
// (pos_count) and outside (neg_count) the pivot class.
struct SupportRow {
  std::string ngram;
  double weight = 0.0;
  long pos_count = 0;
  long neg_count = 0;
};

// All corpus-observed evokers of one feature, pivoted on one class.
// Rows sorted by descending weight (ties by ngram); ngrams unique.
struct SupportTable {
  FeatureId feature;
  std::string pivot_class;
  std::vector<SupportRow> rows;
};

// A selected vector dimension: feature f gated at threshold t. N-grams whose
// association to f is <= t cannot evoke it.
struct ThresholdedFeature {
  FeatureId feature;
  double threshold = 0.0;
  std::string source_class;
  double score = 0.0;
  std::vector<std::string> positive_support;  // sorted, distinct n-grams
};

enum class CountMode { Token, Document };

struct SelectionConfig {
  double alpha = 5.0;       // smoothing pseudo-count
  double min_score = 0.01;  // retention gate on the score
  int min_support_size = 2; // retention gate on distinct positive evokers
  CountMode count_mode = CountMode::Token;
};

// (support size, positive support weight, negative support weight) at a
// threshold; membership is strict weight > t.
struct SupportStats {
  long support_size = 0;  // rows with weight > t and pos_count > 0
  double pos_weight = 0.0;
  double neg_weight = 0.0;
};

SupportStats support_stats(const SupportTable& table, double t);

// Highest candidate threshold (a support weight in the table) whose strictly
// lower-weight rows carry more negative than positive count; falls back to
// the table's minimum weight (drop nothing). Throws on an empty table.
double choose_threshold(const SupportTable& table);

// pos / (pos + neg). Throws ArgumentError when both are zero.
double precision(double pos_weight, double neg_weight);

// Precision shrunk toward the class prior by pseudo-count alpha.
double smoothed_precision(double pos_weight, double neg_weight,
                          double class_prior, double alpha);

// Error-rate reduction of the smoothed precision over the base rate.
double score(double smoothed, double class_prior);

// Builds the support table of (feature, class): one row per n-gram that
// both evokes the feature and occurs in the corpus.
SupportTable build_support_table(const FeatureId& feature,
                                 const std::string& pivot_class,
                                 const LabeledCorpus& corpus,
                                 const AssociationMatrix& matrix,
                                 const SelectionConfig& cfg,
                                 const ExtractionConfig& extraction = {});

// Full per-class selection: threshold each candidate feature, score it,
// gate on support size and score, drop redundant features, merge classes.
// Output ordered by (score desc, feature, threshold); deterministic and
// independent of document order.
std::vector<ThresholdedFeature> select_features(
    const LabeledCorpus& corpus, const AssociationMatrix& matrix,
    const SelectionConfig& cfg, const ExtractionConfig& extraction = {});

}  // namespace cbgen

#endif  // CBGEN_FEATURE_SELECT_HPP

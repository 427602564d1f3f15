#include "cbgen/feature_select.hpp"

#include <algorithm>
#include <map>
#include <unordered_map>

#include "cbgen/errors.hpp"

namespace cbgen {

SupportStats support_stats(const SupportTable& table, double t) {
  SupportStats s;
  for (const auto& row : table.rows) {
    if (row.weight > t) {
      if (row.pos_count > 0) ++s.support_size;
      s.pos_weight += static_cast<double>(row.pos_count);
      s.neg_weight += static_cast<double>(row.neg_count);
    }
  }
  return s;
}

double choose_threshold(const SupportTable& table) {
  if (table.rows.empty())
    throw ArgumentError("choose_threshold: empty support table");
  // Rows are sorted by descending weight; walk them back-to-front so the
  // running sums hold the counts of rows strictly below each candidate.
  double best = table.rows.back().weight;  // fallback: drop nothing
  long below_pos = 0, below_neg = 0;
  std::size_t i = table.rows.size();
  while (i > 0) {
    std::size_t group_end = i;  // one past the last row of this weight group
    double t = table.rows[i - 1].weight;
    while (i > 0 && table.rows[i - 1].weight == t) --i;
    if (below_neg > below_pos) best = t;
    for (std::size_t r = i; r < group_end; ++r) {
      below_pos += table.rows[r].pos_count;
      below_neg += table.rows[r].neg_count;
    }
  }
  return best;
}

double precision(double pos_weight, double neg_weight) {
  if (pos_weight + neg_weight <= 0.0)
    throw ArgumentError("precision undefined: no support at this threshold");
  return pos_weight / (pos_weight + neg_weight);
}

double smoothed_precision(double pos_weight, double neg_weight,
                          double class_prior, double alpha) {
  return (pos_weight + class_prior * alpha) /
         (pos_weight + neg_weight + alpha);
}

double score(double smoothed, double class_prior) {
  return (smoothed - class_prior) / (1.0 - class_prior);
}

namespace {

// Matrix-present n-gram counts per class, computed once per corpus.
struct CorpusCounts {
  // ngram -> per-class count (token occurrences or document frequency)
  std::unordered_map<std::string, std::vector<long>> ngram_counts;
  std::vector<long> docs_per_class;
  long total_docs = 0;

  long total_count(const std::vector<long>& per_class) const {
    long t = 0;
    for (long c : per_class) t += c;
    return t;
  }
};

CorpusCounts count_corpus_ngrams(const LabeledCorpus& corpus,
                                 const AssociationMatrix& matrix,
                                 const SelectionConfig& cfg,
                                 const ExtractionConfig& extraction) {
  CorpusCounts out;
  const std::size_t k = corpus.label_set.size();
  out.docs_per_class.assign(k, 0);
  out.total_docs = static_cast<long>(corpus.size());
  for (const auto& doc : corpus.docs) {
    int li = corpus.label_index(doc.label);
    ++out.docs_per_class[li];
    NgramBag bag = extract_ngrams(doc.text, extraction.max_ngram_order, matrix);
    for (const auto& [ngram, count] : bag.counts) {
      auto& per_class = out.ngram_counts[ngram];
      if (per_class.empty()) per_class.assign(k, 0);
      per_class[li] += cfg.count_mode == CountMode::Token ? count : 1;
    }
  }
  return out;
}

void sort_rows(std::vector<SupportRow>& rows) {
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    if (a.weight != b.weight) return a.weight > b.weight;
    return a.ngram < b.ngram;
  });
}

}  // namespace

SupportTable build_support_table(const FeatureId& feature,
                                 const std::string& pivot_class,
                                 const LabeledCorpus& corpus,
                                 const AssociationMatrix& matrix,
                                 const SelectionConfig& cfg,
                                 const ExtractionConfig& extraction) {
  int li = corpus.label_index(pivot_class);
  if (li < 0)
    throw ArgumentError("unknown class '" + pivot_class + "'");
  CorpusCounts counts = count_corpus_ngrams(corpus, matrix, cfg, extraction);
  SupportTable table;
  table.feature = feature;
  table.pivot_class = pivot_class;
  for (const auto& [ngram, per_class] : counts.ngram_counts) {
    for (const auto& [f, w] : matrix.evocations(ngram)) {
      if (f == feature) {
        long pos = per_class[li];
        long total = counts.total_count(per_class);
        table.rows.push_back({ngram, w, pos, total - pos});
        break;
      }
    }
  }
  sort_rows(table.rows);
  return table;
}

std::vector<ThresholdedFeature> select_features(
    const LabeledCorpus& corpus, const AssociationMatrix& matrix,
    const SelectionConfig& cfg, const ExtractionConfig& extraction) {
  const std::size_t k = corpus.label_set.size();
  if (k < 2)
    throw ArgumentError("feature selection needs at least 2 classes, got " +
                        std::to_string(k));
  if (!(cfg.alpha > 0.0)) throw ArgumentError("alpha must be > 0");
  if (cfg.min_score < 0.0) throw ArgumentError("min_score must be >= 0");
  if (cfg.min_support_size < 1)
    throw ArgumentError("min_support_size must be >= 1");

  CorpusCounts counts = count_corpus_ngrams(corpus, matrix, cfg, extraction);

  // Invert: feature -> corpus-observed evoking rows. std::map keys give a
  // deterministic feature order independent of corpus layout.
  std::map<FeatureId, std::vector<SupportRow>> evokers;
  for (const auto& [ngram, per_class] : counts.ngram_counts) {
    long total = counts.total_count(per_class);
    for (const auto& [f, w] : matrix.evocations(ngram)) {
      evokers[f].push_back({ngram, w, 0, total});
    }
  }
  for (auto& [f, rows] : evokers) sort_rows(rows);

  std::vector<ThresholdedFeature> merged;

  for (std::size_t li = 0; li < k; ++li) {
    double prior = static_cast<double>(counts.docs_per_class[li]) /
                   static_cast<double>(counts.total_docs);

    std::vector<ThresholdedFeature> retained;
    for (const auto& [feature, rows] : evokers) {
      // Candidate features: evoked by at least one n-gram seen in T_l.
      SupportTable table;
      table.feature = feature;
      table.pivot_class = corpus.label_set[li];
      bool any_positive = false;
      table.rows.reserve(rows.size());
      for (const auto& r : rows) {
        long pos = counts.ngram_counts.at(r.ngram)[li];
        if (pos > 0) any_positive = true;
        table.rows.push_back({r.ngram, r.weight, pos, r.neg_count - pos});
      }
      if (!any_positive) continue;

      double t = choose_threshold(table);
      SupportStats stats = support_stats(table, t);
      if (stats.support_size < cfg.min_support_size) continue;
      double mu = smoothed_precision(stats.pos_weight, stats.neg_weight,
                                     prior, cfg.alpha);
      double s = score(mu, prior);
      if (!(s > cfg.min_score)) continue;

      ThresholdedFeature tf;
      tf.feature = feature;
      tf.threshold = t;
      tf.source_class = corpus.label_set[li];
      tf.score = s;
      for (const auto& row : table.rows) {
        if (row.weight > t && row.pos_count > 0)
          tf.positive_support.push_back(row.ngram);
      }
      std::sort(tf.positive_support.begin(), tf.positive_support.end());
      retained.push_back(std::move(tf));
    }

    // Redundancy pass: walk by descending score; keep a feature only if it
    // contributes a positive-support n-gram no kept feature covers yet.
    std::sort(retained.begin(), retained.end(),
              [](const ThresholdedFeature& a, const ThresholdedFeature& b) {
                if (a.score != b.score) return a.score > b.score;
                return a.feature < b.feature;
              });
    std::unordered_map<std::string, bool> covered;
    for (auto& tf : retained) {
      bool adds_new = false;
      for (const auto& g : tf.positive_support) {
        if (!covered.count(g)) {
          adds_new = true;
          break;
        }
      }
      if (!adds_new) continue;
      for (const auto& g : tf.positive_support) covered[g] = true;
      merged.push_back(std::move(tf));
    }
  }

  // Merge classes: deduplicate on (feature, threshold) keeping the best
  // score; break exact ties by class name so output is order-independent.
  std::map<std::pair<FeatureId, double>, ThresholdedFeature> dedup;
  for (auto& tf : merged) {
    auto key = std::make_pair(tf.feature, tf.threshold);
    auto it = dedup.find(key);
    if (it == dedup.end()) {
      dedup.emplace(key, std::move(tf));
    } else if (tf.score > it->second.score ||
               (tf.score == it->second.score &&
                tf.source_class < it->second.source_class)) {
      it->second = std::move(tf);
    }
  }
  std::vector<ThresholdedFeature> out;
  out.reserve(dedup.size());
  for (auto& [key, tf] : dedup) out.push_back(std::move(tf));
  std::sort(out.begin(), out.end(),
            [](const ThresholdedFeature& a, const ThresholdedFeature& b) {
              if (a.score != b.score) return a.score > b.score;
              if (a.feature != b.feature) return a.feature < b.feature;
              return a.threshold < b.threshold;
            });
  return out;
}

}  // namespace cbgen

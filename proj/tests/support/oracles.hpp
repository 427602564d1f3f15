#ifndef CBGEN_TESTS_ORACLES_HPP
#define CBGEN_TESTS_ORACLES_HPP

#include <algorithm>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include "cbgen/feature_select.hpp"

namespace cbgen::testing {

// Exhaustive threshold search: try every distinct support weight as a
// candidate, recompute the dropped sums from scratch each time, keep the
// highest qualifying candidate. Independent of row ordering.
inline double brute_force_threshold(const SupportTable& table) {
  std::set<double> candidates;
  double min_weight = std::numeric_limits<double>::infinity();
  for (const auto& r : table.rows) {
    candidates.insert(r.weight);
    min_weight = std::min(min_weight, r.weight);
  }
  double best = min_weight;
  bool found = false;
  for (double t : candidates) {
    long pos = 0, neg = 0;
    for (const auto& r : table.rows) {
      if (r.weight < t) {
        pos += r.pos_count;
        neg += r.neg_count;
      }
    }
    if (neg > pos && (!found || t > best)) {
      best = t;
      found = true;
    }
  }
  return best;
}

// Full confusion-matrix route to macro-F1 (zero convention for classes
// with no support and no predictions).
inline double oracle_macro_f1(const std::vector<std::string>& preds,
                              const std::vector<std::string>& golds,
                              const std::vector<std::string>& labels) {
  const std::size_t k = labels.size();
  auto index_of = [&](const std::string& s) {
    for (std::size_t i = 0; i < k; ++i)
      if (labels[i] == s) return i;
    return k;
  };
  std::vector<std::vector<long>> confusion(k, std::vector<long>(k, 0));
  for (std::size_t i = 0; i < preds.size(); ++i)
    ++confusion[index_of(golds[i])][index_of(preds[i])];
  double sum = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    long tp = confusion[c][c];
    long gold_total = 0, pred_total = 0;
    for (std::size_t j = 0; j < k; ++j) {
      gold_total += confusion[c][j];
      pred_total += confusion[j][c];
    }
    double p = pred_total > 0 ? static_cast<double>(tp) / pred_total : 0.0;
    double r = gold_total > 0 ? static_cast<double>(tp) / gold_total : 0.0;
    double f1 = (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
    sum += f1;
  }
  return sum / static_cast<double>(k);
}

inline bool oracle_is_degenerate(const std::vector<std::string>& preds,
                                 const std::vector<std::string>& labels) {
  std::set<std::string> predicted(preds.begin(), preds.end());
  std::set<std::string> expected(labels.begin(), labels.end());
  std::vector<std::string> missing;
  std::set_difference(expected.begin(), expected.end(), predicted.begin(),
                      predicted.end(), std::back_inserter(missing));
  return !missing.empty();
}

}  // namespace cbgen::testing

#endif  // CBGEN_TESTS_ORACLES_HPP

#include "cbgen/metrics.hpp"

#include <unordered_map>
#include <unordered_set>

#include "cbgen/errors.hpp"

namespace cbgen {

namespace {

// Maps string labels to indices in label_set; throws on labels outside it.
std::vector<int> to_indices(const std::vector<std::string>& labels,
                            const std::vector<std::string>& label_set,
                            const char* what) {
  std::unordered_map<std::string, int> index;
  for (std::size_t i = 0; i < label_set.size(); ++i)
    index[label_set[i]] = static_cast<int>(i);
  std::vector<int> out;
  out.reserve(labels.size());
  for (const auto& l : labels) {
    auto it = index.find(l);
    if (it == index.end()) {
      throw ArgumentError(std::string(what) + " label '" + l +
                          "' not in label set");
    }
    out.push_back(it->second);
  }
  return out;
}

}  // namespace

double macro_f1_indexed(const std::vector<int>& preds,
                        const std::vector<int>& golds, int num_classes,
                        AbsentClassMode mode) {
  if (preds.size() != golds.size()) {
    throw ArgumentError("macro_f1: " + std::to_string(preds.size()) +
                        " predictions vs " + std::to_string(golds.size()) +
                        " golds");
  }
  std::vector<long> tp(num_classes, 0), fp(num_classes, 0), fn(num_classes, 0);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    int p = preds[i], g = golds[i];
    if (p == g) {
      ++tp[p];
    } else {
      if (p >= 0) ++fp[p];
      if (g >= 0) ++fn[g];
    }
  }
  double sum = 0.0;
  int counted = 0;
  for (int c = 0; c < num_classes; ++c) {
    long support = tp[c] + fn[c];
    long predicted = tp[c] + fp[c];
    if (mode == AbsentClassMode::Exclude && support == 0 && predicted == 0)
      continue;
    double f1 = 0.0;
    if (2 * tp[c] + fp[c] + fn[c] > 0) {
      f1 = 2.0 * static_cast<double>(tp[c]) /
           static_cast<double>(2 * tp[c] + fp[c] + fn[c]);
    }
    sum += f1;
    ++counted;
  }
  return counted > 0 ? sum / counted : 0.0;
}

double macro_f1(const std::vector<std::string>& preds,
                const std::vector<std::string>& golds,
                const std::vector<std::string>& label_set,
                AbsentClassMode mode) {
  auto p = to_indices(preds, label_set, "predicted");
  auto g = to_indices(golds, label_set, "gold");
  return macro_f1_indexed(p, g, static_cast<int>(label_set.size()), mode);
}

std::map<std::string, double> per_class_recall(
    const std::vector<std::string>& preds,
    const std::vector<std::string>& golds,
    const std::vector<std::string>& label_set) {
  if (preds.size() != golds.size())
    throw ArgumentError("per_class_recall: length mismatch");
  std::map<std::string, double> out;
  for (const auto& label : label_set) {
    long support = 0, hit = 0;
    for (std::size_t i = 0; i < golds.size(); ++i) {
      if (golds[i] == label) {
        ++support;
        if (preds[i] == label) ++hit;
      }
    }
    out[label] = support > 0
                     ? static_cast<double>(hit) / static_cast<double>(support)
                     : 0.0;
  }
  return out;
}

std::optional<double> rarest_class_recall(
    const std::vector<std::string>& preds,
    const std::vector<std::string>& golds,
    const std::map<std::string, long>& train_label_counts) {
  if (preds.size() != golds.size())
    throw ArgumentError("rarest_class_recall: length mismatch");
  if (train_label_counts.empty())
    throw ArgumentError("rarest_class_recall: no training label counts");
  // std::map iterates alphabetically, so < keeps the alphabetically first
  // label among ties.
  std::string rarest;
  long best = -1;
  for (const auto& [label, count] : train_label_counts) {
    if (best < 0 || count < best) {
      best = count;
      rarest = label;
    }
  }
  long support = 0, hit = 0;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    if (golds[i] == rarest) {
      ++support;
      if (preds[i] == rarest) ++hit;
    }
  }
  if (support == 0) return std::nullopt;
  return static_cast<double>(hit) / static_cast<double>(support);
}

bool is_degenerate(const std::vector<std::string>& preds,
                   const std::vector<std::string>& label_set) {
  std::unordered_set<std::string> seen(preds.begin(), preds.end());
  for (const auto& label : label_set) {
    if (!seen.count(label)) return true;
  }
  return false;
}

}  // namespace cbgen

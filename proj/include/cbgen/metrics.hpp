#ifndef CBGEN_METRICS_HPP
#define CBGEN_METRICS_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace cbgen {

// How classes with zero predictions and zero golds enter the macro average.
enum class AbsentClassMode {
  ZeroF1,   // contribute F1 = 0 (default convention)
  Exclude,  // leave them out of the mean
};

// Unweighted mean of per-class F1 over label_set. preds/golds must have
// equal length and draw from label_set.
double macro_f1(const std::vector<std::string>& preds,
                const std::vector<std::string>& golds,
                const std::vector<std::string>& label_set,
                AbsentClassMode mode = AbsentClassMode::ZeroF1);

// Integer-label core used by training loops. Gold -1 marks an example whose
// class is outside the k model classes; it can only contribute false
// positives.
double macro_f1_indexed(const std::vector<int>& preds,
                        const std::vector<int>& golds, int num_classes,
                        AbsentClassMode mode = AbsentClassMode::ZeroF1);

std::map<std::string, double> per_class_recall(
    const std::vector<std::string>& preds,
    const std::vector<std::string>& golds,
    const std::vector<std::string>& label_set);

// Recall of the class with the fewest training examples (ties broken
// alphabetically). Empty when that class has no gold items to recall.
std::optional<double> rarest_class_recall(
    const std::vector<std::string>& preds,
    const std::vector<std::string>& golds,
    const std::map<std::string, long>& train_label_counts);

// True iff some label in label_set never occurs among the predictions.
bool is_degenerate(const std::vector<std::string>& preds,
                   const std::vector<std::string>& label_set);

}  // namespace cbgen

#endif  // CBGEN_METRICS_HPP

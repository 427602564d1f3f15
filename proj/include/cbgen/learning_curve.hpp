#ifndef CBGEN_LEARNING_CURVE_HPP
#define CBGEN_LEARNING_CURVE_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cbgen/association_matrix.hpp"
#include "cbgen/corpus.hpp"
#include "cbgen/feature_select.hpp"
#include "cbgen/metrics.hpp"
#include "cbgen/neural.hpp"

namespace cbgen {

// One (model, size, sample, run) cell of the learning-curve protocol.
struct RunResult {
  ModelKind kind = ModelKind::Cbc;
  long train_size = 0;
  int sample_index = 0;
  int run_index = 0;
  std::uint64_t sample_seed = 0;
  std::uint64_t run_seed = 0;
  double macro_f1 = 0.0;
  std::map<std::string, double> per_class_recall;
  std::optional<double> rarest_class_recall;
  bool degenerate = true;
  std::string error;  // non-empty marks a failed run; metrics then unset

  bool ok() const { return error.empty(); }
};

// Aggregate over the (target nine) runs of one model at one size.
struct CurvePoint {
  ModelKind kind = ModelKind::Cbc;
  long train_size = 0;
  int run_count = 0;  // completed runs entering the means
  double mean_macro_f1 = 0.0;
  double stddev_macro_f1 = 0.0;
  double mean_rarest_recall = 0.0;
  int rarest_defined_runs = 0;
  double nondegenerate_fraction = 0.0;
  // True on the smallest size where this model produced at least one
  // non-degenerate run.
  bool min_nondegenerate = false;
};

struct SampleManifest {
  long train_size = 0;
  int sample_index = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> doc_ids;
};

struct CurveConfig {
  std::vector<long> sizes;
  int samples_per_size = 3;
  int runs_per_sample = 3;
  std::vector<ModelKind> kinds{ModelKind::Cbc};
  std::uint64_t master_seed = 42;
  SelectionConfig selection;
  ExtractionConfig extraction;
  bool sum_all_evocations = false;
  MlpConfig mlp;
  CnnConfig cnn;
  DropoutSchedule schedule;
  int jobs = 1;
};

struct CurveReport {
  std::vector<RunResult> runs;
  std::vector<CurvePoint> points;
  std::vector<SampleManifest> samples;
  // -1 when the model never produced a non-degenerate run.
  std::map<std::string, long> min_nondegenerate_size;
};

// For every size: draw samples_per_size training samples, select features on
// the sample alone, build the vectorizer, then train each model
// runs_per_sample times and evaluate on the full test set. Samples and run
// seeds are shared across model kinds so comparisons are paired. Per-run
// failures are recorded, not fatal. Deterministic for a fixed master seed,
// independent of the jobs count.
CurveReport run_learning_curve(const LabeledCorpus& full_train,
                               const LabeledCorpus& dev,
                               const LabeledCorpus& test,
                               const AssociationMatrix& matrix,
                               const CurveConfig& cfg);

// Writes curve.tsv, runs.jsonl, min_size.tsv, and samples/*.ids under
// out_dir (created if missing). Output bytes are deterministic.
void write_curve_outputs(const CurveReport& report,
                         const std::string& out_dir);

}  // namespace cbgen

#endif  // CBGEN_LEARNING_CURVE_HPP

#include "cbgen/learning_curve.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "cbgen/errors.hpp"
#include "cbgen/text.hpp"
#include "cbgen/vectorizer.hpp"

namespace cbgen {

using nlohmann::json;

namespace {

struct CellInputs {
  LabeledCorpus sample;
  std::uint64_t sample_seed = 0;
  Vectorizer vectorizer;
  // Dense CB inputs, one column per document.
  Eigen::MatrixXd cb_train, cb_dev, cb_test;
  Eigen::MatrixXd bow_train, bow_dev, bow_test;
  std::vector<std::vector<int>> seq_train, seq_dev, seq_test;
  Vocab vocab;
  std::vector<int> y_train, y_dev;
};

bool needs_cb(const std::vector<ModelKind>& kinds) {
  for (auto k : kinds)
    if (k == ModelKind::Cbc || k == ModelKind::Cbcnn) return true;
  return false;
}
bool needs_seq(const std::vector<ModelKind>& kinds) {
  for (auto k : kinds)
    if (k == ModelKind::Cnn || k == ModelKind::Cbcnn) return true;
  return false;
}
bool needs_bow(const std::vector<ModelKind>& kinds) {
  for (auto k : kinds)
    if (k == ModelKind::BowMlp) return true;
  return false;
}

Eigen::MatrixXd embed_all(const Vectorizer& v, const LabeledCorpus& corpus,
                          const AssociationMatrix& matrix) {
  Eigen::MatrixXd x(v.dimension(), corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    CbVector vec = embed(v, corpus.docs[i].text, matrix);
    for (std::size_t d = 0; d < vec.size(); ++d) x(d, i) = vec[d];
  }
  return x;
}

Eigen::MatrixXd bow_all(const Vocab& vocab, const LabeledCorpus& corpus) {
  Eigen::MatrixXd x(vocab.tokens.size(), corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i)
    x.col(i) = bow_counts(vocab, corpus.docs[i].text);
  return x;
}

std::vector<std::vector<int>> encode_all(const Vocab& vocab,
                                         const LabeledCorpus& corpus,
                                         int min_len, int max_len) {
  std::vector<std::vector<int>> out;
  out.reserve(corpus.size());
  for (const auto& d : corpus.docs)
    out.push_back(encode_tokens(vocab, d.text, min_len, max_len));
  return out;
}

std::vector<int> map_labels(const LabeledCorpus& corpus,
                            const std::vector<std::string>& task_labels) {
  std::vector<int> y;
  y.reserve(corpus.size());
  for (const auto& d : corpus.docs) {
    int idx = -1;
    for (std::size_t i = 0; i < task_labels.size(); ++i) {
      if (task_labels[i] == d.label) {
        idx = static_cast<int>(i);
        break;
      }
    }
    y.push_back(idx);
  }
  return y;
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double stddev_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace

CurveReport run_learning_curve(const LabeledCorpus& full_train,
                               const LabeledCorpus& dev,
                               const LabeledCorpus& test,
                               const AssociationMatrix& matrix,
                               const CurveConfig& cfg) {
  if (cfg.sizes.empty()) throw ArgumentError("no training sizes given");
  for (long s : cfg.sizes) {
    if (s < 1 || s > static_cast<long>(full_train.size()))
      throw ArgumentError("training size " + std::to_string(s) +
                          " out of range (corpus has " +
                          std::to_string(full_train.size()) + " docs)");
  }
  if (cfg.kinds.empty()) throw ArgumentError("no model kinds given");
  if (cfg.samples_per_size < 1 || cfg.runs_per_sample < 1)
    throw ArgumentError("samples_per_size and runs_per_sample must be >= 1");
  if (dev.docs.empty() || test.docs.empty())
    throw ArgumentError("dev and test corpora must be non-empty");

  const std::vector<std::string>& task_labels = full_train.label_set;
  // Metric label set: task labels plus any extra labels seen in test.
  std::vector<std::string> eval_labels = task_labels;
  for (const auto& d : test.docs) {
    if (std::find(eval_labels.begin(), eval_labels.end(), d.label) ==
        eval_labels.end())
      eval_labels.push_back(d.label);
  }
  std::vector<std::string> test_golds;
  test_golds.reserve(test.size());
  for (const auto& d : test.docs) test_golds.push_back(d.label);

  struct Cell {
    std::size_t size_idx;
    int sample_idx;
  };
  std::vector<Cell> cells;
  for (std::size_t si = 0; si < cfg.sizes.size(); ++si)
    for (int sa = 0; sa < cfg.samples_per_size; ++sa)
      cells.push_back({si, sa});

  struct CellOutcome {
    std::vector<RunResult> runs;
    SampleManifest manifest;
  };
  std::vector<CellOutcome> outcomes(cells.size());

  auto run_cell = [&](std::size_t cell_idx) {
    const Cell& cell = cells[cell_idx];
    const long size = cfg.sizes[cell.size_idx];
    CellOutcome& outcome = outcomes[cell_idx];

    const std::uint64_t sample_seed =
        derive_seed(cfg.master_seed, 1, size, cell.sample_idx);
    auto fail_all = [&](const std::string& why) {
      for (auto kind : cfg.kinds) {
        for (int r = 0; r < cfg.runs_per_sample; ++r) {
          RunResult rr;
          rr.kind = kind;
          rr.train_size = size;
          rr.sample_index = cell.sample_idx;
          rr.run_index = r;
          rr.sample_seed = sample_seed;
          rr.error = why;
          outcome.runs.push_back(std::move(rr));
        }
      }
    };

    CellInputs in;
    try {
      in.sample = sample_training(full_train, size, sample_seed);
      in.sample_seed = sample_seed;
      outcome.manifest.train_size = size;
      outcome.manifest.sample_index = cell.sample_idx;
      outcome.manifest.seed = sample_seed;
      for (const auto& d : in.sample.docs)
        outcome.manifest.doc_ids.push_back(d.id);

      // Feature selection sees the training sample only.
      auto features =
          select_features(in.sample, matrix, cfg.selection, cfg.extraction);
      in.vectorizer = make_vectorizer(std::move(features), cfg.extraction,
                                      matrix, cfg.sum_all_evocations);

      in.y_train = map_labels(in.sample, task_labels);
      in.y_dev = map_labels(dev, task_labels);
      if (needs_cb(cfg.kinds)) {
        in.cb_train = embed_all(in.vectorizer, in.sample, matrix);
        in.cb_dev = embed_all(in.vectorizer, dev, matrix);
        in.cb_test = embed_all(in.vectorizer, test, matrix);
      }
      if (needs_seq(cfg.kinds) || needs_bow(cfg.kinds)) {
        in.vocab = build_vocab(in.sample);
      }
      if (needs_seq(cfg.kinds)) {
        int min_len = min_sequence_length(cfg.cnn);
        in.seq_train =
            encode_all(in.vocab, in.sample, min_len, cfg.cnn.max_seq_len);
        in.seq_dev = encode_all(in.vocab, dev, min_len, cfg.cnn.max_seq_len);
        in.seq_test = encode_all(in.vocab, test, min_len, cfg.cnn.max_seq_len);
      }
      if (needs_bow(cfg.kinds)) {
        in.bow_train = bow_all(in.vocab, in.sample);
        in.bow_dev = bow_all(in.vocab, dev);
        in.bow_test = bow_all(in.vocab, test);
      }
    } catch (const std::exception& e) {
      fail_all(e.what());
      return;
    }

    std::map<std::string, long> sample_label_counts;
    for (const auto& d : in.sample.docs) ++sample_label_counts[d.label];

    for (auto kind : cfg.kinds) {
      for (int r = 0; r < cfg.runs_per_sample; ++r) {
        RunResult rr;
        rr.kind = kind;
        rr.train_size = size;
        rr.sample_index = cell.sample_idx;
        rr.run_index = r;
        rr.sample_seed = sample_seed;
        rr.run_seed = derive_seed(sample_seed, 1000 + r);
        try {
          MlpConfig mlp = cfg.mlp;
          mlp.seed = rr.run_seed;
          TrainOutput trained;
          BatchInput test_input;
          switch (kind) {
            case ModelKind::Cbc:
              trained = train_cbc({in.cb_train, in.y_train},
                                  {in.cb_dev, in.y_dev}, task_labels, mlp,
                                  in.vectorizer.matrix_fingerprint);
              test_input.vectors = &in.cb_test;
              break;
            case ModelKind::BowMlp:
              trained = train_bow_mlp({in.bow_train, in.y_train},
                                      {in.bow_dev, in.y_dev}, task_labels,
                                      mlp, in.vocab);
              test_input.vectors = &in.bow_test;
              break;
            case ModelKind::Cnn:
              trained = train_cnn({in.seq_train, in.y_train},
                                  {in.seq_dev, in.y_dev}, task_labels, mlp,
                                  cfg.cnn, in.vocab);
              test_input.sequences = &in.seq_test;
              break;
            case ModelKind::Cbcnn:
              trained = train_cbcnn(
                  {in.cb_train, in.seq_train, in.y_train},
                  {in.cb_dev, in.seq_dev, in.y_dev}, task_labels, mlp,
                  cfg.cnn, cfg.schedule, in.vocab,
                  in.vectorizer.matrix_fingerprint);
              test_input.vectors = &in.cb_test;
              test_input.sequences = &in.seq_test;
              break;
          }
          auto preds = predict(trained.model, test_input);
          std::vector<std::string> pred_labels;
          pred_labels.reserve(preds.size());
          for (const auto& p : preds)
            pred_labels.push_back(trained.model.labels[p.label]);

          rr.macro_f1 = macro_f1(pred_labels, test_golds, eval_labels);
          rr.per_class_recall =
              per_class_recall(pred_labels, test_golds, eval_labels);
          rr.rarest_class_recall = rarest_class_recall(
              pred_labels, test_golds, sample_label_counts);
          rr.degenerate = is_degenerate(pred_labels, task_labels);
        } catch (const std::exception& e) {
          rr.error = e.what();
        }
        outcome.runs.push_back(std::move(rr));
      }
    }
  };

  const int jobs = std::max(1, cfg.jobs);
  if (jobs == 1 || cells.size() <= 1) {
    for (std::size_t i = 0; i < cells.size(); ++i) run_cell(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    int n_workers = std::min<std::size_t>(jobs, cells.size());
    for (int w = 0; w < n_workers; ++w) {
      workers.emplace_back([&]() {
        while (true) {
          std::size_t i = next.fetch_add(1);
          if (i >= cells.size()) break;
          run_cell(i);
        }
      });
    }
    for (auto& t : workers) t.join();
  }

  CurveReport report;
  for (auto& outcome : outcomes) {
    report.samples.push_back(std::move(outcome.manifest));
    for (auto& rr : outcome.runs) report.runs.push_back(std::move(rr));
  }

  // Aggregate per (kind, size), sizes in the order given.
  for (auto kind : cfg.kinds)
    report.min_nondegenerate_size[model_kind_name(kind)] = -1;
  for (auto kind : cfg.kinds) {
    for (long size : cfg.sizes) {
      CurvePoint pt;
      pt.kind = kind;
      pt.train_size = size;
      std::vector<double> f1s, rarest;
      int nondeg = 0;
      for (const auto& rr : report.runs) {
        if (rr.kind != kind || rr.train_size != size || !rr.ok()) continue;
        f1s.push_back(rr.macro_f1);
        if (rr.rarest_class_recall)
          rarest.push_back(*rr.rarest_class_recall);
        if (!rr.degenerate) ++nondeg;
      }
      pt.run_count = static_cast<int>(f1s.size());
      pt.mean_macro_f1 = mean_of(f1s);
      pt.stddev_macro_f1 = stddev_of(f1s);
      pt.mean_rarest_recall = mean_of(rarest);
      pt.rarest_defined_runs = static_cast<int>(rarest.size());
      pt.nondegenerate_fraction =
          pt.run_count > 0
              ? static_cast<double>(nondeg) / pt.run_count
              : 0.0;
      report.points.push_back(pt);
    }
  }
  // Flag the smallest size with any non-degenerate run, per model.
  for (auto kind : cfg.kinds) {
    long best = -1;
    for (auto& pt : report.points) {
      if (pt.kind != kind || pt.nondegenerate_fraction <= 0.0) continue;
      if (best < 0 || pt.train_size < best) best = pt.train_size;
    }
    report.min_nondegenerate_size[model_kind_name(kind)] = best;
    if (best >= 0) {
      for (auto& pt : report.points) {
        if (pt.kind == kind && pt.train_size == best)
          pt.min_nondegenerate = true;
      }
    }
  }
  return report;
}

void write_curve_outputs(const CurveReport& report,
                         const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(out_dir) / "samples");

  {
    std::ofstream out(fs::path(out_dir) / "curve.tsv", std::ios::trunc);
    if (!out) throw Error("cannot write curve.tsv under " + out_dir);
    out << "model\ttrain_size\tmetric\tmean\tstddev\tn_runs\n";
    for (const auto& pt : report.points) {
      const char* kind = model_kind_name(pt.kind);
      out << kind << '\t' << pt.train_size << "\tmacro_f1\t"
          << format_fixed(pt.mean_macro_f1, 6) << '\t'
          << format_fixed(pt.stddev_macro_f1, 6) << '\t' << pt.run_count
          << '\n';
      out << kind << '\t' << pt.train_size << "\trarest_class_recall\t"
          << format_fixed(pt.mean_rarest_recall, 6) << "\t-\t"
          << pt.rarest_defined_runs << '\n';
      out << kind << '\t' << pt.train_size << "\tnondegenerate_fraction\t"
          << format_fixed(pt.nondegenerate_fraction, 6) << "\t-\t"
          << pt.run_count << '\n';
    }
  }
  {
    std::ofstream out(fs::path(out_dir) / "runs.jsonl", std::ios::trunc);
    if (!out) throw Error("cannot write runs.jsonl under " + out_dir);
    for (const auto& rr : report.runs) {
      json j;
      j["model"] = model_kind_name(rr.kind);
      j["train_size"] = rr.train_size;
      j["sample_index"] = rr.sample_index;
      j["run_index"] = rr.run_index;
      j["sample_seed"] = rr.sample_seed;
      j["run_seed"] = rr.run_seed;
      if (rr.ok()) {
        j["macro_f1"] = rr.macro_f1;
        j["per_class_recall"] = rr.per_class_recall;
        if (rr.rarest_class_recall)
          j["rarest_class_recall"] = *rr.rarest_class_recall;
        else
          j["rarest_class_recall"] = nullptr;
        j["degenerate"] = rr.degenerate;
      } else {
        j["error"] = rr.error;
      }
      out << j.dump() << '\n';
    }
  }
  {
    // Wide layout for plotting: one row per size, one column per model.
    std::ofstream out(fs::path(out_dir) / "plot_macro_f1.tsv",
                      std::ios::trunc);
    if (!out) throw Error("cannot write plot_macro_f1.tsv under " + out_dir);
    std::vector<std::string> kinds;
    std::vector<long> sizes;
    for (const auto& pt : report.points) {
      if (std::find(kinds.begin(), kinds.end(),
                    model_kind_name(pt.kind)) == kinds.end())
        kinds.push_back(model_kind_name(pt.kind));
      if (std::find(sizes.begin(), sizes.end(), pt.train_size) == sizes.end())
        sizes.push_back(pt.train_size);
    }
    out << "train_size";
    for (const auto& kind : kinds) out << '\t' << kind;
    out << '\n';
    for (long size : sizes) {
      out << size;
      for (const auto& kind : kinds) {
        for (const auto& pt : report.points) {
          if (pt.train_size == size && model_kind_name(pt.kind) == kind) {
            out << '\t' << format_fixed(pt.mean_macro_f1, 6);
            break;
          }
        }
      }
      out << '\n';
    }
  }
  {
    std::ofstream out(fs::path(out_dir) / "min_size.tsv", std::ios::trunc);
    if (!out) throw Error("cannot write min_size.tsv under " + out_dir);
    out << "model\tmin_nondegenerate_size\n";
    for (const auto& [kind, size] : report.min_nondegenerate_size) {
      out << kind << '\t';
      if (size >= 0)
        out << size;
      else
        out << "none";
      out << '\n';
    }
  }
  for (const auto& manifest : report.samples) {
    std::string name = "size" + std::to_string(manifest.train_size) +
                       "_sample" + std::to_string(manifest.sample_index) +
                       ".ids";
    std::ofstream out(fs::path(out_dir) / "samples" / name, std::ios::trunc);
    if (!out) throw Error("cannot write sample manifest under " + out_dir);
    for (const auto& id : manifest.doc_ids) out << id << '\n';
  }
}

}  // namespace cbgen

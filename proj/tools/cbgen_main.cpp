// cbgen: select task-specific generalizing features from a sparse
// n-gram -> feature association matrix, embed documents, and train/evaluate
// classifiers over the resulting vectors.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cbgen/association_matrix.hpp"
#include "cbgen/corpus.hpp"
#include "cbgen/errors.hpp"
#include "cbgen/feature_select.hpp"
#include "cbgen/learning_curve.hpp"
#include "cbgen/metrics.hpp"
#include "cbgen/neural.hpp"
#include "cbgen/text.hpp"
#include "cbgen/vectorizer.hpp"

using nlohmann::json;
using namespace cbgen;

namespace {

struct SelectionOpts {
  double alpha = 5.0;
  double min_score = 0.01;
  int min_support = 2;
  std::string count_mode = "token";
  int max_ngram_order = 3;
  bool sum_all_evocations = false;
};

void add_selection_opts(CLI::App* cmd, SelectionOpts& o) {
  cmd->add_option("--alpha", o.alpha, "precision smoothing pseudo-count")
      ->capture_default_str();
  cmd->add_option("--min-score", o.min_score, "feature retention score gate")
      ->capture_default_str();
  cmd->add_option("--min-support", o.min_support,
                  "minimum distinct positive evokers")
      ->capture_default_str();
  cmd->add_option("--count-mode", o.count_mode,
                  "support counting: token occurrences or document frequency")
      ->check(CLI::IsMember({"token", "document"}))
      ->capture_default_str();
  cmd->add_option("--max-ngram-order", o.max_ngram_order,
                  "longest n-gram to extract")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_flag("--sum-all-evocations", o.sum_all_evocations,
                "sum sub-threshold evocations before clipping");
}

SelectionConfig to_selection(const SelectionOpts& o) {
  SelectionConfig cfg;
  cfg.alpha = o.alpha;
  cfg.min_score = o.min_score;
  cfg.min_support_size = o.min_support;
  cfg.count_mode =
      o.count_mode == "document" ? CountMode::Document : CountMode::Token;
  return cfg;
}

ExtractionConfig to_extraction(const SelectionOpts& o) {
  ExtractionConfig cfg;
  cfg.max_ngram_order = o.max_ngram_order;
  cfg.tokenizer = kTokenizerVersion;
  return cfg;
}

struct TrainOpts {
  std::vector<int> hidden_sizes{200};
  std::string activation = "relu";
  double learning_rate = 0.1;
  double momentum = 0.0;
  int batch_size = 16;
  int patience = 1000;
  int eval_every = 20;
  int max_steps = 50000;
  std::uint64_t seed = 42;
};

void add_train_opts(CLI::App* cmd, TrainOpts& o, bool with_seed = true) {
  cmd->add_option("--hidden-sizes", o.hidden_sizes,
                  "MLP hidden layer sizes (comma separated)")
      ->delimiter(',')
      ->capture_default_str();
  cmd->add_option("--activation", o.activation, "hidden nonlinearity")
      ->check(CLI::IsMember({"relu", "tanh"}))
      ->capture_default_str();
  cmd->add_option("--learning-rate", o.learning_rate, "SGD step size")
      ->capture_default_str();
  cmd->add_option("--momentum", o.momentum, "SGD momentum")
      ->capture_default_str();
  cmd->add_option("--batch-size", o.batch_size, "minibatch size, 5..64")
      ->capture_default_str();
  cmd->add_option("--patience", o.patience,
                  "stop after this many steps without dev macro-F1 gain")
      ->capture_default_str();
  cmd->add_option("--eval-every", o.eval_every, "dev evaluation cadence")
      ->capture_default_str();
  cmd->add_option("--max-steps", o.max_steps, "hard step limit")
      ->capture_default_str();
  if (with_seed)
    cmd->add_option("--seed", o.seed, "training seed")->capture_default_str();
}

MlpConfig to_mlp(const TrainOpts& o) {
  MlpConfig cfg;
  cfg.hidden_sizes = o.hidden_sizes;
  cfg.activation =
      o.activation == "tanh" ? Activation::Tanh : Activation::ReLU;
  cfg.learning_rate = o.learning_rate;
  cfg.momentum = o.momentum;
  cfg.batch_size = o.batch_size;
  cfg.patience_steps = o.patience;
  cfg.eval_every = o.eval_every;
  cfg.max_steps = o.max_steps;
  cfg.seed = o.seed;
  return cfg;
}

struct CnnOpts {
  std::vector<int> filter_sizes{2, 3, 4, 5, 6};
  int filters_per_size = 50;
  int hidden_size = 200;
  int embedding_dim = 64;
  int combine_hidden = 200;
  int max_seq_len = 256;
  double dropout_c = 1.0;
  double step_scale = 0.0;
};

void add_cnn_opts(CLI::App* cmd, CnnOpts& o) {
  cmd->add_option("--filter-sizes", o.filter_sizes,
                  "convolution widths (comma separated)")
      ->delimiter(',')
      ->capture_default_str();
  cmd->add_option("--filters-per-size", o.filters_per_size,
                  "filters per width (300 reproduces the full-scale setting)")
      ->capture_default_str();
  cmd->add_option("--cnn-hidden", o.hidden_size,
                  "hidden nodes above max pooling")
      ->capture_default_str();
  cmd->add_option("--embedding-dim", o.embedding_dim,
                  "trainable token embedding width")
      ->capture_default_str();
  cmd->add_option("--combine-hidden", o.combine_hidden,
                  "extra layer above the concatenated branches")
      ->capture_default_str();
  cmd->add_option("--max-seq-len", o.max_seq_len, "token sequence cap")
      ->capture_default_str();
  cmd->add_option("--dropout-c", o.dropout_c,
                  "block-dropout decay rate C; lower decays slower")
      ->capture_default_str();
  cmd->add_option("--dropout-step-scale", o.step_scale,
                  "steps mapped to x=1 in the schedule; 0 = steps per epoch")
      ->capture_default_str();
}

CnnConfig to_cnn(const CnnOpts& o) {
  CnnConfig cfg;
  cfg.filter_sizes = o.filter_sizes;
  cfg.filters_per_size = o.filters_per_size;
  cfg.hidden_size = o.hidden_size;
  cfg.embedding_dim = o.embedding_dim;
  cfg.combine_hidden = o.combine_hidden;
  cfg.max_seq_len = o.max_seq_len;
  return cfg;
}

DropoutSchedule to_schedule(const CnnOpts& o) {
  return DropoutSchedule{o.dropout_c, o.step_scale};
}

std::vector<int> corpus_labels_as_indices(
    const LabeledCorpus& corpus, const std::vector<std::string>& labels) {
  std::vector<int> y;
  y.reserve(corpus.size());
  for (const auto& d : corpus.docs) {
    int idx = -1;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == d.label) {
        idx = static_cast<int>(i);
        break;
      }
    }
    y.push_back(idx);
  }
  return y;
}

Eigen::MatrixXd embed_corpus(const Vectorizer& v, const LabeledCorpus& corpus,
                             const AssociationMatrix& matrix) {
  Eigen::MatrixXd x(v.dimension(), corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    CbVector vec = embed(v, corpus.docs[i].text, matrix);
    for (std::size_t d = 0; d < vec.size(); ++d) x(d, i) = vec[d];
  }
  return x;
}

Eigen::MatrixXd bow_corpus(const Vocab& vocab, const LabeledCorpus& corpus) {
  Eigen::MatrixXd x(vocab.tokens.size(), corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i)
    x.col(i) = bow_counts(vocab, corpus.docs[i].text);
  return x;
}

std::vector<std::vector<int>> encode_corpus(const Vocab& vocab,
                                            const LabeledCorpus& corpus,
                                            const CnnConfig& cfg) {
  int min_len = min_sequence_length(cfg);
  std::vector<std::vector<int>> out;
  out.reserve(corpus.size());
  for (const auto& d : corpus.docs)
    out.push_back(encode_tokens(vocab, d.text, min_len, cfg.max_seq_len));
  return out;
}

// Inputs for predict/evaluate, shaped to what the model kind expects.
struct PreparedInputs {
  Eigen::MatrixXd vectors;
  std::vector<std::vector<int>> sequences;

  BatchInput batch() const {
    BatchInput in;
    if (vectors.size() > 0 || vectors.rows() > 0) in.vectors = &vectors;
    if (!sequences.empty()) in.sequences = &sequences;
    return in;
  }
};

PreparedInputs prepare_inputs(const TrainedModel& model,
                              const LabeledCorpus& corpus,
                              const std::string& vectorizer_path,
                              const std::string& matrix_path) {
  PreparedInputs out;
  const bool wants_cb =
      model.kind == ModelKind::Cbc || model.kind == ModelKind::Cbcnn;
  if (wants_cb) {
    if (vectorizer_path.empty() || matrix_path.empty()) {
      throw ArgumentError(std::string(model_kind_name(model.kind)) +
                          " models need --vectorizer and --matrix");
    }
    Vectorizer v = load_vectorizer(vectorizer_path);
    if (!model.vectorizer_fingerprint.empty() &&
        v.matrix_fingerprint != model.vectorizer_fingerprint) {
      throw ConfigError("model was trained against a different vectorizer");
    }
    AssociationMatrix matrix = load_matrix(matrix_path);
    out.vectors = embed_corpus(v, corpus, matrix);
  }
  if (model.kind == ModelKind::BowMlp) {
    out.vectors = bow_corpus(model.vocab, corpus);
  }
  if (model.kind == ModelKind::Cnn || model.kind == ModelKind::Cbcnn) {
    out.sequences = encode_corpus(model.vocab, corpus, model.cnn_cfg);
  }
  return out;
}

// --------------------------------------------------------------------------
// Subcommand bodies.

struct BuildVectorizerArgs {
  std::string matrix_path, train_path, out_path;
  SelectionOpts selection;
};

void cmd_build_vectorizer(const BuildVectorizerArgs& a) {
  AssociationMatrix matrix = load_matrix(a.matrix_path);
  LabeledCorpus train = load_corpus(a.train_path);
  auto features = select_features(train, matrix, to_selection(a.selection),
                                  to_extraction(a.selection));
  Vectorizer v = make_vectorizer(std::move(features),
                                 to_extraction(a.selection), matrix,
                                 a.selection.sum_all_evocations);
  save_vectorizer(v, a.out_path);

  std::printf("selected %zu features -> %s\n", v.dimension(),
              a.out_path.c_str());
  if (v.dimension() > 0) {
    auto [fc, fs] = feature_breakdown(v, v.dimension());
    std::printf("namespace split: %.1f%% co-occurrence, %.1f%% syntactic\n",
                100.0 * fc, 100.0 * fs);
    std::printf("top features:\n");
    for (std::size_t i = 0; i < std::min<std::size_t>(10, v.dimension());
         ++i) {
      const auto& tf = v.features[i];
      std::printf("  %-28s t=%-8s score=%.4f class=%s\n",
                  tf.feature.str().c_str(),
                  format_double(tf.threshold).c_str(), tf.score,
                  tf.source_class.c_str());
    }
  }
}

struct VectorizeArgs {
  std::string vectorizer_path, matrix_path, input_path, out_path;
};

void cmd_vectorize(const VectorizeArgs& a) {
  Vectorizer v = load_vectorizer(a.vectorizer_path);
  AssociationMatrix matrix = load_matrix(a.matrix_path);
  LabeledCorpus corpus = load_corpus(a.input_path);
  std::ofstream out(a.out_path, std::ios::trunc);
  if (!out) throw Error("cannot open for writing: " + a.out_path);
  for (const auto& doc : corpus.docs) {
    out << doc.id;
    for (double value : embed(v, doc.text, matrix))
      out << '\t' << format_double(value);
    out << '\n';
  }
  if (!out) throw Error("write failed: " + a.out_path);
  std::printf("wrote %zu vectors of dimension %zu -> %s\n", corpus.size(),
              v.dimension(), a.out_path.c_str());
}

struct InspectArgs {
  std::string matrix_path, train_path, feature, class_label, out_path;
  SelectionOpts selection;
};

void cmd_inspect_feature(const InspectArgs& a) {
  AssociationMatrix matrix = load_matrix(a.matrix_path);
  LabeledCorpus train = load_corpus(a.train_path);
  FeatureId feature = FeatureId::parse(a.feature);
  SelectionConfig cfg = to_selection(a.selection);
  SupportTable table = build_support_table(feature, a.class_label, train,
                                           matrix, cfg,
                                           to_extraction(a.selection));

  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!a.out_path.empty()) {
    file.open(a.out_path, std::ios::trunc);
    if (!file) throw Error("cannot open for writing: " + a.out_path);
    out = &file;
  }
  *out << "ngram\tweight\tpos\tneg\n";
  for (const auto& row : table.rows) {
    *out << row.ngram << '\t' << format_double(row.weight) << '\t'
         << row.pos_count << '\t' << row.neg_count << '\n';
  }
  if (!table.rows.empty()) {
    double t = choose_threshold(table);
    SupportStats stats = support_stats(table, t);
    *out << "# threshold\t" << format_double(t) << '\n';
    *out << "# support_size\t" << stats.support_size << '\n';
    *out << "# pos_weight\t" << format_double(stats.pos_weight) << '\n';
    *out << "# neg_weight\t" << format_double(stats.neg_weight) << '\n';
    if (stats.pos_weight + stats.neg_weight > 0) {
      double prior = 0.0;
      long in_class = 0;
      for (const auto& d : train.docs)
        if (d.label == a.class_label) ++in_class;
      prior = static_cast<double>(in_class) /
              static_cast<double>(train.size());
      double mu = precision(stats.pos_weight, stats.neg_weight);
      double smoothed = smoothed_precision(stats.pos_weight, stats.neg_weight,
                                           prior, cfg.alpha);
      *out << "# precision\t" << format_double(mu) << '\n';
      *out << "# smoothed_precision\t" << format_double(smoothed) << '\n';
      *out << "# score\t" << format_double(score(smoothed, prior)) << '\n';
    }
  }
}

struct TrainArgs {
  std::string kind = "cbc";
  std::string train_path, dev_path, model_out, log_out;
  std::string vectorizer_path, matrix_path;
  TrainOpts train_opts;
  CnnOpts cnn_opts;
};

void cmd_train(const TrainArgs& a) {
  ModelKind kind = model_kind_from_name(a.kind);
  LabeledCorpus train = load_corpus(a.train_path);
  LabeledCorpus dev = load_corpus(a.dev_path);
  const std::vector<std::string>& labels = train.label_set;
  std::vector<int> y_train = corpus_labels_as_indices(train, labels);
  std::vector<int> y_dev = corpus_labels_as_indices(dev, labels);
  MlpConfig mlp = to_mlp(a.train_opts);
  CnnConfig cnn = to_cnn(a.cnn_opts);

  TrainOutput out;
  if (kind == ModelKind::Cbc || kind == ModelKind::Cbcnn) {
    if (a.vectorizer_path.empty() || a.matrix_path.empty())
      throw ArgumentError("cbc/cbcnn training needs --vectorizer and --matrix");
    Vectorizer v = load_vectorizer(a.vectorizer_path);
    AssociationMatrix matrix = load_matrix(a.matrix_path);
    Eigen::MatrixXd x_train = embed_corpus(v, train, matrix);
    Eigen::MatrixXd x_dev = embed_corpus(v, dev, matrix);
    if (kind == ModelKind::Cbc) {
      out = train_cbc({x_train, y_train}, {x_dev, y_dev}, labels, mlp,
                      v.matrix_fingerprint);
    } else {
      Vocab vocab = build_vocab(train);
      out = train_cbcnn({x_train, encode_corpus(vocab, train, cnn), y_train},
                        {x_dev, encode_corpus(vocab, dev, cnn), y_dev},
                        labels, mlp, cnn, to_schedule(a.cnn_opts), vocab,
                        v.matrix_fingerprint);
    }
  } else if (kind == ModelKind::Cnn) {
    Vocab vocab = build_vocab(train);
    out = train_cnn({encode_corpus(vocab, train, cnn), y_train},
                    {encode_corpus(vocab, dev, cnn), y_dev}, labels, mlp,
                    cnn, vocab);
  } else {
    Vocab vocab = build_vocab(train);
    out = train_bow_mlp({bow_corpus(vocab, train), y_train},
                        {bow_corpus(vocab, dev), y_dev}, labels, mlp, vocab);
  }

  save_model(out.model, a.model_out);
  if (!a.log_out.empty()) save_training_log(out.log, a.log_out);
  double best = 0.0;
  for (const auto& e : out.log) best = std::max(best, e.dev_macro_f1);
  std::printf("trained %s on %zu docs; best dev macro-F1 %.4f -> %s\n",
              a.kind.c_str(), train.size(), best, a.model_out.c_str());
}

struct PredictArgs {
  std::string model_path, input_path, out_path;
  std::string vectorizer_path, matrix_path;
};

void cmd_predict(const PredictArgs& a) {
  TrainedModel model = load_model(a.model_path);
  LabeledCorpus corpus = load_corpus(a.input_path);
  PreparedInputs inputs =
      prepare_inputs(model, corpus, a.vectorizer_path, a.matrix_path);
  auto preds = predict(model, inputs.batch());

  std::ofstream out(a.out_path, std::ios::trunc);
  if (!out) throw Error("cannot open for writing: " + a.out_path);
  out << "# id\tpredicted";
  for (const auto& label : model.labels) out << "\tp_" << label;
  out << '\n';
  for (std::size_t i = 0; i < preds.size(); ++i) {
    out << corpus.docs[i].id << '\t' << model.labels[preds[i].label];
    for (double p : preds[i].probs) out << '\t' << format_fixed(p, 6);
    out << '\n';
  }
  if (!out) throw Error("write failed: " + a.out_path);
  std::printf("wrote %zu predictions -> %s\n", preds.size(),
              a.out_path.c_str());
}

struct EvaluateArgs {
  std::string model_path, test_path, out_path;
  std::string vectorizer_path, matrix_path;
};

void cmd_evaluate(const EvaluateArgs& a) {
  TrainedModel model = load_model(a.model_path);
  LabeledCorpus test = load_corpus(a.test_path);
  PreparedInputs inputs =
      prepare_inputs(model, test, a.vectorizer_path, a.matrix_path);
  auto preds = predict(model, inputs.batch());

  std::vector<std::string> pred_labels, golds;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    pred_labels.push_back(model.labels[preds[i].label]);
    golds.push_back(test.docs[i].label);
  }
  std::vector<std::string> label_set = model.labels;
  for (const auto& l : test.label_set) {
    if (std::find(label_set.begin(), label_set.end(), l) == label_set.end())
      label_set.push_back(l);
  }
  std::map<std::string, long> train_counts;
  for (std::size_t i = 0; i < model.labels.size(); ++i) {
    if (model.train_label_counts[i] > 0)
      train_counts[model.labels[i]] = model.train_label_counts[i];
  }

  json metrics;
  metrics["model"] = model_kind_name(model.kind);
  metrics["n_test"] = test.size();
  metrics["macro_f1"] = macro_f1(pred_labels, golds, label_set);
  metrics["per_class_recall"] = per_class_recall(pred_labels, golds,
                                                 label_set);
  auto rarest = rarest_class_recall(pred_labels, golds, train_counts);
  if (rarest)
    metrics["rarest_class_recall"] = *rarest;
  else
    metrics["rarest_class_recall"] = nullptr;
  metrics["degenerate"] = is_degenerate(pred_labels, model.labels);

  std::ofstream out(a.out_path, std::ios::trunc);
  if (!out) throw Error("cannot open for writing: " + a.out_path);
  out << metrics.dump(2) << '\n';
  if (!out) throw Error("write failed: " + a.out_path);
  std::printf("macro-F1 %.4f on %zu docs -> %s\n",
              metrics["macro_f1"].get<double>(), test.size(),
              a.out_path.c_str());
}

struct CurveArgs {
  std::string matrix_path, train_path, dev_path, test_path, out_dir;
  std::vector<long> sizes;
  std::vector<std::string> kinds{"cbc"};
  int samples = 3;
  int runs = 3;
  std::uint64_t seed = 42;
  int jobs = 1;
  SelectionOpts selection;
  TrainOpts train_opts;
  CnnOpts cnn_opts;
};

void cmd_learning_curve(const CurveArgs& a) {
  AssociationMatrix matrix = load_matrix(a.matrix_path);
  LabeledCorpus train = load_corpus(a.train_path);
  LabeledCorpus dev = load_corpus(a.dev_path);
  LabeledCorpus test = load_corpus(a.test_path);

  CurveConfig cfg;
  cfg.sizes = a.sizes;
  cfg.samples_per_size = a.samples;
  cfg.runs_per_sample = a.runs;
  cfg.master_seed = a.seed;
  cfg.jobs = a.jobs;
  cfg.kinds.clear();
  for (const auto& name : a.kinds)
    cfg.kinds.push_back(model_kind_from_name(name));
  cfg.selection = to_selection(a.selection);
  cfg.extraction = to_extraction(a.selection);
  cfg.sum_all_evocations = a.selection.sum_all_evocations;
  cfg.mlp = to_mlp(a.train_opts);
  cfg.cnn = to_cnn(a.cnn_opts);
  cfg.schedule = to_schedule(a.cnn_opts);

  CurveReport report = run_learning_curve(train, dev, test, matrix, cfg);
  write_curve_outputs(report, a.out_dir);

  std::printf("%-8s %10s %10s %10s %8s\n", "model", "size", "macro_f1",
              "rarest", "runs");
  for (const auto& pt : report.points) {
    std::printf("%-8s %10ld %10.4f %10.4f %8d\n", model_kind_name(pt.kind),
                pt.train_size, pt.mean_macro_f1, pt.mean_rarest_recall,
                pt.run_count);
  }
  std::printf("outputs in %s\n", a.out_dir.c_str());
}

struct MergeArgs {
  std::string fs_path, fc_path, out_path;
};

void cmd_merge_matrix(const MergeArgs& a) {
  AssociationMatrix base = load_matrix(a.fs_path);
  FeatureToItemMatrix fc = load_feature_to_item(a.fc_path);
  AssociationMatrix merged = merge_matrices(base, fc);
  save_matrix(merged, a.out_path);
  std::printf("merged %zu rows / %zu cells -> %s\n", merged.row_count(),
              merged.cell_count(), a.out_path.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "cbgen: task-specific feature selection and document embedding over a "
      "sparse n-gram/feature association matrix, with classifiers and a "
      "learning-curve harness"};
  app.require_subcommand(1);
  app.set_config("--config", "", "read options from a key=value file");

  BuildVectorizerArgs bv;
  auto* c_bv = app.add_subcommand("build-vectorizer",
                                  "select generalizing features from a "
                                  "training corpus (done once per task)");
  c_bv->add_option("--matrix", bv.matrix_path, "association matrix TSV")
      ->required();
  c_bv->add_option("--train", bv.train_path, "training corpus JSONL")
      ->required();
  c_bv->add_option("--out", bv.out_path, "vectorizer file to write")
      ->required();
  add_selection_opts(c_bv, bv.selection);
  c_bv->callback([&bv]() { cmd_build_vectorizer(bv); });

  VectorizeArgs vz;
  auto* c_vz = app.add_subcommand("vectorize",
                                  "embed documents as dense vectors");
  c_vz->add_option("--vectorizer", vz.vectorizer_path, "vectorizer file")
      ->required();
  c_vz->add_option("--matrix", vz.matrix_path, "association matrix TSV")
      ->required();
  c_vz->add_option("--input", vz.input_path, "corpus JSONL")->required();
  c_vz->add_option("--out", vz.out_path, "TSV of id + vector values")
      ->required();
  c_vz->callback([&vz]() { cmd_vectorize(vz); });

  InspectArgs ins;
  auto* c_ins = app.add_subcommand(
      "inspect-feature", "dump a feature's support table for one class");
  c_ins->add_option("--matrix", ins.matrix_path, "association matrix TSV")
      ->required();
  c_ins->add_option("--train", ins.train_path, "training corpus JSONL")
      ->required();
  c_ins->add_option("--feature", ins.feature, "feature id, e.g. C:saturn_v")
      ->required();
  c_ins->add_option("--class-label", ins.class_label, "pivot class")
      ->required();
  c_ins->add_option("--out", ins.out_path, "output TSV (default stdout)");
  add_selection_opts(c_ins, ins.selection);
  c_ins->callback([&ins]() { cmd_inspect_feature(ins); });

  TrainArgs tr;
  auto* c_tr = app.add_subcommand("train", "train a classifier");
  c_tr->add_option("--kind", tr.kind, "cbc | cbcnn | cnn | bow_mlp")
      ->check(CLI::IsMember({"cbc", "cbcnn", "cnn", "bow_mlp"}))
      ->capture_default_str();
  c_tr->add_option("--train", tr.train_path, "training corpus JSONL")
      ->required();
  c_tr->add_option("--dev", tr.dev_path, "development corpus JSONL")
      ->required();
  c_tr->add_option("--model-out", tr.model_out, "model file to write")
      ->required();
  c_tr->add_option("--log-out", tr.log_out, "training log JSONL");
  c_tr->add_option("--vectorizer", tr.vectorizer_path,
                   "vectorizer file (cbc/cbcnn)");
  c_tr->add_option("--matrix", tr.matrix_path,
                   "association matrix TSV (cbc/cbcnn)");
  add_train_opts(c_tr, tr.train_opts);
  add_cnn_opts(c_tr, tr.cnn_opts);
  c_tr->callback([&tr]() { cmd_train(tr); });

  PredictArgs pr;
  auto* c_pr = app.add_subcommand("predict", "label documents with a model");
  c_pr->add_option("--model", pr.model_path, "model file")->required();
  c_pr->add_option("--input", pr.input_path, "corpus JSONL")->required();
  c_pr->add_option("--out", pr.out_path, "predictions TSV")->required();
  c_pr->add_option("--vectorizer", pr.vectorizer_path,
                   "vectorizer file (cbc/cbcnn)");
  c_pr->add_option("--matrix", pr.matrix_path,
                   "association matrix TSV (cbc/cbcnn)");
  c_pr->callback([&pr]() { cmd_predict(pr); });

  EvaluateArgs ev;
  auto* c_ev = app.add_subcommand("evaluate",
                                  "score a model on a labeled test corpus");
  c_ev->add_option("--model", ev.model_path, "model file")->required();
  c_ev->add_option("--test", ev.test_path, "test corpus JSONL")->required();
  c_ev->add_option("--out", ev.out_path, "metrics JSON to write")->required();
  c_ev->add_option("--vectorizer", ev.vectorizer_path,
                   "vectorizer file (cbc/cbcnn)");
  c_ev->add_option("--matrix", ev.matrix_path,
                   "association matrix TSV (cbc/cbcnn)");
  c_ev->callback([&ev]() { cmd_evaluate(ev); });

  CurveArgs cu;
  auto* c_cu = app.add_subcommand(
      "learning-curve",
      "sample/train/evaluate sweep over training sizes (3 samples x 3 runs)");
  c_cu->add_option("--matrix", cu.matrix_path, "association matrix TSV")
      ->required();
  c_cu->add_option("--train", cu.train_path, "full training corpus JSONL")
      ->required();
  c_cu->add_option("--dev", cu.dev_path, "development corpus JSONL")
      ->required();
  c_cu->add_option("--test", cu.test_path, "test corpus JSONL")->required();
  c_cu->add_option("--out-dir", cu.out_dir, "output directory")->required();
  c_cu->add_option("--sizes", cu.sizes, "training sizes, comma separated")
      ->delimiter(',')
      ->required();
  c_cu->add_option("--kinds", cu.kinds,
                   "model kinds to sweep (cbc,cbcnn,cnn,bow_mlp)")
      ->delimiter(',')
      ->capture_default_str();
  c_cu->add_option("--samples", cu.samples, "samples per size")
      ->capture_default_str();
  c_cu->add_option("--runs", cu.runs, "runs per sample")
      ->capture_default_str();
  c_cu->add_option("--seed", cu.seed, "master seed")->capture_default_str();
  c_cu->add_option("--jobs", cu.jobs, "max parallel cells")
      ->capture_default_str();
  add_selection_opts(c_cu, cu.selection);
  // Per-run seeds derive from --seed; the standalone training seed would be
  // a second source of truth here.
  add_train_opts(c_cu, cu.train_opts, /*with_seed=*/false);
  add_cnn_opts(c_cu, cu.cnn_opts);
  c_cu->callback([&cu]() { cmd_learning_curve(cu); });

  MergeArgs mg;
  auto* c_mg = app.add_subcommand(
      "merge-matrix",
      "graft a transposed feature-to-item block into a base matrix");
  c_mg->add_option("--base", mg.fs_path, "base matrix TSV (item-to-feature)")
      ->required();
  c_mg->add_option("--fc-transpose", mg.fc_path,
                   "feature-to-item TSV to transpose in")
      ->required();
  c_mg->add_option("--out", mg.out_path, "merged matrix TSV")->required();
  c_mg->callback([&mg]() { cmd_merge_matrix(mg); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

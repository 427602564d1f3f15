// Acceptance gate: one pass/fail line per criterion. Exit 0 iff all pass.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "cbgen/feature_select.hpp"
#include "cbgen/learning_curve.hpp"
#include "cbgen/metrics.hpp"
#include "cbgen/neural.hpp"
#include "cbgen/rng.hpp"
#include "cbgen/vectorizer.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace cbgen;

namespace {

struct CheckFailure {
  std::string message;
};

void require(bool ok, const std::string& message) {
  if (!ok) throw CheckFailure{message};
}

int g_failures = 0;

void criterion(int index, const std::string& name,
               const std::function<void()>& body) {
  auto start = std::chrono::steady_clock::now();
  std::string error;
  try {
    body();
  } catch (const CheckFailure& f) {
    error = f.message;
  } catch (const std::exception& e) {
    error = e.what();
  }
  double secs = std::chrono::duration<double>(
                    std::chrono::steady_clock::now() - start)
                    .count();
  if (error.empty()) {
    std::printf("[PASS] criterion %d: %s (%.2fs)\n", index, name.c_str(),
                secs);
  } else {
    std::printf("[FAIL] criterion %d: %s (%.2fs) -- %s\n", index,
                name.c_str(), secs, error.c_str());
    ++g_failures;
  }
  std::fflush(stdout);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "missing file " + path);
  return std::string((std::istreambuf_iterator<char>(in)), {});
}

SupportTable random_support_table(Rng& rng) {
  SupportTable t;
  t.feature = FeatureId::parse("C:g");
  int rows = 1 + static_cast<int>(uniform_below(rng, 20));
  for (int i = 0; i < rows; ++i) {
    SupportRow r;
    r.ngram = "n" + std::to_string(i);
    r.weight = 0.25 * (1 + static_cast<int>(uniform_below(rng, 24)));
    r.pos_count = static_cast<long>(uniform_below(rng, 6));
    r.neg_count = static_cast<long>(uniform_below(rng, 6));
    t.rows.push_back(std::move(r));
  }
  std::sort(t.rows.begin(), t.rows.end(),
            [](const SupportRow& a, const SupportRow& b) {
              if (a.weight != b.weight) return a.weight > b.weight;
              return a.ngram < b.ngram;
            });
  return t;
}

double finite_diff_worst_error(const std::vector<Eigen::MatrixXd*>& params,
                               const std::vector<Eigen::MatrixXd>& analytic,
                               const std::function<double()>& loss_fn) {
  const double delta = 1e-5;
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Eigen::MatrixXd& p = *params[i];
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
      for (Eigen::Index c = 0; c < p.cols(); ++c) {
        double orig = p(r, c);
        p(r, c) = orig + delta;
        double up = loss_fn();
        p(r, c) = orig - delta;
        double down = loss_fn();
        p(r, c) = orig;
        double numeric = (up - down) / (2.0 * delta);
        double exact = analytic[i](r, c);
        double denom = std::max(std::abs(numeric) + std::abs(exact), 1e-3);
        worst = std::max(worst, std::abs(numeric - exact) / denom);
      }
    }
  }
  return worst;
}

// Configuration of the end-to-end synthetic sweep (criteria 8 and 9).
CurveConfig sweep_config() {
  CurveConfig cfg;
  cfg.sizes = {40, 2000};
  cfg.kinds = {ModelKind::Cbc, ModelKind::BowMlp, ModelKind::Cnn,
               ModelKind::Cbcnn};
  cfg.samples_per_size = 3;
  cfg.runs_per_sample = 3;
  cfg.master_seed = 96111;
  cfg.mlp.hidden_sizes = {64};
  cfg.mlp.activation = Activation::ReLU;
  cfg.mlp.learning_rate = 0.2;
  cfg.mlp.batch_size = 32;
  cfg.mlp.patience_steps = 240;
  cfg.mlp.eval_every = 20;
  cfg.mlp.max_steps = 1500;
  cfg.cnn.filter_sizes = {2, 3, 4};
  cfg.cnn.filters_per_size = 12;
  cfg.cnn.hidden_size = 48;
  cfg.cnn.embedding_dim = 24;
  cfg.cnn.combine_hidden = 48;
  cfg.cnn.max_seq_len = 32;
  cfg.schedule = {1.0, 0.0};  // per-epoch decay
  return cfg;
}

const CurvePoint& point_of(const CurveReport& report, ModelKind kind,
                           long size) {
  for (const auto& pt : report.points) {
    if (pt.kind == kind && pt.train_size == size) return pt;
  }
  throw CheckFailure{"missing curve point"};
}

}  // namespace

int main() {
  criterion(1, "worked-example golden stats", []() {
    SupportTable t = cbgen::testing::saturn_support_table();
    SupportStats s = support_stats(t, 2.3);
    require(s.support_size == 5, "support size != 5");
    require(s.pos_weight == 9.0, "positive support weight != 9");
    require(s.neg_weight == 2.0, "negative support weight != 2");
    require(std::abs(precision(9, 2) - 9.0 / 11.0) <= 1e-12,
            "precision(9,2) != 9/11");
  });

  criterion(2, "threshold chooser == exhaustive oracle, 10k tables", []() {
    Rng rng(777);
    for (int i = 0; i < 10000; ++i) {
      SupportTable t = random_support_table(rng);
      double got = choose_threshold(t);
      double want = cbgen::testing::brute_force_threshold(t);
      require(got == want, "mismatch on table " + std::to_string(i));
    }
  });

  criterion(3, "score algebra: fixed point and monotonicity", []() {
    Rng rng(778);
    for (int i = 0; i < 1000; ++i) {
      double p = uniform_range(rng, 0.001, 0.999);
      double alpha = uniform_range(rng, 0.01, 20.0);
      double s = score(smoothed_precision(0, 0, p, alpha), p);
      require(std::abs(s) <= 1e-12, "score(prior fixed point) != 0");
    }
    for (int i = 0; i < 1000; ++i) {
      double p = uniform_range(rng, 0.001, 0.99);
      double a = uniform_range(rng, 0.0, 1.0);
      double b = a + uniform_range(rng, 1e-9, 0.5);
      require(score(b, p) > score(a, p), "score not strictly increasing");
    }
  });

  criterion(4, "clipping invariant over 10k random embeddings", []() {
    Rng rng(779);
    int docs_checked = 0;
    while (docs_checked < 10000) {
      std::vector<MatrixRecord> records;
      int vocab = 5 + static_cast<int>(uniform_below(rng, 12));
      int feats = 1 + static_cast<int>(uniform_below(rng, 5));
      for (int w = 0; w < vocab; ++w) {
        for (int f = 0; f < feats; ++f) {
          if (uniform01(rng) < 0.45) continue;
          records.push_back({"tok" + std::to_string(w),
                             FeatureId::parse("C:f" + std::to_string(f)),
                             uniform_range(rng, 0.05, 9.0)});
        }
      }
      if (records.empty()) continue;
      AssociationMatrix m = AssociationMatrix::from_records(records);
      std::vector<ThresholdedFeature> features;
      for (int f = 0; f < feats; ++f) {
        ThresholdedFeature tf;
        tf.feature = FeatureId::parse("C:f" + std::to_string(f));
        tf.threshold = uniform_range(rng, 0.1, 7.0);
        tf.positive_support = {"tok0", "tok1"};
        features.push_back(tf);
      }
      Vectorizer v =
          make_vectorizer(features, {1}, m, uniform01(rng) < 0.5);
      for (int d = 0; d < 50; ++d, ++docs_checked) {
        std::string text;
        int len = static_cast<int>(uniform_below(rng, 14));
        for (int t = 0; t < len; ++t) {
          if (t) text += ' ';
          text += "tok" + std::to_string(uniform_below(rng, vocab + 2));
        }
        for (double entry : embed(v, text, m)) {
          require(entry == 0.0 || entry >= 1.0,
                  "entry outside {0} U [1, inf)");
        }
      }
    }
  });

  criterion(5, "dropout schedule shape and Monte-Carlo rate", []() {
    require(dropout_prob({1.0, 1.0}, 0) == 1.0, "p(0) != 1 exactly");
    require(dropout_prob({3.7, 50.0}, 0) == 1.0, "p(0) != 1 under other C");
    DropoutSchedule s{1.0, 50.0};
    for (long step = 0; step < 2000; ++step) {
      require(dropout_prob(s, step + 1) < dropout_prob(s, step),
              "schedule not strictly decreasing");
    }
    Rng rng(780);
    CbVector v = {0.0, 2.0, 3.5};
    int hidden = 0;
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) {
      if (apply_block_dropout(v, 0.5, rng)[0] == 0.5) ++hidden;
    }
    double fraction = static_cast<double>(hidden) / draws;
    require(fraction >= 0.48 && fraction <= 0.52,
            "hidden fraction " + std::to_string(fraction));
  });

  criterion(6, "gradient checks, 20 random configurations", []() {
    Rng rng(781);
    for (int iter = 0; iter < 10; ++iter) {  // feed-forward nets
      int dim = 2 + static_cast<int>(uniform_below(rng, 6));
      int k = 2 + static_cast<int>(uniform_below(rng, 3));
      int n = 1 + static_cast<int>(uniform_below(rng, 5));
      std::vector<int> hidden = {2 + static_cast<int>(uniform_below(rng, 4))};
      if (uniform01(rng) < 0.4)
        hidden.push_back(2 + static_cast<int>(uniform_below(rng, 3)));
      MlpNet net = make_mlp(dim, hidden, k, Activation::Tanh, rng);
      Eigen::MatrixXd x(dim, n);
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < dim; ++i)
          x(i, j) = uniform01(rng) < 0.4 ? 0.0 : uniform_range(rng, 1.0, 4.0);
      std::vector<int> y(n);
      for (int i = 0; i < n; ++i)
        y[i] = static_cast<int>(uniform_below(rng, k));
      std::vector<Eigen::MatrixXd> grads;
      mlp_loss(net, x, y, &grads);
      double err = finite_diff_worst_error(
          net.params(), grads, [&]() { return mlp_loss(net, x, y); });
      require(err <= 1e-4, "mlp gradient error " + std::to_string(err));
    }
    for (int iter = 0; iter < 10; ++iter) {  // convolutional branch
      CnnConfig cfg;
      cfg.filter_sizes = uniform01(rng) < 0.5 ? std::vector<int>{2, 3}
                                              : std::vector<int>{2, 3, 4};
      cfg.filters_per_size = 2 + static_cast<int>(uniform_below(rng, 2));
      cfg.hidden_size = 2 + static_cast<int>(uniform_below(rng, 3));
      cfg.embedding_dim = 2 + static_cast<int>(uniform_below(rng, 3));
      int vocab = 6 + static_cast<int>(uniform_below(rng, 6));
      int k = 2 + static_cast<int>(uniform_below(rng, 2));
      int n = 1 + static_cast<int>(uniform_below(rng, 3));
      CnnModel net = make_cnn(cfg, vocab, k, Activation::Tanh, rng);
      std::vector<std::vector<int>> seqs(n);
      for (int i = 0; i < n; ++i) {
        int len = 4 + static_cast<int>(uniform_below(rng, 5));
        for (int t = 0; t < len; ++t)
          seqs[i].push_back(static_cast<int>(uniform_below(rng, vocab)));
      }
      std::vector<int> y(n);
      for (int i = 0; i < n; ++i)
        y[i] = static_cast<int>(uniform_below(rng, k));
      std::vector<Eigen::MatrixXd> grads;
      cnn_loss(net, seqs, y, &grads);
      double err = finite_diff_worst_error(
          net.params(), grads, [&]() { return cnn_loss(net, seqs, y); });
      require(err <= 1e-4, "cnn gradient error " + std::to_string(err));
    }
  });

  criterion(7, "metric oracles over 1000 random prediction sets", []() {
    Rng rng(782);
    const std::vector<std::string> pool = {"a", "b", "c", "d", "e", "f"};
    for (int iter = 0; iter < 1000; ++iter) {
      int k = 2 + static_cast<int>(uniform_below(rng, 5));
      std::vector<std::string> labels(pool.begin(), pool.begin() + k);
      int n = 1 + static_cast<int>(uniform_below(rng, 50));
      std::vector<std::string> preds, golds;
      for (int i = 0; i < n; ++i) {
        preds.push_back(labels[uniform_below(rng, k)]);
        golds.push_back(labels[uniform_below(rng, k)]);
      }
      double got = macro_f1(preds, golds, labels);
      double want = cbgen::testing::oracle_macro_f1(preds, golds, labels);
      require(std::abs(got - want) <= 1e-12, "macro-F1 oracle mismatch");
      require(is_degenerate(preds, labels) ==
                  cbgen::testing::oracle_is_degenerate(preds, labels),
              "degeneracy oracle mismatch");
    }
  });

  // Criteria 8 and 9 share the synthetic sweep.
  cbgen::testing::SyntheticSpec spec;  // 4 classes, 5000-row matrix,
  spec.matrix_rows = 5000;             // disjoint train/test lexicons
  cbgen::testing::SyntheticTask task = cbgen::testing::make_synthetic_task(spec);
  CurveConfig cfg = sweep_config();
  std::string dir_a = cbgen::testing::write_temp_dir("acceptance_sweep_a");
  std::string dir_b = cbgen::testing::write_temp_dir("acceptance_sweep_b");
  CurveReport first_report;

  criterion(8, "synthetic learning curve margins", [&]() {
    require(task.matrix.row_count() == 5000, "matrix row count");
    first_report = run_learning_curve(task.train, task.dev, task.test,
                                      task.matrix, cfg);
    write_curve_outputs(first_report, dir_a);
    const CurvePoint& cbc40 = point_of(first_report, ModelKind::Cbc, 40);
    const CurvePoint& bow40 = point_of(first_report, ModelKind::BowMlp, 40);
    const CurvePoint& cbcnn2k =
        point_of(first_report, ModelKind::Cbcnn, 2000);
    const CurvePoint& cnn2k = point_of(first_report, ModelKind::Cnn, 2000);
    require(cbc40.run_count == 9 && bow40.run_count == 9 &&
                cbcnn2k.run_count == 9 && cnn2k.run_count == 9,
            "incomplete runs");
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "cbc@40 %.3f vs bow@40 %.3f; cbcnn@2000 %.3f vs cnn@2000 "
                  "%.3f",
                  cbc40.mean_macro_f1, bow40.mean_macro_f1,
                  cbcnn2k.mean_macro_f1, cnn2k.mean_macro_f1);
    std::printf("       %s\n", buf);
    require(cbc40.mean_macro_f1 >= bow40.mean_macro_f1 + 0.15,
            std::string("margin: ") + buf);
    require(cbcnn2k.mean_macro_f1 >= cnn2k.mean_macro_f1 - 0.02,
            std::string("parity: ") + buf);
  });

  criterion(9, "byte-identical curve.tsv on rerun", [&]() {
    CurveReport second = run_learning_curve(task.train, task.dev, task.test,
                                            task.matrix, cfg);
    write_curve_outputs(second, dir_b);
    require(slurp(dir_a + "/curve.tsv") == slurp(dir_b + "/curve.tsv"),
            "curve.tsv differs between reruns");
    require(slurp(dir_a + "/runs.jsonl") == slurp(dir_b + "/runs.jsonl"),
            "runs.jsonl differs between reruns");
  });

  if (g_failures == 0) {
    std::printf("all criteria passed\n");
    return 0;
  }
  std::printf("%d criterion(s) failed\n", g_failures);
  return 1;
}

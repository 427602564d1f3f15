#include "cbgen/neural.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "cbgen/errors.hpp"
#include "cbgen/metrics.hpp"
#include "cbgen/text.hpp"

namespace cbgen {

using nlohmann::json;

static constexpr int kModelFormatVersion = 1;

// ---------------------------------------------------------------------------
// Schedule and block dropout.

double dropout_prob(const DropoutSchedule& s, long step) {
  if (!(s.C > 0.0)) throw ArgumentError("dropout schedule C must be > 0");
  double scale = s.step_scale > 0.0 ? s.step_scale : 1.0;
  double x = static_cast<double>(step) / scale;
  return 2.0 / (std::exp(s.C * x) + 1.0);
}

CbVector apply_block_dropout(const CbVector& v, double p, Rng& rng) {
  if (p < 0.0 || p > 1.0) throw ArgumentError("dropout p must be in [0, 1]");
  if (uniform01(rng) < p) return CbVector(v.size(), 0.5);
  return v;
}

// ---------------------------------------------------------------------------
// Vocabulary.

Vocab build_vocab(const LabeledCorpus& corpus) {
  Vocab v;
  for (const auto& doc : corpus.docs) {
    for (auto& tok : tokenize(doc.text)) {
      if (v.ids.emplace(tok, v.size()).second) v.tokens.push_back(tok);
    }
  }
  return v;
}

int min_sequence_length(const CnnConfig& cfg) {
  if (cfg.filter_sizes.empty())
    throw ArgumentError("CNN config has no filter sizes");
  return *std::max_element(cfg.filter_sizes.begin(), cfg.filter_sizes.end());
}

std::vector<int> encode_tokens(const Vocab& vocab, const std::string& text,
                               int min_len, int max_len) {
  const int cap = std::max(min_len, max_len);
  std::vector<int> ids;
  for (auto& tok : tokenize(text)) {
    if (static_cast<int>(ids.size()) >= cap) break;
    ids.push_back(vocab.id_of(tok));
  }
  while (static_cast<int>(ids.size()) < min_len) ids.push_back(Vocab::kPad);
  return ids;
}

Eigen::VectorXd bow_counts(const Vocab& vocab, const std::string& text) {
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(vocab.tokens.size());
  for (auto& tok : tokenize(text)) {
    auto it = vocab.ids.find(tok);
    if (it != vocab.ids.end()) counts[it->second - 2] += 1.0;
  }
  return counts;
}

// ---------------------------------------------------------------------------
// Activations and softmax.

static Eigen::MatrixXd activate(Activation a, const Eigen::MatrixXd& z) {
  if (a == Activation::ReLU) return z.cwiseMax(0.0);
  return z.array().tanh().matrix();
}

// Derivative expressed through the activated value.
static Eigen::MatrixXd activate_deriv(Activation a, const Eigen::MatrixXd& v) {
  if (a == Activation::ReLU)
    return (v.array() > 0.0).cast<double>().matrix();
  return (1.0 - v.array().square()).matrix();
}

static double act_deriv_scalar(Activation a, double v) {
  return a == Activation::ReLU ? (v > 0.0 ? 1.0 : 0.0) : 1.0 - v * v;
}

static Eigen::MatrixXd softmax_cols(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd p = logits;
  for (Eigen::Index j = 0; j < p.cols(); ++j) {
    Eigen::VectorXd col = p.col(j);
    double m = col.maxCoeff();
    Eigen::ArrayXd e = (col.array() - m).exp();
    p.col(j) = (e / e.sum()).matrix();
  }
  return p;
}

// Mean cross-entropy; dU (when given) receives (softmax - onehot) / batch.
static double softmax_xent(const Eigen::MatrixXd& logits,
                           const std::vector<int>& y, Eigen::MatrixXd* dU) {
  const Eigen::Index n = logits.cols();
  Eigen::MatrixXd p = softmax_cols(logits);
  double loss = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    loss -= std::log(std::max(p(y[j], j), 1e-300));
  }
  loss /= static_cast<double>(n);
  if (dU) {
    *dU = p / static_cast<double>(n);
    for (Eigen::Index j = 0; j < n; ++j)
      (*dU)(y[j], j) -= 1.0 / static_cast<double>(n);
  }
  return loss;
}

// ---------------------------------------------------------------------------
// Initialization.

static Eigen::MatrixXd glorot(int rows, int cols, Rng& rng) {
  double r = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Eigen::MatrixXd m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = uniform_range(rng, -r, r);
  return m;
}

static Eigen::MatrixXd uniform_init(int rows, int cols, double r, Rng& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = uniform_range(rng, -r, r);
  return m;
}

MlpNet make_mlp(int input_dim, const std::vector<int>& hidden_sizes,
                int num_classes, Activation act, Rng& rng) {
  if (input_dim < 0) throw ArgumentError("negative input dimension");
  if (num_classes < 2) throw ArgumentError("need at least 2 classes");
  MlpNet net;
  net.act = act;
  std::vector<int> dims;
  dims.push_back(input_dim);
  for (int h : hidden_sizes) {
    if (h < 1) throw ArgumentError("hidden layer size must be >= 1");
    dims.push_back(h);
  }
  dims.push_back(num_classes);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    net.weights.push_back(glorot(dims[l + 1], dims[l], rng));
    net.biases.push_back(Eigen::MatrixXd::Zero(dims[l + 1], 1));
  }
  return net;
}

static CnnBranch make_cnn_branch(const CnnConfig& cfg, int vocab_size,
                                 Activation act, Rng& rng) {
  if (cfg.filter_sizes.empty()) throw ArgumentError("no CNN filter sizes");
  for (int k : cfg.filter_sizes)
    if (k < 1) throw ArgumentError("filter size must be >= 1");
  if (cfg.filters_per_size < 1 || cfg.hidden_size < 1 ||
      cfg.embedding_dim < 1) {
    throw ArgumentError("CNN dimensions must be >= 1");
  }
  CnnBranch br;
  br.filter_sizes = cfg.filter_sizes;
  br.act = act;
  br.emb = uniform_init(vocab_size, cfg.embedding_dim, 0.1, rng);
  for (int k : cfg.filter_sizes) {
    br.conv_w.push_back(
        glorot(cfg.filters_per_size, k * cfg.embedding_dim, rng));
    br.conv_b.push_back(Eigen::MatrixXd::Zero(cfg.filters_per_size, 1));
  }
  int total = cfg.filters_per_size * static_cast<int>(cfg.filter_sizes.size());
  br.hid_w = glorot(cfg.hidden_size, total, rng);
  br.hid_b = Eigen::MatrixXd::Zero(cfg.hidden_size, 1);
  return br;
}

CnnModel make_cnn(const CnnConfig& cfg, int vocab_size, int num_classes,
                  Activation act, Rng& rng) {
  if (num_classes < 2) throw ArgumentError("need at least 2 classes");
  CnnModel m;
  m.branch = make_cnn_branch(cfg, vocab_size, act, rng);
  m.out_w = glorot(num_classes, cfg.hidden_size, rng);
  m.out_b = Eigen::MatrixXd::Zero(num_classes, 1);
  return m;
}

CbcnnModel make_cbcnn(const CnnConfig& cfg, int vocab_size, int cb_dim,
                      int num_classes, Activation act, Rng& rng) {
  if (num_classes < 2) throw ArgumentError("need at least 2 classes");
  if (cfg.combine_hidden < 1)
    throw ArgumentError("combine_hidden must be >= 1");
  CbcnnModel m;
  m.act = act;
  m.cnn = make_cnn_branch(cfg, vocab_size, act, rng);
  m.cb_w = glorot(cfg.hidden_size, cb_dim, rng);
  m.cb_b = Eigen::MatrixXd::Zero(cfg.hidden_size, 1);
  m.comb_w = glorot(cfg.combine_hidden, 2 * cfg.hidden_size, rng);
  m.comb_b = Eigen::MatrixXd::Zero(cfg.combine_hidden, 1);
  m.out_w = glorot(num_classes, cfg.combine_hidden, rng);
  m.out_b = Eigen::MatrixXd::Zero(num_classes, 1);
  return m;
}

// ---------------------------------------------------------------------------
// Parameter enumeration. Order is the contract between loss functions,
// the optimizer, serialization, and the finite-difference checks.

std::vector<Eigen::MatrixXd*> MlpNet::params() {
  std::vector<Eigen::MatrixXd*> p;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    p.push_back(&weights[l]);
    p.push_back(&biases[l]);
  }
  return p;
}

std::vector<const Eigen::MatrixXd*> MlpNet::params() const {
  std::vector<const Eigen::MatrixXd*> p;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    p.push_back(&weights[l]);
    p.push_back(&biases[l]);
  }
  return p;
}

int CnnBranch::max_filter_size() const {
  return *std::max_element(filter_sizes.begin(), filter_sizes.end());
}

template <class Model, class Ptr>
static std::vector<Ptr> cnn_params_impl(Model& m) {
  std::vector<Ptr> p;
  p.push_back(&m.branch.emb);
  for (std::size_t s = 0; s < m.branch.conv_w.size(); ++s) {
    p.push_back(&m.branch.conv_w[s]);
    p.push_back(&m.branch.conv_b[s]);
  }
  p.push_back(&m.branch.hid_w);
  p.push_back(&m.branch.hid_b);
  p.push_back(&m.out_w);
  p.push_back(&m.out_b);
  return p;
}

std::vector<Eigen::MatrixXd*> CnnModel::params() {
  return cnn_params_impl<CnnModel, Eigen::MatrixXd*>(*this);
}
std::vector<const Eigen::MatrixXd*> CnnModel::params() const {
  return cnn_params_impl<const CnnModel, const Eigen::MatrixXd*>(*this);
}

template <class Model, class Ptr>
static std::vector<Ptr> cbcnn_params_impl(Model& m) {
  std::vector<Ptr> p;
  p.push_back(&m.cnn.emb);
  for (std::size_t s = 0; s < m.cnn.conv_w.size(); ++s) {
    p.push_back(&m.cnn.conv_w[s]);
    p.push_back(&m.cnn.conv_b[s]);
  }
  p.push_back(&m.cnn.hid_w);
  p.push_back(&m.cnn.hid_b);
  p.push_back(&m.cb_w);
  p.push_back(&m.cb_b);
  p.push_back(&m.comb_w);
  p.push_back(&m.comb_b);
  p.push_back(&m.out_w);
  p.push_back(&m.out_b);
  return p;
}

std::vector<Eigen::MatrixXd*> CbcnnModel::params() {
  return cbcnn_params_impl<CbcnnModel, Eigen::MatrixXd*>(*this);
}
std::vector<const Eigen::MatrixXd*> CbcnnModel::params() const {
  return cbcnn_params_impl<const CbcnnModel, const Eigen::MatrixXd*>(*this);
}

static std::vector<Eigen::MatrixXd> zeros_like(
    const std::vector<const Eigen::MatrixXd*>& params) {
  std::vector<Eigen::MatrixXd> out;
  out.reserve(params.size());
  for (const auto* p : params)
    out.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
  return out;
}

// ---------------------------------------------------------------------------
// MLP forward/backward (whole batch as columns).

Eigen::MatrixXd MlpNet::logits(const Eigen::MatrixXd& X) const {
  Eigen::MatrixXd a = X;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    Eigen::MatrixXd z = (weights[l] * a).colwise() + biases[l].col(0);
    a = (l + 1 == weights.size()) ? z : activate(act, z);
  }
  return a;
}

double mlp_loss(const MlpNet& net, const Eigen::MatrixXd& X,
                const std::vector<int>& y,
                std::vector<Eigen::MatrixXd>* grads) {
  const std::size_t layers = net.weights.size();
  std::vector<Eigen::MatrixXd> acts;  // acts[0] = X, acts[l] post-activation
  acts.reserve(layers + 1);
  acts.push_back(X);
  for (std::size_t l = 0; l < layers; ++l) {
    Eigen::MatrixXd z = (net.weights[l] * acts[l]).colwise() +
                        net.biases[l].col(0);
    acts.push_back(l + 1 == layers ? z : activate(net.act, z));
  }
  Eigen::MatrixXd dU;
  double loss = softmax_xent(acts[layers], y, grads ? &dU : nullptr);
  if (!grads) return loss;

  *grads = zeros_like(static_cast<const MlpNet&>(net).params());
  Eigen::MatrixXd delta = dU;
  for (std::size_t l = layers; l-- > 0;) {
    (*grads)[2 * l] = delta * acts[l].transpose();
    (*grads)[2 * l + 1] = delta.rowwise().sum();
    if (l > 0) {
      delta = (net.weights[l].transpose() * delta)
                  .cwiseProduct(activate_deriv(net.act, acts[l]));
    }
  }
  return loss;
}

// ---------------------------------------------------------------------------
// CNN branch forward/backward (one example at a time).

namespace {

struct BranchForward {
  std::vector<Eigen::MatrixXd> windows;   // per size: (k*e) x positions
  std::vector<Eigen::MatrixXd> conv_act;  // per size: filters x positions
  std::vector<std::vector<int>> argmax;   // per size: filters
  Eigen::VectorXd pooled;
  Eigen::VectorXd hidden;  // post-activation
};

// Gradient slots for one branch, pointing into the grads vector.
struct BranchGradRefs {
  Eigen::MatrixXd* emb;
  std::vector<Eigen::MatrixXd*> conv_w;
  std::vector<Eigen::MatrixXd*> conv_b;
  Eigen::MatrixXd* hid_w;
  Eigen::MatrixXd* hid_b;
};

BranchGradRefs branch_grad_refs(std::vector<Eigen::MatrixXd>& grads,
                                std::size_t num_sizes) {
  BranchGradRefs r;
  r.emb = &grads[0];
  for (std::size_t s = 0; s < num_sizes; ++s) {
    r.conv_w.push_back(&grads[1 + 2 * s]);
    r.conv_b.push_back(&grads[2 + 2 * s]);
  }
  r.hid_w = &grads[1 + 2 * num_sizes];
  r.hid_b = &grads[2 + 2 * num_sizes];
  return r;
}

void branch_forward(const CnnBranch& br, const std::vector<int>& ids,
                    BranchForward& fwd) {
  const int e = static_cast<int>(br.emb.cols());
  const int len = static_cast<int>(ids.size());
  Eigen::MatrixXd x(e, len);
  for (int j = 0; j < len; ++j) x.col(j) = br.emb.row(ids[j]).transpose();

  const std::size_t num_sizes = br.filter_sizes.size();
  const int filters = static_cast<int>(br.conv_w[0].rows());
  fwd.windows.assign(num_sizes, {});
  fwd.conv_act.assign(num_sizes, {});
  fwd.argmax.assign(num_sizes, {});
  fwd.pooled.resize(static_cast<Eigen::Index>(num_sizes) * filters);

  for (std::size_t s = 0; s < num_sizes; ++s) {
    const int k = br.filter_sizes[s];
    const int positions = len - k + 1;
    if (positions < 1) {
      throw ArgumentError("sequence shorter than filter size " +
                          std::to_string(k));
    }
    Eigen::MatrixXd& wnd = fwd.windows[s];
    wnd.resize(k * e, positions);
    for (int p = 0; p < positions; ++p)
      for (int a = 0; a < k; ++a)
        wnd.block(a * e, p, e, 1) = x.col(p + a);
    Eigen::MatrixXd pre = (br.conv_w[s] * wnd).colwise() +
                          br.conv_b[s].col(0);
    fwd.conv_act[s] = activate(br.act, pre);
    fwd.argmax[s].resize(filters);
    for (int f = 0; f < filters; ++f) {
      Eigen::Index best;
      fwd.pooled(static_cast<Eigen::Index>(s) * filters + f) =
          fwd.conv_act[s].row(f).maxCoeff(&best);
      fwd.argmax[s][f] = static_cast<int>(best);
    }
  }
  fwd.hidden = activate(br.act, br.hid_w * fwd.pooled + br.hid_b.col(0));
}

// d_hidden is the gradient at the branch's activated hidden output.
void branch_backward(const CnnBranch& br, const std::vector<int>& ids,
                     const BranchForward& fwd, const Eigen::VectorXd& d_hidden,
                     const BranchGradRefs& g) {
  const int e = static_cast<int>(br.emb.cols());
  const int len = static_cast<int>(ids.size());
  const int filters = static_cast<int>(br.conv_w[0].rows());

  Eigen::VectorXd d_hid_pre =
      d_hidden.cwiseProduct(activate_deriv(br.act, fwd.hidden).col(0));
  *g.hid_w += d_hid_pre * fwd.pooled.transpose();
  *g.hid_b += d_hid_pre;
  Eigen::VectorXd d_pooled = br.hid_w.transpose() * d_hid_pre;

  Eigen::MatrixXd dx = Eigen::MatrixXd::Zero(e, len);
  for (std::size_t s = 0; s < br.filter_sizes.size(); ++s) {
    const int k = br.filter_sizes[s];
    for (int f = 0; f < filters; ++f) {
      const int p = fwd.argmax[s][f];
      const double d_act =
          d_pooled(static_cast<Eigen::Index>(s) * filters + f);
      const double d_pre =
          d_act * act_deriv_scalar(br.act, fwd.conv_act[s](f, p));
      if (d_pre == 0.0) continue;
      g.conv_w[s]->row(f) += d_pre * fwd.windows[s].col(p).transpose();
      (*g.conv_b[s])(f, 0) += d_pre;
      for (int a = 0; a < k; ++a) {
        dx.col(p + a) +=
            d_pre * br.conv_w[s].row(f).segment(a * e, e).transpose();
      }
    }
  }
  for (int j = 0; j < len; ++j) g.emb->row(ids[j]) += dx.col(j).transpose();
}

}  // namespace

double cnn_loss(const CnnModel& net,
                const std::vector<std::vector<int>>& seqs,
                const std::vector<int>& y,
                std::vector<Eigen::MatrixXd>* grads) {
  const std::size_t n = seqs.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  const std::size_t num_sizes = net.branch.filter_sizes.size();
  double loss = 0.0;
  BranchGradRefs refs{};
  std::size_t out_w_idx = 3 + 2 * num_sizes;
  if (grads) {
    *grads = zeros_like(net.params());
    refs = branch_grad_refs(*grads, num_sizes);
  }
  BranchForward fwd;
  for (std::size_t i = 0; i < n; ++i) {
    branch_forward(net.branch, seqs[i], fwd);
    Eigen::VectorXd logits = net.out_w * fwd.hidden + net.out_b.col(0);
    Eigen::MatrixXd du;
    loss += softmax_xent(logits, {y[i]}, grads ? &du : nullptr);
    if (!grads) continue;
    du *= inv_n;  // softmax_xent already averaged over its batch of one
    (*grads)[out_w_idx] += du.col(0) * fwd.hidden.transpose();
    (*grads)[out_w_idx + 1] += du;
    Eigen::VectorXd d_hidden = net.out_w.transpose() * du.col(0);
    branch_backward(net.branch, seqs[i], fwd, d_hidden, refs);
  }
  return loss * inv_n;
}

double cbcnn_loss(const CbcnnModel& net, const Eigen::MatrixXd& X,
                  const std::vector<std::vector<int>>& seqs,
                  const std::vector<int>& y,
                  std::vector<Eigen::MatrixXd>* grads) {
  const std::size_t n = seqs.size();
  if (static_cast<std::size_t>(X.cols()) != n || y.size() != n)
    throw ArgumentError("cbcnn batch size mismatch");
  const double inv_n = 1.0 / static_cast<double>(n);
  const std::size_t num_sizes = net.cnn.filter_sizes.size();
  const int cnn_hidden = net.cnn.hidden_dim();
  double loss = 0.0;
  BranchGradRefs refs{};
  std::size_t base = 3 + 2 * num_sizes;  // index of cb_w in params order
  if (grads) {
    *grads = zeros_like(net.params());
    refs = branch_grad_refs(*grads, num_sizes);
  }
  BranchForward fwd;
  for (std::size_t i = 0; i < n; ++i) {
    branch_forward(net.cnn, seqs[i], fwd);
    Eigen::VectorXd cb_hidden =
        activate(net.act, net.cb_w * X.col(i) + net.cb_b.col(0));
    Eigen::VectorXd joint(cnn_hidden + cb_hidden.size());
    joint << fwd.hidden, cb_hidden;
    Eigen::VectorXd combined =
        activate(net.act, net.comb_w * joint + net.comb_b.col(0));
    Eigen::VectorXd logits = net.out_w * combined + net.out_b.col(0);
    Eigen::MatrixXd du;
    loss += softmax_xent(logits, {y[i]}, grads ? &du : nullptr);
    if (!grads) continue;
    du *= inv_n;
    (*grads)[base + 4] += du.col(0) * combined.transpose();  // out_w
    (*grads)[base + 5] += du;                                // out_b
    Eigen::VectorXd d_combined =
        (net.out_w.transpose() * du.col(0))
            .cwiseProduct(activate_deriv(net.act, combined).col(0));
    (*grads)[base + 2] += d_combined * joint.transpose();  // comb_w
    (*grads)[base + 3] += d_combined;                      // comb_b
    Eigen::VectorXd d_joint = net.comb_w.transpose() * d_combined;
    Eigen::VectorXd d_cb =
        d_joint.tail(cb_hidden.size())
            .cwiseProduct(activate_deriv(net.act, cb_hidden).col(0));
    (*grads)[base] += d_cb * X.col(i).transpose();  // cb_w
    (*grads)[base + 1] += d_cb;                     // cb_b
    branch_backward(net.cnn, seqs[i], fwd, d_joint.head(cnn_hidden), refs);
  }
  return loss * inv_n;
}

// ---------------------------------------------------------------------------
// Training loop.

namespace {

void validate_config(const MlpConfig& cfg) {
  if (cfg.batch_size < 5 || cfg.batch_size > 64)
    throw ArgumentError("batch_size must be in [5, 64]");
  if (cfg.patience_steps < 1) throw ArgumentError("patience must be >= 1");
  if (cfg.eval_every < 1) throw ArgumentError("eval_every must be >= 1");
  if (cfg.max_steps < 1) throw ArgumentError("max_steps must be >= 1");
  if (!(cfg.learning_rate > 0.0))
    throw ArgumentError("learning_rate must be > 0");
  if (cfg.momentum < 0.0 || cfg.momentum >= 1.0)
    throw ArgumentError("momentum must be in [0, 1)");
}

int count_distinct_labels(const std::vector<int>& y, int num_classes) {
  std::set<int> seen;
  for (int v : y) {
    if (v < 0 || v >= num_classes)
      throw ArgumentError("training label index out of range");
    seen.insert(v);
  }
  return static_cast<int>(seen.size());
}

void check_dev_labels(const std::vector<int>& y, int num_classes) {
  for (int v : y) {
    if (v >= num_classes)
      throw ArgumentError("dev label index out of range");
  }
}

void sgd_step(const std::vector<Eigen::MatrixXd*>& params,
              const std::vector<Eigen::MatrixXd>& grads,
              std::vector<Eigen::MatrixXd>& velocity, const MlpConfig& cfg) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (cfg.momentum > 0.0) {
      velocity[i] = cfg.momentum * velocity[i] - cfg.learning_rate * grads[i];
      *params[i] += velocity[i];
    } else {
      *params[i] -= cfg.learning_rate * grads[i];
    }
  }
}

// Epoch-shuffled minibatches, periodic dev checkpoints, early stop after
// patience steps without a strictly better dev macro-F1.
template <class StepFn, class EvalFn, class SnapshotFn, class RestoreFn>
std::vector<TrainLogEntry> train_loop(std::size_t n_train,
                                      const MlpConfig& cfg, Rng& rng,
                                      StepFn&& do_step, EvalFn&& dev_f1,
                                      SnapshotFn&& snapshot,
                                      RestoreFn&& restore) {
  std::vector<TrainLogEntry> log;
  std::vector<std::size_t> order(n_train);
  std::iota(order.begin(), order.end(), 0);
  std::size_t pos = n_train;  // forces a shuffle before the first batch
  const long eval_every = std::min(cfg.eval_every, cfg.patience_steps);
  double best = -1.0;
  long best_step = 0;
  double loss_sum = 0.0;
  long loss_count = 0;
  std::vector<std::size_t> batch;
  for (long step = 0;; ++step) {
    if (step % eval_every == 0 || step >= cfg.max_steps) {
      double f1 = dev_f1();
      log.push_back({step, loss_count ? loss_sum / loss_count : 0.0, f1});
      loss_sum = 0.0;
      loss_count = 0;
      if (f1 > best) {
        best = f1;
        best_step = step;
        snapshot();
      }
      if (step - best_step >= cfg.patience_steps || step >= cfg.max_steps)
        break;
    }
    if (pos >= n_train) {
      shuffle(order, rng);
      pos = 0;
    }
    batch.clear();
    std::size_t take =
        std::min<std::size_t>(cfg.batch_size, n_train - pos);
    for (std::size_t i = 0; i < take; ++i) batch.push_back(order[pos++]);
    loss_sum += do_step(batch, step);
    ++loss_count;
  }
  restore();
  return log;
}

std::vector<long> label_histogram(const std::vector<int>& y,
                                  std::size_t num_classes) {
  std::vector<long> counts(num_classes, 0);
  for (int v : y) ++counts[v];
  return counts;
}

std::vector<int> argmax_cols(const Eigen::MatrixXd& logits) {
  std::vector<int> out(logits.cols());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    Eigen::Index best;
    logits.col(j).maxCoeff(&best);
    out[j] = static_cast<int>(best);
  }
  return out;
}

}  // namespace

static TrainOutput train_dense_mlp(const VectorDataset& train,
                                   const VectorDataset& dev,
                                   const std::vector<std::string>& labels,
                                   const MlpConfig& cfg, ModelKind kind) {
  validate_config(cfg);
  const int k = static_cast<int>(labels.size());
  if (k < 2) throw ArgumentError("need at least 2 labels");
  if (train.inputs.cols() != static_cast<Eigen::Index>(train.labels.size()))
    throw ArgumentError("training inputs/labels size mismatch");
  if (dev.inputs.cols() != static_cast<Eigen::Index>(dev.labels.size()))
    throw ArgumentError("dev inputs/labels size mismatch");
  if (train.inputs.cols() == 0) throw ArgumentError("empty training set");
  if (dev.inputs.cols() == 0) throw ArgumentError("empty dev set");
  if (train.inputs.rows() != dev.inputs.rows())
    throw ArgumentError("train/dev dimension mismatch: " +
                        std::to_string(train.inputs.rows()) + " vs " +
                        std::to_string(dev.inputs.rows()));
  if (count_distinct_labels(train.labels, k) < 2)
    throw ArgumentError("training set has a single class");
  check_dev_labels(dev.labels, k);

  Rng rng(cfg.seed);
  MlpNet net = make_mlp(static_cast<int>(train.inputs.rows()),
                        cfg.hidden_sizes, k, cfg.activation, rng);
  auto velocity = zeros_like(static_cast<const MlpNet&>(net).params());
  MlpNet checkpoint = net;

  auto do_step = [&](const std::vector<std::size_t>& batch, long) {
    Eigen::MatrixXd x(train.inputs.rows(), batch.size());
    std::vector<int> y(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      x.col(i) = train.inputs.col(batch[i]);
      y[i] = train.labels[batch[i]];
    }
    std::vector<Eigen::MatrixXd> grads;
    double loss = mlp_loss(net, x, y, &grads);
    sgd_step(net.params(), grads, velocity, cfg);
    return loss;
  };
  auto dev_eval = [&]() {
    return macro_f1_indexed(argmax_cols(net.logits(dev.inputs)), dev.labels,
                            k);
  };
  auto log = train_loop(
      train.labels.size(), cfg, rng, do_step, dev_eval,
      [&]() { checkpoint = net; }, [&]() { net = checkpoint; });

  TrainOutput out;
  out.model.kind = kind;
  out.model.labels = labels;
  out.model.train_label_counts = label_histogram(train.labels, labels.size());
  out.model.net = std::move(net);
  out.model.mlp_cfg = cfg;
  out.log = std::move(log);
  return out;
}

TrainOutput train_cbc(const VectorDataset& train, const VectorDataset& dev,
                      const std::vector<std::string>& labels,
                      const MlpConfig& cfg,
                      const std::string& vectorizer_fingerprint) {
  TrainOutput out = train_dense_mlp(train, dev, labels, cfg, ModelKind::Cbc);
  out.model.vectorizer_fingerprint = vectorizer_fingerprint;
  return out;
}

TrainOutput train_bow_mlp(const VectorDataset& train, const VectorDataset& dev,
                          const std::vector<std::string>& labels,
                          const MlpConfig& cfg, Vocab vocab) {
  TrainOutput out =
      train_dense_mlp(train, dev, labels, cfg, ModelKind::BowMlp);
  out.model.vocab = std::move(vocab);
  return out;
}

TrainOutput train_cnn(const SequenceDataset& train, const SequenceDataset& dev,
                      const std::vector<std::string>& labels,
                      const MlpConfig& cfg, const CnnConfig& cnn_cfg,
                      Vocab vocab) {
  validate_config(cfg);
  const int k = static_cast<int>(labels.size());
  if (k < 2) throw ArgumentError("need at least 2 labels");
  if (train.sequences.size() != train.labels.size() ||
      dev.sequences.size() != dev.labels.size())
    throw ArgumentError("sequences/labels size mismatch");
  if (train.sequences.empty() || dev.sequences.empty())
    throw ArgumentError("empty train or dev set");
  if (count_distinct_labels(train.labels, k) < 2)
    throw ArgumentError("training set has a single class");
  check_dev_labels(dev.labels, k);

  Rng rng(cfg.seed);
  CnnModel net = make_cnn(cnn_cfg, vocab.size(), k, cfg.activation, rng);
  auto velocity = zeros_like(static_cast<const CnnModel&>(net).params());
  CnnModel checkpoint = net;

  std::vector<std::vector<int>> batch_seqs;
  auto do_step = [&](const std::vector<std::size_t>& batch, long) {
    batch_seqs.clear();
    std::vector<int> y;
    for (std::size_t idx : batch) {
      batch_seqs.push_back(train.sequences[idx]);
      y.push_back(train.labels[idx]);
    }
    std::vector<Eigen::MatrixXd> grads;
    double loss = cnn_loss(net, batch_seqs, y, &grads);
    sgd_step(net.params(), grads, velocity, cfg);
    return loss;
  };
  auto dev_eval = [&]() {
    std::vector<int> preds(dev.sequences.size());
    BranchForward fwd;
    for (std::size_t i = 0; i < dev.sequences.size(); ++i) {
      branch_forward(net.branch, dev.sequences[i], fwd);
      Eigen::VectorXd logits = net.out_w * fwd.hidden + net.out_b.col(0);
      Eigen::Index best;
      logits.maxCoeff(&best);
      preds[i] = static_cast<int>(best);
    }
    return macro_f1_indexed(preds, dev.labels, k);
  };
  auto log = train_loop(
      train.labels.size(), cfg, rng, do_step, dev_eval,
      [&]() { checkpoint = net; }, [&]() { net = checkpoint; });

  TrainOutput out;
  out.model.kind = ModelKind::Cnn;
  out.model.labels = labels;
  out.model.train_label_counts = label_histogram(train.labels, labels.size());
  out.model.net = std::move(net);
  out.model.mlp_cfg = cfg;
  out.model.cnn_cfg = cnn_cfg;
  out.model.vocab = std::move(vocab);
  out.log = std::move(log);
  return out;
}

TrainOutput train_cbcnn(const JointDataset& train, const JointDataset& dev,
                        const std::vector<std::string>& labels,
                        const MlpConfig& cfg, const CnnConfig& cnn_cfg,
                        const DropoutSchedule& schedule, Vocab vocab,
                        const std::string& vectorizer_fingerprint) {
  validate_config(cfg);
  const int k = static_cast<int>(labels.size());
  if (k < 2) throw ArgumentError("need at least 2 labels");
  if (train.inputs.cols() != static_cast<Eigen::Index>(train.labels.size()) ||
      train.sequences.size() != train.labels.size())
    throw ArgumentError("training inputs/sequences/labels size mismatch");
  if (dev.inputs.cols() != static_cast<Eigen::Index>(dev.labels.size()) ||
      dev.sequences.size() != dev.labels.size())
    throw ArgumentError("dev inputs/sequences/labels size mismatch");
  if (train.sequences.empty() || dev.sequences.empty())
    throw ArgumentError("empty train or dev set");
  if (train.inputs.rows() != dev.inputs.rows())
    throw ArgumentError("train/dev CB dimension mismatch");
  if (count_distinct_labels(train.labels, k) < 2)
    throw ArgumentError("training set has a single class");
  check_dev_labels(dev.labels, k);

  DropoutSchedule effective = schedule;
  if (effective.step_scale <= 0.0) {
    effective.step_scale = static_cast<double>(
        (train.labels.size() + cfg.batch_size - 1) / cfg.batch_size);
  }

  Rng rng(cfg.seed);
  CbcnnModel net =
      make_cbcnn(cnn_cfg, vocab.size(), static_cast<int>(train.inputs.rows()),
                 k, cfg.activation, rng);
  auto velocity = zeros_like(static_cast<const CbcnnModel&>(net).params());
  CbcnnModel checkpoint = net;

  std::vector<std::vector<int>> batch_seqs;
  auto do_step = [&](const std::vector<std::size_t>& batch, long step) {
    const double p = dropout_prob(effective, step);
    Eigen::MatrixXd x(train.inputs.rows(), batch.size());
    batch_seqs.clear();
    std::vector<int> y;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      // Hiding is all-or-nothing per example; the constant 0.5 is outside
      // the genuine CB-vector value set.
      if (uniform01(rng) < p) {
        x.col(i).setConstant(0.5);
      } else {
        x.col(i) = train.inputs.col(batch[i]);
      }
      batch_seqs.push_back(train.sequences[batch[i]]);
      y.push_back(train.labels[batch[i]]);
    }
    std::vector<Eigen::MatrixXd> grads;
    double loss = cbcnn_loss(net, x, batch_seqs, y, &grads);
    sgd_step(net.params(), grads, velocity, cfg);
    return loss;
  };
  auto dev_eval = [&]() {
    // Evaluation always sees the true CB-vectors.
    std::vector<int> preds(dev.sequences.size());
    BranchForward fwd;
    for (std::size_t i = 0; i < dev.sequences.size(); ++i) {
      branch_forward(net.cnn, dev.sequences[i], fwd);
      Eigen::VectorXd cb_hidden =
          activate(net.act, net.cb_w * dev.inputs.col(i) + net.cb_b.col(0));
      Eigen::VectorXd joint(fwd.hidden.size() + cb_hidden.size());
      joint << fwd.hidden, cb_hidden;
      Eigen::VectorXd combined =
          activate(net.act, net.comb_w * joint + net.comb_b.col(0));
      Eigen::VectorXd logits = net.out_w * combined + net.out_b.col(0);
      Eigen::Index best;
      logits.maxCoeff(&best);
      preds[i] = static_cast<int>(best);
    }
    return macro_f1_indexed(preds, dev.labels, k);
  };
  auto log = train_loop(
      train.labels.size(), cfg, rng, do_step, dev_eval,
      [&]() { checkpoint = net; }, [&]() { net = checkpoint; });

  TrainOutput out;
  out.model.kind = ModelKind::Cbcnn;
  out.model.labels = labels;
  out.model.train_label_counts = label_histogram(train.labels, labels.size());
  out.model.vectorizer_fingerprint = vectorizer_fingerprint;
  out.model.net = std::move(net);
  out.model.mlp_cfg = cfg;
  out.model.cnn_cfg = cnn_cfg;
  out.model.vocab = std::move(vocab);
  out.log = std::move(log);
  return out;
}

// ---------------------------------------------------------------------------
// Prediction.

static Prediction prediction_from_logits(const Eigen::VectorXd& logits) {
  Eigen::MatrixXd probs = softmax_cols(logits);
  Prediction pred;
  Eigen::Index best;
  probs.col(0).maxCoeff(&best);
  pred.label = static_cast<int>(best);
  pred.probs.assign(probs.col(0).data(), probs.col(0).data() + probs.rows());
  return pred;
}

std::vector<Prediction> predict(const TrainedModel& model,
                                const BatchInput& input) {
  std::vector<Prediction> out;
  if (model.kind == ModelKind::Cbc || model.kind == ModelKind::BowMlp) {
    if (!input.vectors) throw ArgumentError("model needs dense input vectors");
    const auto& net = std::get<MlpNet>(model.net);
    if (input.vectors->rows() != net.input_dim())
      throw ArgumentError("input dimension mismatch: expected " +
                          std::to_string(net.input_dim()) + ", got " +
                          std::to_string(input.vectors->rows()));
    Eigen::MatrixXd logits = net.logits(*input.vectors);
    for (Eigen::Index j = 0; j < logits.cols(); ++j)
      out.push_back(prediction_from_logits(logits.col(j)));
    return out;
  }
  if (model.kind == ModelKind::Cnn) {
    if (!input.sequences) throw ArgumentError("model needs token sequences");
    const auto& net = std::get<CnnModel>(model.net);
    BranchForward fwd;
    for (const auto& seq : *input.sequences) {
      branch_forward(net.branch, seq, fwd);
      out.push_back(prediction_from_logits(net.out_w * fwd.hidden +
                                           net.out_b.col(0)));
    }
    return out;
  }
  // CBCNN
  if (!input.vectors || !input.sequences)
    throw ArgumentError("model needs both vectors and sequences");
  if (input.vectors->cols() !=
      static_cast<Eigen::Index>(input.sequences->size()))
    throw ArgumentError("vectors/sequences count mismatch");
  const auto& net = std::get<CbcnnModel>(model.net);
  if (input.vectors->rows() != net.cb_w.cols())
    throw ArgumentError("CB-vector dimension mismatch");
  BranchForward fwd;
  for (std::size_t i = 0; i < input.sequences->size(); ++i) {
    branch_forward(net.cnn, (*input.sequences)[i], fwd);
    Eigen::VectorXd cb_hidden = activate(
        net.act, net.cb_w * input.vectors->col(i) + net.cb_b.col(0));
    Eigen::VectorXd joint(fwd.hidden.size() + cb_hidden.size());
    joint << fwd.hidden, cb_hidden;
    Eigen::VectorXd combined =
        activate(net.act, net.comb_w * joint + net.comb_b.col(0));
    out.push_back(
        prediction_from_logits(net.out_w * combined + net.out_b.col(0)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization.

const char* model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::Cbc: return "cbc";
    case ModelKind::Cbcnn: return "cbcnn";
    case ModelKind::Cnn: return "cnn";
    case ModelKind::BowMlp: return "bow_mlp";
  }
  return "?";
}

ModelKind model_kind_from_name(const std::string& name) {
  if (name == "cbc") return ModelKind::Cbc;
  if (name == "cbcnn") return ModelKind::Cbcnn;
  if (name == "cnn") return ModelKind::Cnn;
  if (name == "bow_mlp") return ModelKind::BowMlp;
  throw ArgumentError("unknown model kind '" + name + "'");
}

static const char* activation_name(Activation a) {
  return a == Activation::ReLU ? "relu" : "tanh";
}

static Activation activation_from_name(const std::string& s) {
  if (s == "relu") return Activation::ReLU;
  if (s == "tanh") return Activation::Tanh;
  throw ArgumentError("unknown activation '" + s + "'");
}

static json mat_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", rows}};
}

static Eigen::MatrixXd mat_from_json(const json& j) {
  Eigen::MatrixXd m(j.at("rows").get<Eigen::Index>(),
                    j.at("cols").get<Eigen::Index>());
  const auto& data = j.at("data");
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index jj = 0; jj < m.cols(); ++jj)
      m(i, jj) = data.at(i).at(jj).get<double>();
  return m;
}

static json params_to_json(const std::vector<const Eigen::MatrixXd*>& params) {
  json out = json::array();
  for (const auto* p : params) out.push_back(mat_to_json(*p));
  return out;
}

static void params_from_json(const json& j,
                             const std::vector<Eigen::MatrixXd*>& params) {
  if (j.size() != params.size())
    throw ParseError("model file parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i)
    *params[i] = mat_from_json(j.at(i));
}

void save_model(const TrainedModel& model, const std::string& path) {
  json j;
  j["format"] = "cbgen.model";
  j["version"] = kModelFormatVersion;
  j["kind"] = model_kind_name(model.kind);
  j["labels"] = model.labels;
  j["train_label_counts"] = model.train_label_counts;
  j["vectorizer_fingerprint"] = model.vectorizer_fingerprint;
  j["vocab"] = model.vocab.tokens;
  j["mlp_cfg"] = {{"hidden_sizes", model.mlp_cfg.hidden_sizes},
                  {"activation", activation_name(model.mlp_cfg.activation)},
                  {"learning_rate", model.mlp_cfg.learning_rate},
                  {"momentum", model.mlp_cfg.momentum},
                  {"batch_size", model.mlp_cfg.batch_size},
                  {"patience_steps", model.mlp_cfg.patience_steps},
                  {"eval_every", model.mlp_cfg.eval_every},
                  {"max_steps", model.mlp_cfg.max_steps},
                  {"seed", model.mlp_cfg.seed}};
  j["cnn_cfg"] = {{"filter_sizes", model.cnn_cfg.filter_sizes},
                  {"filters_per_size", model.cnn_cfg.filters_per_size},
                  {"hidden_size", model.cnn_cfg.hidden_size},
                  {"embedding_dim", model.cnn_cfg.embedding_dim},
                  {"combine_hidden", model.cnn_cfg.combine_hidden},
                  {"max_seq_len", model.cnn_cfg.max_seq_len}};
  if (model.kind == ModelKind::Cbc || model.kind == ModelKind::BowMlp) {
    const auto& net = std::get<MlpNet>(model.net);
    json dims = json::array();
    dims.push_back(net.input_dim());
    for (std::size_t l = 0; l + 1 < net.weights.size(); ++l)
      dims.push_back(net.weights[l].rows());
    dims.push_back(net.output_dim());
    j["net"] = {{"type", "mlp"},
                {"dims", dims},
                {"activation", activation_name(net.act)},
                {"params", params_to_json(net.params())}};
  } else if (model.kind == ModelKind::Cnn) {
    const auto& net = std::get<CnnModel>(model.net);
    j["net"] = {{"type", "cnn"},
                {"activation", activation_name(net.branch.act)},
                {"params", params_to_json(net.params())}};
  } else {
    const auto& net = std::get<CbcnnModel>(model.net);
    j["net"] = {{"type", "cbcnn"},
                {"activation", activation_name(net.act)},
                {"params", params_to_json(net.params())}};
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open for writing: " + path);
  out << j.dump() << '\n';
  if (!out) throw Error("write failed: " + path);
}

TrainedModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open model file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ParseError("corrupt model file " + path + ": " + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "cbgen.model")
      throw ConfigError("not a model file: " + path);
    int version = j.at("version").get<int>();
    if (version != kModelFormatVersion)
      throw VersionError("model format version " + std::to_string(version) +
                         " unsupported");
    TrainedModel m;
    m.kind = model_kind_from_name(j.at("kind").get<std::string>());
    m.labels = j.at("labels").get<std::vector<std::string>>();
    m.train_label_counts = j.at("train_label_counts").get<std::vector<long>>();
    m.vectorizer_fingerprint = j.at("vectorizer_fingerprint");
    m.vocab.tokens = j.at("vocab").get<std::vector<std::string>>();
    for (std::size_t i = 0; i < m.vocab.tokens.size(); ++i)
      m.vocab.ids[m.vocab.tokens[i]] = static_cast<int>(i) + 2;
    const auto& jm = j.at("mlp_cfg");
    m.mlp_cfg.hidden_sizes = jm.at("hidden_sizes").get<std::vector<int>>();
    m.mlp_cfg.activation = activation_from_name(jm.at("activation"));
    m.mlp_cfg.learning_rate = jm.at("learning_rate").get<double>();
    m.mlp_cfg.momentum = jm.at("momentum").get<double>();
    m.mlp_cfg.batch_size = jm.at("batch_size").get<int>();
    m.mlp_cfg.patience_steps = jm.at("patience_steps").get<int>();
    m.mlp_cfg.eval_every = jm.at("eval_every").get<int>();
    m.mlp_cfg.max_steps = jm.at("max_steps").get<int>();
    m.mlp_cfg.seed = jm.at("seed").get<std::uint64_t>();
    const auto& jc = j.at("cnn_cfg");
    m.cnn_cfg.filter_sizes = jc.at("filter_sizes").get<std::vector<int>>();
    m.cnn_cfg.filters_per_size = jc.at("filters_per_size").get<int>();
    m.cnn_cfg.hidden_size = jc.at("hidden_size").get<int>();
    m.cnn_cfg.embedding_dim = jc.at("embedding_dim").get<int>();
    m.cnn_cfg.combine_hidden = jc.at("combine_hidden").get<int>();
    m.cnn_cfg.max_seq_len = jc.at("max_seq_len").get<int>();
    const auto& jn = j.at("net");
    const std::string type = jn.at("type").get<std::string>();
    Activation act = activation_from_name(jn.at("activation"));
    Rng dummy(0);
    if (type == "mlp") {
      auto dims = jn.at("dims").get<std::vector<int>>();
      if (dims.size() < 2) throw ParseError("bad mlp dims");
      std::vector<int> hidden(dims.begin() + 1, dims.end() - 1);
      MlpNet net = make_mlp(dims.front(), hidden, dims.back(), act, dummy);
      params_from_json(jn.at("params"), net.params());
      m.net = std::move(net);
    } else if (type == "cnn") {
      CnnModel net = make_cnn(m.cnn_cfg, m.vocab.size(),
                              static_cast<int>(m.labels.size()), act, dummy);
      params_from_json(jn.at("params"), net.params());
      m.net = std::move(net);
    } else if (type == "cbcnn") {
      // cb_w column count is recoverable from the stored matrix itself.
      const auto& params = jn.at("params");
      std::size_t base = 3 + 2 * m.cnn_cfg.filter_sizes.size();
      int cb_dim = params.at(base).at("cols").get<int>();
      CbcnnModel net =
          make_cbcnn(m.cnn_cfg, m.vocab.size(), cb_dim,
                     static_cast<int>(m.labels.size()), act, dummy);
      params_from_json(params, net.params());
      m.net = std::move(net);
    } else {
      throw ParseError("unknown net type '" + type + "'");
    }
    return m;
  } catch (const json::exception& e) {
    throw ParseError("invalid model file " + path + ": " + e.what());
  }
}

void save_training_log(const std::vector<TrainLogEntry>& log,
                       const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open for writing: " + path);
  for (const auto& e : log) {
    json j = {{"step", e.step},
              {"train_loss", e.train_loss},
              {"dev_macro_f1", e.dev_macro_f1}};
    out << j.dump() << '\n';
  }
  if (!out) throw Error("write failed: " + path);
}

}  // namespace cbgen

#ifndef CBGEN_NEURAL_HPP
#define CBGEN_NEURAL_HPP

#include <cstdint>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "cbgen/rng.hpp"
#include "cbgen/vectorizer.hpp"

namespace cbgen {

enum class Activation { ReLU, Tanh };

struct MlpConfig {
  std::vector<int> hidden_sizes{200};
  Activation activation = Activation::ReLU;
  double learning_rate = 0.1;
  double momentum = 0.0;
  int batch_size = 16;       // valid range [5, 64]
  int patience_steps = 1000; // stop after this many steps without dev gain
  int eval_every = 20;       // dev evaluation cadence in steps
  int max_steps = 50000;
  std::uint64_t seed = 42;
};

struct CnnConfig {
  std::vector<int> filter_sizes{2, 3, 4, 5, 6};
  int filters_per_size = 50;  // 300 reproduces the full-scale setting
  int hidden_size = 200;
  int embedding_dim = 64;
  int combine_hidden = 200;  // extra layer above the concatenated branches
  int max_seq_len = 256;
};

// Hiding probability p_k = 2 / (exp(C*x) + 1) with x = step / step_scale.
// Starts at exactly 1, decays to 0; smaller C decays slower.
struct DropoutSchedule {
  double C = 1.0;
  double step_scale = 0.0;  // <= 0: use steps-per-epoch, fixed at train time
};

double dropout_prob(const DropoutSchedule& s, long step);

// With probability p replaces every entry by 0.5, else returns the input
// unchanged; all-or-nothing per call. 0.5 is unreachable by genuine
// CB-vectors (their entries are 0 or >= 1), so hiding stays distinguishable.
CbVector apply_block_dropout(const CbVector& v, double p, Rng& rng);

// ---------------------------------------------------------------------------
// Token handling for the CNN branch and the bag-of-words baseline.

struct Vocab {
  static constexpr int kPad = 0;
  static constexpr int kOov = 1;
  std::vector<std::string> tokens;  // token for id i+2
  std::unordered_map<std::string, int> ids;

  int size() const { return static_cast<int>(tokens.size()) + 2; }
  int id_of(const std::string& token) const {
    auto it = ids.find(token);
    return it == ids.end() ? kOov : it->second;
  }
};

// Training-corpus tokens in first appearance order.
Vocab build_vocab(const LabeledCorpus& corpus);

// Shortest sequence the configured convolutions can consume (the widest
// filter); throws on an empty filter list.
int min_sequence_length(const CnnConfig& cfg);

// Token ids, padded with kPad up to min_len, truncated at max_len.
std::vector<int> encode_tokens(const Vocab& vocab, const std::string& text,
                               int min_len, int max_len);

// Occurrence counts over the vocabulary (OOV tokens dropped).
Eigen::VectorXd bow_counts(const Vocab& vocab, const std::string& text);

// ---------------------------------------------------------------------------
// Datasets. Dense inputs are column-major: one example per column. A gold
// label of -1 marks a dev example whose class the model cannot emit.

struct VectorDataset {
  Eigen::MatrixXd inputs;  // dim x n
  std::vector<int> labels;
};

struct SequenceDataset {
  std::vector<std::vector<int>> sequences;
  std::vector<int> labels;
};

struct JointDataset {
  Eigen::MatrixXd inputs;  // CB-vectors, dim x n
  std::vector<std::vector<int>> sequences;
  std::vector<int> labels;
};

// ---------------------------------------------------------------------------
// Networks. Parameters are plain Eigen matrices (biases are n x 1) so the
// optimizer and the finite-difference checks can walk them uniformly.

struct MlpNet {
  std::vector<Eigen::MatrixXd> weights;  // layer l: dims[l+1] x dims[l]
  std::vector<Eigen::MatrixXd> biases;
  Activation act = Activation::ReLU;

  std::vector<Eigen::MatrixXd*> params();
  std::vector<const Eigen::MatrixXd*> params() const;
  Eigen::MatrixXd logits(const Eigen::MatrixXd& X) const;
  int input_dim() const { return static_cast<int>(weights.front().cols()); }
  int output_dim() const { return static_cast<int>(weights.back().rows()); }
};

// Embedding -> parallel convolutions -> max-over-time -> hidden layer.
struct CnnBranch {
  Eigen::MatrixXd emb;                  // vocab x embedding_dim
  std::vector<Eigen::MatrixXd> conv_w;  // per size: filters x (k*emb_dim)
  std::vector<Eigen::MatrixXd> conv_b;  // filters x 1
  Eigen::MatrixXd hid_w;                // hidden x total_filters
  Eigen::MatrixXd hid_b;
  std::vector<int> filter_sizes;
  Activation act = Activation::ReLU;

  int hidden_dim() const { return static_cast<int>(hid_w.rows()); }
  int max_filter_size() const;
};

struct CnnModel {
  CnnBranch branch;
  Eigen::MatrixXd out_w;  // classes x hidden
  Eigen::MatrixXd out_b;

  std::vector<Eigen::MatrixXd*> params();
  std::vector<const Eigen::MatrixXd*> params() const;
};

struct CbcnnModel {
  CnnBranch cnn;
  Eigen::MatrixXd cb_w;  // cb_hidden x cb_dim
  Eigen::MatrixXd cb_b;
  Eigen::MatrixXd comb_w;  // combine x (cnn_hidden + cb_hidden)
  Eigen::MatrixXd comb_b;
  Eigen::MatrixXd out_w;  // classes x combine
  Eigen::MatrixXd out_b;
  Activation act = Activation::ReLU;

  std::vector<Eigen::MatrixXd*> params();
  std::vector<const Eigen::MatrixXd*> params() const;
};

MlpNet make_mlp(int input_dim, const std::vector<int>& hidden_sizes,
                int num_classes, Activation act, Rng& rng);
CnnModel make_cnn(const CnnConfig& cfg, int vocab_size, int num_classes,
                  Activation act, Rng& rng);
CbcnnModel make_cbcnn(const CnnConfig& cfg, int vocab_size, int cb_dim,
                      int num_classes, Activation act, Rng& rng);

// Mean cross-entropy over the batch; `grads` (when non-null) receives
// d loss / d param in params() order. Forward-only calls pass nullptr.
double mlp_loss(const MlpNet& net, const Eigen::MatrixXd& X,
                const std::vector<int>& y,
                std::vector<Eigen::MatrixXd>* grads = nullptr);
double cnn_loss(const CnnModel& net,
                const std::vector<std::vector<int>>& seqs,
                const std::vector<int>& y,
                std::vector<Eigen::MatrixXd>* grads = nullptr);
double cbcnn_loss(const CbcnnModel& net, const Eigen::MatrixXd& X,
                  const std::vector<std::vector<int>>& seqs,
                  const std::vector<int>& y,
                  std::vector<Eigen::MatrixXd>* grads = nullptr);

// ---------------------------------------------------------------------------
// Trained models.

enum class ModelKind { Cbc, Cbcnn, Cnn, BowMlp };

const char* model_kind_name(ModelKind kind);
ModelKind model_kind_from_name(const std::string& name);

struct TrainedModel {
  ModelKind kind = ModelKind::Cbc;
  std::vector<std::string> labels;       // output order
  std::vector<long> train_label_counts;  // aligned with labels
  std::string vectorizer_fingerprint;    // cbc / cbcnn only
  Vocab vocab;                           // cnn / cbcnn / bow_mlp only
  std::variant<MlpNet, CnnModel, CbcnnModel> net;
  MlpConfig mlp_cfg;
  CnnConfig cnn_cfg;
};

struct TrainLogEntry {
  long step = 0;
  double train_loss = 0.0;  // mean over steps since the previous entry
  double dev_macro_f1 = 0.0;
};

struct TrainOutput {
  TrainedModel model;
  std::vector<TrainLogEntry> log;
};

// All trainers: SGD on mean cross-entropy, dev macro-F1 checkpointing,
// stop after cfg.patience_steps without strict improvement, deterministic
// for a fixed seed. Training requires >= 2 distinct labels.
TrainOutput train_cbc(const VectorDataset& train, const VectorDataset& dev,
                      const std::vector<std::string>& labels,
                      const MlpConfig& cfg,
                      const std::string& vectorizer_fingerprint = "");

TrainOutput train_bow_mlp(const VectorDataset& train, const VectorDataset& dev,
                          const std::vector<std::string>& labels,
                          const MlpConfig& cfg, Vocab vocab);

TrainOutput train_cnn(const SequenceDataset& train, const SequenceDataset& dev,
                      const std::vector<std::string>& labels,
                      const MlpConfig& cfg, const CnnConfig& cnn_cfg,
                      Vocab vocab);

// The joint model: CB branch hidden layer and CNN branch hidden layer
// concatenated under one extra hidden layer. Scheduled block dropout hides
// the CB-vector during training only.
TrainOutput train_cbcnn(const JointDataset& train, const JointDataset& dev,
                        const std::vector<std::string>& labels,
                        const MlpConfig& cfg, const CnnConfig& cnn_cfg,
                        const DropoutSchedule& schedule, Vocab vocab,
                        const std::string& vectorizer_fingerprint = "");

struct BatchInput {
  const Eigen::MatrixXd* vectors = nullptr;  // dim x n
  const std::vector<std::vector<int>>* sequences = nullptr;
};

struct Prediction {
  int label = 0;
  std::vector<double> probs;
};

std::vector<Prediction> predict(const TrainedModel& model,
                                const BatchInput& input);

void save_model(const TrainedModel& model, const std::string& path);
TrainedModel load_model(const std::string& path);

void save_training_log(const std::vector<TrainLogEntry>& log,
                       const std::string& path);

}  // namespace cbgen

#endif  // CBGEN_NEURAL_HPP

#pragma once
// Bidirectional transformer encoder with masked-token and regression
// heads, AdamW with linear warmup, layer freezing, and the two training
// loops (masked-token pre-training, K-fold regression fine-tuning).

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "hea/chem.hpp"
#include "hea/evaluate.hpp"
#include "hea/featurize.hpp"
#include "hea/numerics.hpp"
#include "hea/tokenize.hpp"

namespace hea {

struct EncoderConfig {
    int n_layers = 4;
    int n_heads = 4;
    int d_model = 64;
    int d_ff = 256;
    int max_len = 64;
    int vocab_size = 0;
    double mask_prob = 0.15;
    std::uint64_t seed = 0;

    int d_k() const { return d_model / n_heads; }
    void validate() const;
};

struct TrainConfig {
    double learning_rate = 6e-5;
    double weight_decay = 0.02;
    /// 1-based layer indices receiving decoupled weight decay; empty means
    /// the default last three layers.
    std::set<int> decayed_layers;
    double warmup_fraction = 0.1;
    int epochs = 10;
    int batch_size = 16;
    double grad_clip = 1.0;
    std::uint64_t seed = 0;
};

struct NamedParam {
    std::string name;
    nn::Var var;
    int layer;  // 1-based encoder layer; 0 for embeddings and heads
};

struct LayerParams {
    nn::Var w_q, w_k, w_v, w_o;          // d x d
    nn::Var w1, b1, w2, b2;              // FFN
    nn::Var ln1_gamma, ln1_beta;         // after attention residual
    nn::Var ln2_gamma, ln2_beta;         // after FFN residual
    bool trainable = true;
};

struct EncoderState {
    EncoderConfig cfg;
    nn::Var token_embedding;       // |V| x d
    nn::Var positional_embedding;  // L x d
    nn::Var segment_embedding;     // 1 x d, constant across positions
    std::vector<LayerParams> layers;
    nn::Var w_mlm, b_mlm;          // d x |V|, 1 x |V|
    nn::Var w_reg, b_reg;          // d x 1, 1 x 1

    static EncoderState init(const EncoderConfig& cfg);
    EncoderState clone() const;
    std::vector<NamedParam> named_params() const;
    std::vector<NamedParam> trainable_params() const;
};

/// Per-layer, per-head attention matrices from the latest forward pass.
using AttentionRecord = std::vector<std::vector<nn::Tensor>>;

struct ForwardResult {
    nn::Var hidden;  // L x d final hidden states
    AttentionRecord attention;
};

nn::Var embed(const TokenSequence& seq, const EncoderState& s);

ForwardResult encoder_forward(const EncoderState& s, const TokenSequence& seq,
                              bool record_attention = false);

/// Cross-entropy averaged over all masked positions in the batch.
nn::Var mlm_loss(const EncoderState& s, const std::vector<MaskedSequence>& batch);

/// Linear head over the [CLS] final hidden state; standardized units.
nn::Var regression_forward(const EncoderState& s, const TokenSequence& seq,
                           AttentionRecord* attention = nullptr);

/// Linear 0 -> eta over the warmup steps, then linear eta -> 0 at
/// total_steps. 1 <= t <= total_steps.
double lr_at(int t, int total_steps, const TrainConfig& cfg);

class AdamW {
public:
    AdamW(std::vector<NamedParam> params, const TrainConfig& cfg,
          int total_steps, int n_layers);

    /// Clips the global gradient norm, then applies one update at the
    /// scheduled learning rate. Call after backward(); caller zeroes grads.
    void step();

    int current_step() const { return t_; }

private:
    std::vector<NamedParam> params_;
    TrainConfig cfg_;
    int total_steps_;
    std::set<int> decayed_;
    std::vector<nn::Tensor> m_, v_;
    int t_ = 0;
};

struct EpochLoss {
    double train = 0, val = 0;
};

struct PretrainResult {
    EncoderState best_state;
    std::vector<EpochLoss> history;
    double best_val = 0;
    int best_epoch = -1;
};

PretrainResult pretrain(const std::vector<std::string>& texts,
                        const Vocabulary& vocab, const EncoderConfig& cfg,
                        const TrainConfig& tcfg);

struct DatasetRow {
    Composition composition;
    std::optional<std::array<double, kNumFeatures>> features;
    double target = 0;
};

struct RegressionModel {
    EncoderState state;
    Vocabulary vocab;
    bool use_features = true;
    ScalerParams feature_scaler;  // empty when use_features is false
    double target_mu = 0, target_sigma = 1;
};

struct FinetuneOptions {
    /// 1-based encoder layers that stay trainable; nullopt = all layers.
    std::optional<std::set<int>> layer_selection;
    bool use_features = true;
    int folds = 5;
};

struct FinetuneResult {
    RegressionModel model;  // best-validation fold's model
    std::vector<FoldReport> fold_reports;
};

FinetuneResult finetune(const std::vector<DatasetRow>& rows,
                        const std::optional<RegressionModel>& pretrained,
                        const FinetuneOptions& opts, const EncoderConfig& cfg,
                        const TrainConfig& tcfg);

std::vector<double> predict(const RegressionModel& model,
                            const std::vector<DatasetRow>& rows);

TokenSequence encode_row(const RegressionModel& model, const DatasetRow& row);

// Model artifact: magic, format version, EncoderConfig, scaler, vocabulary
// hash, then named parameter blocks as little-endian 64-bit floats.
void save_model(const std::string& path, const RegressionModel& model);
RegressionModel load_model(const std::string& path, const Vocabulary& vocab);

}  // namespace hea

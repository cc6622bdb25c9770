#include "hea/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "hea/rng.hpp"

namespace hea {

using nn::Tensor;
using nn::Var;

void EncoderConfig::validate() const {
    if (n_layers < 1 || n_heads < 1 || d_model < 1 || d_ff < 1 || max_len < 2 ||
        vocab_size < kNumReserved)
        throw std::invalid_argument("EncoderConfig: all dimensions must be positive"
                                    " and vocab_size must cover reserved tokens");
    if (d_model % n_heads != 0)
        throw std::invalid_argument("EncoderConfig: d_model must be divisible by n_heads");
    if (mask_prob < 0 || mask_prob > 1)
        throw std::invalid_argument("EncoderConfig: mask_prob must lie in [0,1]");
}

namespace {

Tensor normal_init(std::size_t rows, std::size_t cols, std::mt19937_64& rng,
                   double stddev = 0.02) {
    Tensor t(rows, cols);
    std::normal_distribution<double> dist(0.0, stddev);
    for (double& v : t.v) v = dist(rng);
    return t;
}

Var clone_param(const Var& p) {
    Var c = nn::param(p->val);
    return c;
}

}  // namespace

EncoderState EncoderState::init(const EncoderConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng = substream(cfg.seed, "init");
    const auto V = static_cast<std::size_t>(cfg.vocab_size);
    const auto d = static_cast<std::size_t>(cfg.d_model);
    const auto dff = static_cast<std::size_t>(cfg.d_ff);
    const auto L = static_cast<std::size_t>(cfg.max_len);

    EncoderState s;
    s.cfg = cfg;
    s.token_embedding = nn::param(normal_init(V, d, rng));
    s.positional_embedding = nn::param(normal_init(L, d, rng));
    s.segment_embedding = nn::param(normal_init(1, d, rng));
    for (int l = 0; l < cfg.n_layers; ++l) {
        LayerParams lp;
        lp.w_q = nn::param(normal_init(d, d, rng));
        lp.w_k = nn::param(normal_init(d, d, rng));
        lp.w_v = nn::param(normal_init(d, d, rng));
        lp.w_o = nn::param(normal_init(d, d, rng));
        lp.w1 = nn::param(normal_init(d, dff, rng));
        lp.b1 = nn::param(Tensor(1, dff, 0.0));
        lp.w2 = nn::param(normal_init(dff, d, rng));
        lp.b2 = nn::param(Tensor(1, d, 0.0));
        lp.ln1_gamma = nn::param(Tensor(1, d, 1.0));
        lp.ln1_beta = nn::param(Tensor(1, d, 0.0));
        lp.ln2_gamma = nn::param(Tensor(1, d, 1.0));
        lp.ln2_beta = nn::param(Tensor(1, d, 0.0));
        s.layers.push_back(std::move(lp));
    }
    s.w_mlm = nn::param(normal_init(d, V, rng));
    s.b_mlm = nn::param(Tensor(1, V, 0.0));
    s.w_reg = nn::param(normal_init(d, 1, rng));
    s.b_reg = nn::param(Tensor(1, 1, 0.0));
    return s;
}

EncoderState EncoderState::clone() const {
    EncoderState s;
    s.cfg = cfg;
    s.token_embedding = clone_param(token_embedding);
    s.positional_embedding = clone_param(positional_embedding);
    s.segment_embedding = clone_param(segment_embedding);
    for (const auto& lp : layers) {
        LayerParams c;
        c.w_q = clone_param(lp.w_q);
        c.w_k = clone_param(lp.w_k);
        c.w_v = clone_param(lp.w_v);
        c.w_o = clone_param(lp.w_o);
        c.w1 = clone_param(lp.w1);
        c.b1 = clone_param(lp.b1);
        c.w2 = clone_param(lp.w2);
        c.b2 = clone_param(lp.b2);
        c.ln1_gamma = clone_param(lp.ln1_gamma);
        c.ln1_beta = clone_param(lp.ln1_beta);
        c.ln2_gamma = clone_param(lp.ln2_gamma);
        c.ln2_beta = clone_param(lp.ln2_beta);
        c.trainable = lp.trainable;
        s.layers.push_back(std::move(c));
    }
    s.w_mlm = clone_param(w_mlm);
    s.b_mlm = clone_param(b_mlm);
    s.w_reg = clone_param(w_reg);
    s.b_reg = clone_param(b_reg);
    return s;
}

std::vector<NamedParam> EncoderState::named_params() const {
    std::vector<NamedParam> out;
    out.push_back({"token_embedding", token_embedding, 0});
    out.push_back({"positional_embedding", positional_embedding, 0});
    out.push_back({"segment_embedding", segment_embedding, 0});
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& lp = layers[l];
        std::string prefix = "layer" + std::to_string(l + 1) + ".";
        int li = static_cast<int>(l + 1);
        out.push_back({prefix + "w_q", lp.w_q, li});
        out.push_back({prefix + "w_k", lp.w_k, li});
        out.push_back({prefix + "w_v", lp.w_v, li});
        out.push_back({prefix + "w_o", lp.w_o, li});
        out.push_back({prefix + "w1", lp.w1, li});
        out.push_back({prefix + "b1", lp.b1, li});
        out.push_back({prefix + "w2", lp.w2, li});
        out.push_back({prefix + "b2", lp.b2, li});
        out.push_back({prefix + "ln1_gamma", lp.ln1_gamma, li});
        out.push_back({prefix + "ln1_beta", lp.ln1_beta, li});
        out.push_back({prefix + "ln2_gamma", lp.ln2_gamma, li});
        out.push_back({prefix + "ln2_beta", lp.ln2_beta, li});
    }
    out.push_back({"w_mlm", w_mlm, 0});
    out.push_back({"b_mlm", b_mlm, 0});
    out.push_back({"w_reg", w_reg, 0});
    out.push_back({"b_reg", b_reg, 0});
    return out;
}

std::vector<NamedParam> EncoderState::trainable_params() const {
    std::vector<NamedParam> out;
    for (auto& p : named_params()) {
        if (p.layer == 0 ||
            layers[static_cast<std::size_t>(p.layer - 1)].trainable)
            out.push_back(p);
    }
    return out;
}

nn::Var embed(const TokenSequence& seq, const EncoderState& s) {
    for (int id : seq.ids)
        if (id < 0 || id >= s.cfg.vocab_size)
            throw std::out_of_range("embed: token id " + std::to_string(id) +
                                    " outside vocabulary of size " +
                                    std::to_string(s.cfg.vocab_size));
    Var tok = nn::gather_rows(s.token_embedding, seq.ids);
    Var pos = nn::slice_rows(s.positional_embedding, 0, seq.ids.size());
    Var seg = nn::broadcast_row(s.segment_embedding, seq.ids.size());
    return nn::add(nn::add(tok, pos), seg);
}

namespace {

struct LayerOut {
    Var hidden;
    std::vector<Var> head_attention;
};

LayerOut run_layer(const Var& h, const LayerParams& lp,
                   const std::vector<int>& mask, int n_heads) {
    const std::size_t d = h->val.cols;
    const std::size_t dk = d / static_cast<std::size_t>(n_heads);
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));

    Var q = nn::matmul(h, lp.w_q);
    Var k = nn::matmul(h, lp.w_k);
    Var v = nn::matmul(h, lp.w_v);

    std::vector<Var> heads, alphas;
    for (int hd = 0; hd < n_heads; ++hd) {
        std::size_t c0 = static_cast<std::size_t>(hd) * dk, c1 = c0 + dk;
        Var qh = nn::slice_cols(q, c0, c1);
        Var kh = nn::slice_cols(k, c0, c1);
        Var vh = nn::slice_cols(v, c0, c1);
        Var scores = nn::scale(nn::matmul(qh, nn::transpose(kh)), inv_sqrt_dk);
        Var alpha = nn::softmax_rows(scores, mask);
        alphas.push_back(alpha);
        heads.push_back(nn::matmul(alpha, vh));
    }
    Var z = nn::matmul(nn::concat_cols(heads), lp.w_o);
    Var h1 = nn::layer_norm(nn::add(h, z), lp.ln1_gamma, lp.ln1_beta);
    Var f = nn::add_rowvec(
        nn::matmul(nn::gelu(nn::add_rowvec(nn::matmul(h1, lp.w1), lp.b1)),
                   lp.w2),
        lp.b2);
    Var h2 = nn::layer_norm(nn::add(h1, f), lp.ln2_gamma, lp.ln2_beta);
    return {h2, std::move(alphas)};
}

}  // namespace

ForwardResult encoder_forward(const EncoderState& s, const TokenSequence& seq,
                              bool record_attention) {
    ForwardResult r;
    Var h = embed(seq, s);
    for (const auto& lp : s.layers) {
        LayerOut out = run_layer(h, lp, seq.attention_mask, s.cfg.n_heads);
        h = out.hidden;
        if (record_attention) {
            std::vector<Tensor> layer_attn;
            for (const auto& a : out.head_attention)
                layer_attn.push_back(a->val);
            r.attention.push_back(std::move(layer_attn));
        }
    }
    r.hidden = h;
    return r;
}

nn::Var mlm_loss(const EncoderState& s,
                 const std::vector<MaskedSequence>& batch) {
    std::size_t total_positions = 0;
    Var acc;
    for (const auto& ms : batch) {
        if (ms.labels.empty())
            throw std::invalid_argument(
                "mlm_loss: sequence with zero masked positions");
        ForwardResult fw = encoder_forward(s, ms.seq);
        Var logits = nn::add_rowvec(nn::matmul(fw.hidden, s.w_mlm), s.b_mlm);
        std::vector<std::size_t> positions;
        std::vector<int> targets;
        for (const auto& [pos, id] : ms.labels) {
            positions.push_back(static_cast<std::size_t>(pos));
            targets.push_back(id);
        }
        Var ce = nn::cross_entropy(logits, targets, positions);
        Var weighted = nn::scale(ce, static_cast<double>(positions.size()));
        acc = acc ? nn::add(acc, weighted) : weighted;
        total_positions += positions.size();
    }
    if (total_positions == 0)
        throw std::invalid_argument("mlm_loss: batch with zero masked positions");
    return nn::scale(acc, 1.0 / static_cast<double>(total_positions));
}

nn::Var regression_forward(const EncoderState& s, const TokenSequence& seq,
                           AttentionRecord* attention) {
    ForwardResult fw = encoder_forward(s, seq, attention != nullptr);
    if (attention) *attention = std::move(fw.attention);
    Var cls = nn::slice_rows(fw.hidden, 0, 1);
    return nn::add(nn::matmul(cls, s.w_reg), s.b_reg);
}

double lr_at(int t, int total_steps, const TrainConfig& cfg) {
    if (t < 1 || t > total_steps)
        throw std::out_of_range("lr_at: step " + std::to_string(t) +
                                " outside [1," + std::to_string(total_steps) +
                                "]");
    int warmup = static_cast<int>(cfg.warmup_fraction *
                                  static_cast<double>(total_steps));
    if (warmup > 0 && t <= warmup)
        return cfg.learning_rate * static_cast<double>(t) /
               static_cast<double>(warmup);
    if (t == total_steps) return 0.0;
    return cfg.learning_rate * static_cast<double>(total_steps - t) /
           static_cast<double>(total_steps - warmup);
}

AdamW::AdamW(std::vector<NamedParam> params, const TrainConfig& cfg,
             int total_steps, int n_layers)
    : params_(std::move(params)), cfg_(cfg), total_steps_(total_steps) {
    decayed_ = cfg.decayed_layers;
    if (decayed_.empty())
        for (int l = std::max(1, n_layers - 2); l <= n_layers; ++l)
            decayed_.insert(l);
    for (const auto& p : params_) {
        m_.emplace_back(p.var->val.rows, p.var->val.cols, 0.0);
        v_.emplace_back(p.var->val.rows, p.var->val.cols, 0.0);
    }
}

void AdamW::step() {
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    ++t_;
    double lr = lr_at(t_, total_steps_, cfg_);

    double sq_norm = 0;
    for (const auto& p : params_) {
        p.var->ensure_grad();
        for (double g : p.var->grad.v) {
            if (!std::isfinite(g))
                throw std::runtime_error("AdamW: non-finite gradient in '" +
                                         p.name + "'");
            sq_norm += g * g;
        }
    }
    double norm = std::sqrt(sq_norm);
    double clip_scale =
        (cfg_.grad_clip > 0 && norm > cfg_.grad_clip) ? cfg_.grad_clip / norm
                                                      : 1.0;

    double bc1 = 1.0 - std::pow(beta1, t_);
    double bc2 = 1.0 - std::pow(beta2, t_);
    for (std::size_t i = 0; i < params_.size(); ++i) {
        auto& p = params_[i];
        bool decay = cfg_.weight_decay > 0 && decayed_.count(p.layer) > 0;
        for (std::size_t j = 0; j < p.var->val.v.size(); ++j) {
            double g = p.var->grad.v[j] * clip_scale;
            m_[i].v[j] = beta1 * m_[i].v[j] + (1.0 - beta1) * g;
            v_[i].v[j] = beta2 * v_[i].v[j] + (1.0 - beta2) * g * g;
            double mhat = m_[i].v[j] / bc1;
            double vhat = v_[i].v[j] / bc2;
            double upd = lr * mhat / (std::sqrt(vhat) + eps);
            if (decay) upd += lr * cfg_.weight_decay * p.var->val.v[j];
            p.var->val.v[j] -= upd;
        }
    }
}

namespace {

MaskedSequence mask_with_retry(const TokenSequence& seq, double mask_prob,
                               std::mt19937_64& rng) {
    bool has_maskable = false;
    for (std::size_t i = 0; i < seq.ids.size(); ++i)
        if (seq.attention_mask[i] && seq.ids[i] >= kNumReserved)
            has_maskable = true;
    if (!has_maskable)
        throw std::runtime_error(
            "cannot mask a sequence with no maskable tokens");
    for (int attempt = 0; attempt < 1000; ++attempt) {
        MaskedSequence ms = mask_tokens(seq, mask_prob, rng);
        if (!ms.labels.empty()) return ms;
    }
    throw std::runtime_error(
        "masking failed to hit any position after 1000 resamples (mask_prob "
        "too small?)");
}

double eval_mlm(const EncoderState& s,
                const std::vector<TokenSequence>& seqs,
                const std::vector<std::size_t>& indices, double mask_prob,
                std::mt19937_64 rng, int batch_size) {
    double total_loss = 0;
    std::size_t total_positions = 0;
    std::vector<MaskedSequence> batch;
    auto flush = [&] {
        if (batch.empty()) return;
        std::size_t n = 0;
        for (const auto& ms : batch) n += ms.labels.size();
        Var loss = mlm_loss(s, batch);
        total_loss += loss->val.v[0] * static_cast<double>(n);
        total_positions += n;
        batch.clear();
    };
    for (std::size_t idx : indices) {
        batch.push_back(mask_with_retry(seqs[idx], mask_prob, rng));
        if (static_cast<int>(batch.size()) >= batch_size) flush();
    }
    flush();
    return total_loss / static_cast<double>(total_positions);
}

}  // namespace

PretrainResult pretrain(const std::vector<std::string>& texts,
                        const Vocabulary& vocab, const EncoderConfig& cfg_in,
                        const TrainConfig& tcfg) {
    EncoderConfig cfg = cfg_in;
    cfg.vocab_size = static_cast<int>(vocab.size());
    cfg.validate();
    if (cfg.mask_prob <= 0)
        throw std::invalid_argument("pretrain: mask_prob must be > 0");
    if (texts.size() < 2)
        throw std::invalid_argument("pretrain: corpus smaller than one batch");

    std::vector<TokenSequence> seqs;
    seqs.reserve(texts.size());
    for (const auto& t : texts) seqs.push_back(encode(t, vocab, cfg.max_len));

    // 80/20 split by seeded shuffle.
    std::vector<std::size_t> idx(texts.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 split_rng = substream(tcfg.seed, "split");
    std::shuffle(idx.begin(), idx.end(), split_rng);
    std::size_t n_val = std::max<std::size_t>(1, texts.size() / 5);
    std::vector<std::size_t> val_idx(idx.begin(),
                                     idx.begin() + static_cast<long>(n_val));
    std::vector<std::size_t> train_idx(idx.begin() + static_cast<long>(n_val),
                                       idx.end());
    if (train_idx.empty())
        throw std::invalid_argument("pretrain: corpus smaller than one batch");

    EncoderState state = EncoderState::init(cfg);
    auto params = state.named_params();
    int steps_per_epoch = static_cast<int>(
        (train_idx.size() + static_cast<std::size_t>(tcfg.batch_size) - 1) /
        static_cast<std::size_t>(tcfg.batch_size));
    AdamW opt(params, tcfg, tcfg.epochs * steps_per_epoch, cfg.n_layers);

    PretrainResult result;
    std::vector<Var> param_vars;
    for (const auto& p : params) param_vars.push_back(p.var);

    for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
        std::mt19937_64 shuffle_rng =
            substream(tcfg.seed, "shuffle", static_cast<std::uint64_t>(epoch));
        std::shuffle(train_idx.begin(), train_idx.end(), shuffle_rng);
        std::mt19937_64 mask_rng =
            substream(tcfg.seed, "mask", static_cast<std::uint64_t>(epoch));

        double epoch_loss = 0;
        std::size_t epoch_positions = 0;
        std::vector<MaskedSequence> batch;
        auto train_flush = [&] {
            if (batch.empty()) return;
            std::size_t n = 0;
            for (const auto& ms : batch) n += ms.labels.size();
            nn::zero_grad(param_vars);
            Var loss = mlm_loss(state, batch);
            nn::backward(loss);
            opt.step();
            epoch_loss += loss->val.v[0] * static_cast<double>(n);
            epoch_positions += n;
            batch.clear();
        };
        for (std::size_t i : train_idx) {
            batch.push_back(mask_with_retry(seqs[i], cfg.mask_prob, mask_rng));
            if (static_cast<int>(batch.size()) >= tcfg.batch_size)
                train_flush();
        }
        train_flush();

        double val_loss = eval_mlm(
            state, seqs, val_idx, cfg.mask_prob,
            substream(tcfg.seed, "mask_val", static_cast<std::uint64_t>(epoch)),
            tcfg.batch_size);
        result.history.push_back(
            {epoch_loss / static_cast<double>(epoch_positions), val_loss});
        if (result.best_epoch < 0 || val_loss < result.best_val) {
            result.best_val = val_loss;
            result.best_epoch = epoch;
            result.best_state = state.clone();
        }
    }
    return result;
}

TokenSequence encode_row(const RegressionModel& model, const DatasetRow& row) {
    std::string text;
    if (model.use_features) {
        if (!row.features)
            throw std::invalid_argument(
                "row '" + canonical_string(row.composition) +
                "' lacks feature values required by a features-mode model");
        std::vector<double> scaled(kNumFeatures);
        for (int j = 0; j < kNumFeatures; ++j)
            scaled[static_cast<std::size_t>(j)] = apply_scaler1(
                model.feature_scaler, static_cast<std::size_t>(j),
                (*row.features)[static_cast<std::size_t>(j)]);
        text = compose_input(row.composition, scaled);
    } else {
        text = canonical_string(row.composition);
    }
    return encode(text, model.vocab, model.state.cfg.max_len);
}

std::vector<double> predict(const RegressionModel& model,
                            const std::vector<DatasetRow>& rows) {
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& row : rows) {
        TokenSequence seq = encode_row(model, row);
        Var y = regression_forward(model.state, seq);
        out.push_back(y->val.v[0] * model.target_sigma + model.target_mu);
    }
    return out;
}

FinetuneResult finetune(const std::vector<DatasetRow>& rows,
                        const std::optional<RegressionModel>& pretrained,
                        const FinetuneOptions& opts, const EncoderConfig& cfg_in,
                        const TrainConfig& tcfg) {
    if (rows.size() < static_cast<std::size_t>(opts.folds))
        throw std::invalid_argument("finetune: fewer rows than folds");
    if (opts.use_features)
        for (const auto& r : rows)
            if (!r.features)
                throw std::invalid_argument(
                    "finetune: features mode requires feature values on every "
                    "row");

    auto folds = kfold_split(rows.size(), opts.folds, tcfg.seed);

    FinetuneResult result;
    double best_fold_val = 0;
    int best_fold = -1;

    for (std::size_t f = 0; f < folds.size(); ++f) {
        const auto& [train_idx, val_idx] = folds[f];

        // Scalers fitted on the training split only.
        ScalerParams feat_scaler;
        if (opts.use_features) {
            std::vector<std::vector<double>> cols(kNumFeatures);
            for (std::size_t i : train_idx)
                for (int j = 0; j < kNumFeatures; ++j)
                    cols[static_cast<std::size_t>(j)].push_back(
                        (*rows[i].features)[static_cast<std::size_t>(j)]);
            feat_scaler = fit_scaler(cols);
        }
        std::vector<double> train_targets;
        for (std::size_t i : train_idx) train_targets.push_back(rows[i].target);
        ScalerParams target_scaler = fit_scaler({train_targets});

        // Base state: pretrained checkpoint or a fresh seeded init.
        RegressionModel model;
        model.use_features = opts.use_features;
        model.feature_scaler = feat_scaler;
        model.target_mu = target_scaler.mu[0];
        model.target_sigma = target_scaler.sigma[0];
        if (pretrained) {
            model.vocab = pretrained->vocab;
            model.state = pretrained->state.clone();
        } else {
            // Scratch vocabulary from the training split's texts.
            std::vector<std::string> texts;
            for (std::size_t i : train_idx) {
                if (opts.use_features) {
                    std::vector<double> scaled(kNumFeatures);
                    for (int j = 0; j < kNumFeatures; ++j)
                        scaled[static_cast<std::size_t>(j)] = apply_scaler1(
                            feat_scaler, static_cast<std::size_t>(j),
                            (*rows[i].features)[static_cast<std::size_t>(j)]);
                    texts.push_back(
                        compose_input(rows[i].composition, scaled));
                } else {
                    texts.push_back(canonical_string(rows[i].composition));
                }
            }
            model.vocab = Vocabulary::build(texts);
            EncoderConfig cfg = cfg_in;
            cfg.vocab_size = static_cast<int>(model.vocab.size());
            model.state = EncoderState::init(cfg);
        }

        // Layer freezing: unselected layers receive no updates.
        if (opts.layer_selection) {
            for (int l : *opts.layer_selection)
                if (l < 1 || l > model.state.cfg.n_layers)
                    throw std::invalid_argument(
                        "finetune: layer index " + std::to_string(l) +
                        " outside 1.." +
                        std::to_string(model.state.cfg.n_layers));
            for (std::size_t l = 0; l < model.state.layers.size(); ++l)
                model.state.layers[l].trainable =
                    opts.layer_selection->count(static_cast<int>(l + 1)) > 0;
        }

        std::vector<TokenSequence> seqs;
        std::vector<double> targets_scaled;
        seqs.reserve(rows.size());
        for (const auto& row : rows) {
            seqs.push_back(encode_row(model, row));
            targets_scaled.push_back(
                apply_scaler1(target_scaler, 0, row.target));
        }

        auto tparams = model.state.trainable_params();
        std::vector<Var> tvars;
        for (const auto& p : tparams) tvars.push_back(p.var);
        int steps_per_epoch = static_cast<int>(
            (train_idx.size() + static_cast<std::size_t>(tcfg.batch_size) - 1) /
            static_cast<std::size_t>(tcfg.batch_size));
        AdamW opt(tparams, tcfg, tcfg.epochs * steps_per_epoch,
                  model.state.cfg.n_layers);

        auto batch_mse = [&](const std::vector<std::size_t>& batch_idx) {
            std::vector<Var> preds;
            Tensor tgt(1, batch_idx.size());
            for (std::size_t b = 0; b < batch_idx.size(); ++b) {
                preds.push_back(
                    regression_forward(model.state, seqs[batch_idx[b]]));
                tgt.v[b] = targets_scaled[batch_idx[b]];
            }
            return nn::mse_loss(nn::concat_cols(preds), tgt);
        };

        EncoderState best_state;
        double best_val = 0;
        bool have_best = false;
        std::vector<std::size_t> order = train_idx;
        for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
            std::mt19937_64 shuffle_rng = substream(
                tcfg.seed, "ft_shuffle",
                (static_cast<std::uint64_t>(f) << 32) |
                    static_cast<std::uint64_t>(epoch));
            std::shuffle(order.begin(), order.end(), shuffle_rng);
            for (std::size_t start = 0; start < order.size();
                 start += static_cast<std::size_t>(tcfg.batch_size)) {
                std::vector<std::size_t> batch_idx(
                    order.begin() + static_cast<long>(start),
                    order.begin() +
                        static_cast<long>(std::min(
                            order.size(),
                            start + static_cast<std::size_t>(tcfg.batch_size))));
                nn::zero_grad(tvars);
                Var loss = batch_mse(batch_idx);
                nn::backward(loss);
                opt.step();
            }
            Var val_loss = batch_mse(val_idx);
            if (!have_best || val_loss->val.v[0] < best_val) {
                best_val = val_loss->val.v[0];
                best_state = model.state.clone();
                have_best = true;
            }
        }
        model.state = std::move(best_state);

        // Fold report on the validation split, both scales.
        FoldReport rep;
        rep.fold = static_cast<int>(f);
        rep.train_indices = train_idx;
        rep.val_indices = val_idx;
        rep.target_scaler = target_scaler;
        std::vector<double> pred_scaled, actual_scaled;
        for (std::size_t i : val_idx) {
            Var y = regression_forward(model.state, seqs[i]);
            double ys = y->val.v[0];
            pred_scaled.push_back(ys);
            actual_scaled.push_back(targets_scaled[i]);
            double yo = invert_scaler1(target_scaler, 0, ys);
            rep.predictions.push_back(yo);
            rep.actuals.push_back(rows[i].target);
            rep.residuals.push_back(rows[i].target - yo);
        }
        Metrics m = metrics(rep.predictions, rep.actuals);
        rep.mse = m.mse;
        rep.mae = m.mae;
        rep.r2 = m.r2;
        Metrics ms = metrics(pred_scaled, actual_scaled);
        rep.mse_scaled = ms.mse;
        rep.mae_scaled = ms.mae;
        rep.r2_scaled = ms.r2;
        result.fold_reports.push_back(std::move(rep));

        if (best_fold < 0 || best_val < best_fold_val) {
            best_fold_val = best_val;
            best_fold = static_cast<int>(f);
            result.model = std::move(model);
        }
    }
    return result;
}

// ---- model artifact ----

namespace {

constexpr char kMagic[4] = {'H', 'E', 'A', 'M'};
constexpr std::uint32_t kFormatVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<char*>(b), 4);
}

void write_u64(std::ostream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<char*>(b), 8);
}

void write_f64(std::ostream& out, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    write_u64(out, bits);
}

void write_str(std::ostream& out, const std::string& s) {
    write_u32(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw std::runtime_error("model artifact truncated");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

std::uint64_t read_u64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in) throw std::runtime_error("model artifact truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

double read_f64(std::istream& in) {
    std::uint64_t bits = read_u64(in);
    double d;
    std::memcpy(&d, &bits, 8);
    return d;
}

std::string read_str(std::istream& in) {
    std::uint32_t n = read_u32(in);
    std::string s(n, '\0');
    in.read(s.data(), n);
    if (!in) throw std::runtime_error("model artifact truncated");
    return s;
}

}  // namespace

void save_model(const std::string& path, const RegressionModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write model to '" + path + "'");
    out.write(kMagic, 4);
    write_u32(out, kFormatVersion);
    const auto& cfg = model.state.cfg;
    write_u32(out, static_cast<std::uint32_t>(cfg.n_layers));
    write_u32(out, static_cast<std::uint32_t>(cfg.n_heads));
    write_u32(out, static_cast<std::uint32_t>(cfg.d_model));
    write_u32(out, static_cast<std::uint32_t>(cfg.d_ff));
    write_u32(out, static_cast<std::uint32_t>(cfg.max_len));
    write_u32(out, static_cast<std::uint32_t>(cfg.vocab_size));
    write_f64(out, cfg.mask_prob);
    write_u64(out, cfg.seed);
    write_u64(out, model.vocab.hash());
    write_u32(out, model.use_features ? 1 : 0);
    write_f64(out, model.target_mu);
    write_f64(out, model.target_sigma);
    write_u32(out, static_cast<std::uint32_t>(model.feature_scaler.mu.size()));
    for (std::size_t j = 0; j < model.feature_scaler.mu.size(); ++j) {
        write_f64(out, model.feature_scaler.mu[j]);
        write_f64(out, model.feature_scaler.sigma[j]);
    }
    auto params = model.state.named_params();
    write_u32(out, static_cast<std::uint32_t>(params.size()));
    for (const auto& p : params) {
        write_str(out, p.name);
        write_u64(out, p.var->val.rows);
        write_u64(out, p.var->val.cols);
        for (double d : p.var->val.v) write_f64(out, d);
    }
}

RegressionModel load_model(const std::string& path, const Vocabulary& vocab) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read model from '" + path + "'");
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("'" + path + "' is not a model artifact");
    std::uint32_t version = read_u32(in);
    if (version != kFormatVersion)
        throw std::runtime_error("unsupported model format version " +
                                 std::to_string(version));
    EncoderConfig cfg;
    cfg.n_layers = static_cast<int>(read_u32(in));
    cfg.n_heads = static_cast<int>(read_u32(in));
    cfg.d_model = static_cast<int>(read_u32(in));
    cfg.d_ff = static_cast<int>(read_u32(in));
    cfg.max_len = static_cast<int>(read_u32(in));
    cfg.vocab_size = static_cast<int>(read_u32(in));
    cfg.mask_prob = read_f64(in);
    cfg.seed = read_u64(in);
    std::uint64_t vocab_hash = read_u64(in);
    if (vocab_hash != vocab.hash())
        throw std::runtime_error(
            "model artifact was trained under a different vocabulary (hash "
            "mismatch)");
    if (cfg.vocab_size != static_cast<int>(vocab.size()))
        throw std::runtime_error("model vocab_size does not match vocabulary");

    RegressionModel model;
    model.vocab = vocab;
    model.use_features = read_u32(in) != 0;
    model.target_mu = read_f64(in);
    model.target_sigma = read_f64(in);
    std::uint32_t n_scaler = read_u32(in);
    for (std::uint32_t j = 0; j < n_scaler; ++j) {
        model.feature_scaler.mu.push_back(read_f64(in));
        model.feature_scaler.sigma.push_back(read_f64(in));
    }
    model.state = EncoderState::init(cfg);
    auto params = model.state.named_params();
    std::uint32_t n_params = read_u32(in);
    if (n_params != params.size())
        throw std::runtime_error("model artifact parameter count mismatch");
    for (auto& p : params) {
        std::string name = read_str(in);
        if (name != p.name)
            throw std::runtime_error("model artifact block '" + name +
                                     "' does not match expected '" + p.name +
                                     "'");
        std::uint64_t rows = read_u64(in), cols = read_u64(in);
        if (rows != p.var->val.rows || cols != p.var->val.cols)
            throw std::runtime_error("model artifact shape mismatch in '" +
                                     name + "'");
        for (double& d : p.var->val.v) d = read_f64(in);
    }
    return model;
}

}  // namespace hea

// Command-line entry point. Every subcommand writes its outputs plus a
// fully-resolved config record under a run directory, so a run can be
// reproduced from its artifacts alone.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "hea/baselines.hpp"
#include "hea/chem.hpp"
#include "hea/datagen.hpp"
#include "hea/encoder.hpp"
#include "hea/evaluate.hpp"
#include "hea/featurize.hpp"
#include "hea/interpret.hpp"
#include "hea/io.hpp"
#include "hea/tokenize.hpp"

using nlohmann::json;
using namespace hea;

namespace {

std::string fmt_g(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

std::string fmt_opt(const std::optional<double>& x) {
    return x ? fmt_g(*x) : std::string();
}

std::set<int> parse_layer_list(const std::string& s) {
    std::set<int> out;
    if (s.empty()) return out;
    for (const auto& part : split(s, ','))
        out.insert(static_cast<int>(parse_double(part, "layer list")));
    return out;
}

struct CommonOpts {
    std::string run_dir = "run";
    std::string element_table = "data/element_table.csv";
    std::string pair_table = "data/pair_enthalpy.csv";
    std::string config_path;
    std::uint64_t seed = 0;
};

void add_common(CLI::App* cmd, CommonOpts& c) {
    cmd->add_option("--run-dir", c.run_dir, "output directory for this run");
    cmd->add_option("--element-table", c.element_table);
    cmd->add_option("--pair-table", c.pair_table);
    cmd->add_option("--config", c.config_path,
                    "JSON config file; command-line flags override it");
    cmd->add_option("--seed", c.seed);
}

// The config file is applied before flag parsing, so flags win. Scan argv
// for --config up front.
json preload_config(int argc, char** argv) {
    for (int i = 1; i + 1 < argc; ++i)
        if (std::string(argv[i]) == "--config") {
            std::ifstream f(argv[i + 1]);
            if (!f)
                throw std::runtime_error(std::string("cannot read config '") +
                                         argv[i + 1] + "'");
            return json::parse(f);
        }
    return json::object();
}

template <class T>
void cfg_get(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

void write_run_record(const CommonOpts& c, const std::string& command,
                      json resolved) {
    std::filesystem::create_directories(c.run_dir);
    resolved["command"] = command;
    resolved["seed"] = c.seed;
    std::ofstream f(c.run_dir + "/config.json");
    if (!f)
        throw std::runtime_error("cannot write '" + c.run_dir +
                                 "/config.json'");
    f << resolved.dump(2) << "\n";
}

struct LoadedTables {
    ElementTable elements;
    PairEnthalpyTable pairs;
};

LoadedTables load_tables(const CommonOpts& c) {
    return {ElementTable::load(c.element_table),
            PairEnthalpyTable::load(c.pair_table)};
}

struct Dataset {
    std::vector<DatasetRow> rows;
    std::vector<std::string> compositions;  // canonical strings
};

// Rows are validated one by one; diagnostics cite the 1-based file line
// (header is line 1). Missing feature columns are computed on the fly.
Dataset ingest_dataset(const std::string& path, const std::string& target_col,
                       const LoadedTables& tables, bool need_target) {
    Table t = read_csv(path);
    int ic = t.require_column("composition");
    int it = t.column(target_col);
    if (need_target && it < 0)
        throw IoError("'" + path + "': missing target column '" + target_col +
                      "'");

    const auto& fnames = FeatureVector::names();
    std::vector<int> fcols;
    bool have_features = true;
    for (const auto& name : fnames) {
        int col = t.column(name);
        if (col < 0) have_features = false;
        fcols.push_back(col);
    }

    Dataset ds;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const std::string line = std::to_string(i + 2);
        try {
            DatasetRow row;
            row.composition = parse_composition(t.rows[i][ic]);
            if (have_features) {
                std::array<double, kNumFeatures> vals{};
                for (int j = 0; j < kNumFeatures; ++j)
                    vals[static_cast<std::size_t>(j)] = parse_double(
                        t.rows[i][fcols[static_cast<std::size_t>(j)]],
                        fnames[static_cast<std::size_t>(j)]);
                row.features = vals;
            } else {
                row.features =
                    featurize(row.composition, tables.elements, tables.pairs)
                        .values();
            }
            if (it >= 0)
                row.target = parse_double(t.rows[i][it], target_col);
            ds.compositions.push_back(canonical_string(row.composition));
            ds.rows.push_back(std::move(row));
        } catch (const std::exception& e) {
            throw std::runtime_error("'" + path + "' line " + line + ": " +
                                     e.what());
        }
    }
    return ds;
}

void write_fold_outputs(const std::string& run_dir,
                        const std::vector<FoldReport>& reports) {
    Table folds;
    folds.header = {"fold",       "mse",        "mae",      "r2",
                    "mse_scaled", "mae_scaled", "r2_scaled"};
    for (const auto& r : reports)
        folds.rows.push_back({std::to_string(r.fold), fmt_g(r.mse),
                              fmt_g(r.mae), fmt_opt(r.r2), fmt_g(r.mse_scaled),
                              fmt_g(r.mae_scaled), fmt_opt(r.r2_scaled)});
    AggregateReport agg = aggregate(reports);
    folds.rows.push_back({"mean", fmt_g(agg.mean_mse), fmt_g(agg.mean_mae),
                          fmt_opt(agg.mean_r2), "", "", ""});
    folds.rows.push_back({"best", fmt_g(agg.best_mse), fmt_g(agg.best_mae),
                          fmt_opt(agg.best_r2), "", "", ""});
    write_csv(run_dir + "/folds.csv", folds);

    Table preds;
    preds.header = {"row_index", "fold", "actual", "predicted", "residual"};
    for (std::size_t i = 0; i < agg.row_index.size(); ++i)
        preds.rows.push_back({std::to_string(agg.row_index[i]),
                              std::to_string(agg.fold[i]), fmt_g(agg.actual[i]),
                              fmt_g(agg.predicted[i]),
                              fmt_g(agg.residual[i])});
    write_csv(run_dir + "/predictions.csv", preds);

    std::cout << "mean mse " << fmt_g(agg.mean_mse) << "  mae "
              << fmt_g(agg.mean_mae) << "  r2 " << fmt_opt(agg.mean_r2)
              << "\n";
}

struct EncoderOpts {
    EncoderConfig enc;
    TrainConfig train;
    std::string decay_layers;  // comma list, empty = default last three
    bool no_features = false;
};

void add_encoder_options(CLI::App* cmd, EncoderOpts& o, const json& cfg) {
    cfg_get(cfg, "n_layers", o.enc.n_layers);
    cfg_get(cfg, "n_heads", o.enc.n_heads);
    cfg_get(cfg, "d_model", o.enc.d_model);
    cfg_get(cfg, "d_ff", o.enc.d_ff);
    cfg_get(cfg, "max_len", o.enc.max_len);
    cfg_get(cfg, "mask_prob", o.enc.mask_prob);
    cfg_get(cfg, "learning_rate", o.train.learning_rate);
    cfg_get(cfg, "weight_decay", o.train.weight_decay);
    cfg_get(cfg, "decay_layers", o.decay_layers);
    cfg_get(cfg, "warmup_fraction", o.train.warmup_fraction);
    cfg_get(cfg, "epochs", o.train.epochs);
    cfg_get(cfg, "batch_size", o.train.batch_size);
    cfg_get(cfg, "grad_clip", o.train.grad_clip);
    cfg_get(cfg, "no_features", o.no_features);

    cmd->add_option("--n-layers", o.enc.n_layers);
    cmd->add_option("--n-heads", o.enc.n_heads);
    cmd->add_option("--d-model", o.enc.d_model);
    cmd->add_option("--d-ff", o.enc.d_ff);
    cmd->add_option("--max-len", o.enc.max_len);
    cmd->add_option("--mask-prob", o.enc.mask_prob);
    cmd->add_option("--lr", o.train.learning_rate);
    cmd->add_option("--weight-decay", o.train.weight_decay);
    cmd->add_option("--decay-layers", o.decay_layers,
                    "1-based layers with decoupled weight decay");
    cmd->add_option("--warmup", o.train.warmup_fraction);
    cmd->add_option("--epochs", o.train.epochs);
    cmd->add_option("--batch-size", o.train.batch_size);
    cmd->add_option("--grad-clip", o.train.grad_clip);
    cmd->add_flag("--no-features", o.no_features,
                  "composition tokens only, no feature tokens");
}

json encoder_json(const EncoderOpts& o) {
    return {{"n_layers", o.enc.n_layers},
            {"n_heads", o.enc.n_heads},
            {"d_model", o.enc.d_model},
            {"d_ff", o.enc.d_ff},
            {"max_len", o.enc.max_len},
            {"mask_prob", o.enc.mask_prob},
            {"learning_rate", o.train.learning_rate},
            {"weight_decay", o.train.weight_decay},
            {"decay_layers", o.decay_layers},
            {"warmup_fraction", o.train.warmup_fraction},
            {"epochs", o.train.epochs},
            {"batch_size", o.train.batch_size},
            {"grad_clip", o.train.grad_clip},
            {"no_features", o.no_features}};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"High-entropy-alloy property pipeline"};
    app.require_subcommand(1);

    json cfg;
    try {
        cfg = preload_config(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    // ---- featurize ----
    auto* c_feat = app.add_subcommand(
        "featurize", "compute the 14 descriptors for a composition list");
    auto feat_common = std::make_shared<CommonOpts>();
    auto feat_input = std::make_shared<std::string>();
    auto feat_output = std::make_shared<std::string>();
    auto feat_target = std::make_shared<std::string>("target");
    add_common(c_feat, *feat_common);
    c_feat->add_option("--input", *feat_input)->required();
    c_feat->add_option("--output", *feat_output,
                       "defaults to <run-dir>/features.csv");
    c_feat->add_option("--target", *feat_target,
                       "target column carried through when present");
    c_feat->callback([=] {
        auto tables = load_tables(*feat_common);
        Table in = read_csv(*feat_input);
        int ic = in.require_column("composition");
        int it = in.column(*feat_target);

        Table out;
        out.header.push_back("composition");
        for (const auto& n : FeatureVector::names()) out.header.push_back(n);
        if (it >= 0) out.header.push_back(*feat_target);
        for (std::size_t i = 0; i < in.rows.size(); ++i) {
            try {
                Composition c = parse_composition(in.rows[i][ic]);
                FeatureVector fv =
                    featurize(c, tables.elements, tables.pairs);
                std::vector<std::string> row{canonical_string(c)};
                for (double v : fv.values()) row.push_back(fmt_g(v));
                if (it >= 0) row.push_back(in.rows[i][it]);
                out.rows.push_back(std::move(row));
            } catch (const std::exception& e) {
                throw std::runtime_error("'" + *feat_input + "' line " +
                                         std::to_string(i + 2) + ": " +
                                         e.what());
            }
        }
        std::filesystem::create_directories(feat_common->run_dir);
        std::string out_path = feat_output->empty()
                                   ? feat_common->run_dir + "/features.csv"
                                   : *feat_output;
        write_csv(out_path, out);
        write_run_record(*feat_common, "featurize",
                         {{"input", *feat_input},
                          {"output", out_path},
                          {"target", *feat_target},
                          {"element_table", tables.elements.version()},
                          {"pair_table", tables.pairs.version()}});
        std::cout << out.rows.size() << " rows -> " << out_path << "\n";
    });

    // ---- stats ----
    auto* c_stats = app.add_subcommand("stats", "dataset summary tables");
    auto st_common = std::make_shared<CommonOpts>();
    auto st_input = std::make_shared<std::string>();
    auto st_target = std::make_shared<std::string>("target");
    auto st_bins = std::make_shared<int>(20);
    add_common(c_stats, *st_common);
    c_stats->add_option("--input", *st_input)->required();
    c_stats->add_option("--target", *st_target);
    c_stats->add_option("--bins", *st_bins, "target histogram bins");
    c_stats->callback([=] {
        auto tables = load_tables(*st_common);
        Dataset ds = ingest_dataset(*st_input, *st_target, tables, true);
        std::vector<SummaryInput> rows;
        for (std::size_t i = 0; i < ds.rows.size(); ++i) {
            const auto& f = *ds.rows[i].features;
            rows.push_back({ds.compositions[i],
                            std::vector<double>(f.begin(), f.end()),
                            ds.rows[i].target});
        }
        std::vector<std::string> fnames(FeatureVector::names().begin(),
                                        FeatureVector::names().end());
        DatasetSummary s = dataset_summary(rows, fnames, *st_bins);

        std::filesystem::create_directories(st_common->run_dir);
        Table totals;
        totals.header = {"element", "total_coefficient"};
        for (const auto& [el, tot] : s.element_totals)
            totals.rows.push_back({el, fmt_g(tot)});
        write_csv(st_common->run_dir + "/element_totals.csv", totals);

        Table hist;
        hist.header = {"n_elements", "rows"};
        for (const auto& [n, cnt] : s.element_count_hist)
            hist.rows.push_back({std::to_string(n), std::to_string(cnt)});
        write_csv(st_common->run_dir + "/element_count_hist.csv", hist);

        Table th;
        th.header = {"bin", "lo", "hi", "count"};
        double w = (s.target_hist_max - s.target_hist_min) /
                   static_cast<double>(s.target_hist.size());
        for (std::size_t b = 0; b < s.target_hist.size(); ++b)
            th.rows.push_back(
                {std::to_string(b),
                 fmt_g(s.target_hist_min + w * static_cast<double>(b)),
                 fmt_g(s.target_hist_min + w * static_cast<double>(b + 1)),
                 std::to_string(s.target_hist[b])});
        write_csv(st_common->run_dir + "/target_hist.csv", th);

        Table corr;
        corr.header = {"feature", "pearson_r"};
        for (const auto& [name, r] : s.correlations)
            corr.rows.push_back({name, fmt_opt(r)});
        write_csv(st_common->run_dir + "/correlations.csv", corr);

        write_run_record(*st_common, "stats",
                         {{"input", *st_input},
                          {"target", *st_target},
                          {"bins", *st_bins},
                          {"element_table", tables.elements.version()},
                          {"pair_table", tables.pairs.version()}});
        std::cout << ds.rows.size() << " rows summarized -> "
                  << st_common->run_dir << "\n";
    });

    // ---- outliers ----
    auto* c_out = app.add_subcommand("outliers",
                                     "Z-score outliers on the target column");
    auto ol_common = std::make_shared<CommonOpts>();
    auto ol_input = std::make_shared<std::string>();
    auto ol_target = std::make_shared<std::string>("target");
    auto ol_threshold = std::make_shared<double>(3.0);
    add_common(c_out, *ol_common);
    c_out->add_option("--input", *ol_input)->required();
    c_out->add_option("--target", *ol_target);
    c_out->add_option("--threshold", *ol_threshold);
    c_out->callback([=] {
        Table in = read_csv(*ol_input);
        int ic = in.require_column("composition");
        int it = in.require_column(*ol_target);
        std::vector<double> values;
        for (std::size_t i = 0; i < in.rows.size(); ++i) {
            try {
                values.push_back(parse_double(in.rows[i][it], *ol_target));
            } catch (const std::exception& e) {
                throw std::runtime_error("'" + *ol_input + "' line " +
                                         std::to_string(i + 2) + ": " +
                                         e.what());
            }
        }
        OutlierResult res = zscore_outliers(values, *ol_threshold);

        std::filesystem::create_directories(ol_common->run_dir);
        Table out;
        out.header = {"row_index", "line", "composition", *ol_target, "z"};
        for (const auto& flag : res.flagged)
            out.rows.push_back({std::to_string(flag.index),
                                std::to_string(flag.index + 2),
                                in.rows[flag.index][ic],
                                in.rows[flag.index][it], fmt_g(flag.z)});
        write_csv(ol_common->run_dir + "/outliers.csv", out);
        write_run_record(*ol_common, "outliers",
                         {{"input", *ol_input},
                          {"target", *ol_target},
                          {"threshold", *ol_threshold},
                          {"constant_input", res.constant_input}});
        if (res.constant_input)
            std::cout << "target column is constant; nothing to flag\n";
        else
            std::cout << res.flagged.size() << " outliers -> "
                      << ol_common->run_dir << "/outliers.csv\n";
    });

    // ---- gen-corpus ----
    auto* c_gen = app.add_subcommand("gen-corpus",
                                     "generate a synthetic composition corpus");
    auto gc_common = std::make_shared<CommonOpts>();
    auto gc = std::make_shared<GeneratorConfig>();
    auto gc_output = std::make_shared<std::string>();
    auto gc_weights = std::make_shared<std::string>();
    cfg_get(cfg, "corpus_size", gc->corpus_size);
    cfg_get(cfg, "equimolar_fraction", gc->equimolar_fraction);
    cfg_get(cfg, "min_elements", gc->min_elements);
    cfg_get(cfg, "max_elements", gc->max_elements);
    cfg_get(cfg, "min_coefficient", gc->min_coefficient);
    cfg_get(cfg, "max_coefficient", gc->max_coefficient);
    add_common(c_gen, *gc_common);
    c_gen->add_option("--size", gc->corpus_size)->required();
    c_gen->add_option("--equimolar-fraction", gc->equimolar_fraction);
    c_gen->add_option("--min-elements", gc->min_elements);
    c_gen->add_option("--max-elements", gc->max_elements);
    c_gen->add_option("--min-coefficient", gc->min_coefficient);
    c_gen->add_option("--max-coefficient", gc->max_coefficient);
    c_gen->add_option("--weights", *gc_weights,
                      "CSV (element,weight) biasing element sampling");
    c_gen->add_option("--output", *gc_output,
                      "defaults to <run-dir>/corpus.csv");
    c_gen->callback([=] {
        auto tables = load_tables(*gc_common);
        gc->seed = gc_common->seed;
        if (!gc_weights->empty()) {
            Table wt = read_csv(*gc_weights);
            int ie = wt.require_column("element");
            int iw = wt.require_column("weight");
            for (const auto& row : wt.rows)
                gc->element_weights[row[ie]] =
                    parse_double(row[iw], "element weight");
        }
        auto corpus = generate_corpus(*gc, tables.elements, tables.pairs);
        std::filesystem::create_directories(gc_common->run_dir);
        std::string out_path = gc_output->empty()
                                   ? gc_common->run_dir + "/corpus.csv"
                                   : *gc_output;
        write_corpus(out_path, corpus);
        write_run_record(*gc_common, "gen-corpus",
                         {{"size", gc->corpus_size},
                          {"equimolar_fraction", gc->equimolar_fraction},
                          {"min_elements", gc->min_elements},
                          {"max_elements", gc->max_elements},
                          {"min_coefficient", gc->min_coefficient},
                          {"max_coefficient", gc->max_coefficient},
                          {"weights", *gc_weights},
                          {"output", out_path},
                          {"element_table", tables.elements.version()},
                          {"pair_table", tables.pairs.version()}});
        std::cout << corpus.size() << " compositions -> " << out_path << "\n";
    });

    // ---- pretrain ----
    auto* c_pre = app.add_subcommand("pretrain",
                                     "masked-token pre-training on a corpus");
    auto pre_common = std::make_shared<CommonOpts>();
    auto pre_corpus = std::make_shared<std::string>();
    auto pre_opts = std::make_shared<EncoderOpts>();
    add_common(c_pre, *pre_common);
    c_pre->add_option("--corpus", *pre_corpus)->required();
    add_encoder_options(c_pre, *pre_opts, cfg);
    c_pre->callback([=] {
        auto corpus = read_corpus(*pre_corpus);
        bool use_features = !pre_opts->no_features;

        ScalerParams scaler;
        std::vector<std::string> texts;
        std::vector<Composition> comps;
        for (const auto& e : corpus)
            comps.push_back(parse_composition(e.composition));
        if (use_features) {
            std::vector<std::vector<double>> cols(kNumFeatures);
            for (const auto& e : corpus) {
                auto vals = e.features.values();
                for (int j = 0; j < kNumFeatures; ++j)
                    cols[static_cast<std::size_t>(j)].push_back(
                        vals[static_cast<std::size_t>(j)]);
            }
            scaler = fit_scaler(cols);
            for (std::size_t i = 0; i < corpus.size(); ++i) {
                auto vals = corpus[i].features.values();
                std::vector<double> scaled(kNumFeatures);
                for (int j = 0; j < kNumFeatures; ++j)
                    scaled[static_cast<std::size_t>(j)] = apply_scaler1(
                        scaler, static_cast<std::size_t>(j),
                        vals[static_cast<std::size_t>(j)]);
                texts.push_back(compose_input(comps[i], scaled));
            }
        } else {
            for (const auto& e : corpus) texts.push_back(e.composition);
        }

        Vocabulary vocab = Vocabulary::build(texts);
        EncoderConfig ec = pre_opts->enc;
        ec.seed = pre_common->seed;
        TrainConfig tc = pre_opts->train;
        tc.seed = pre_common->seed;
        tc.decayed_layers = parse_layer_list(pre_opts->decay_layers);

        PretrainResult res = pretrain(texts, vocab, ec, tc);

        std::filesystem::create_directories(pre_common->run_dir);
        RegressionModel model;
        model.state = std::move(res.best_state);
        model.vocab = vocab;
        model.use_features = use_features;
        model.feature_scaler = scaler;
        save_model(pre_common->run_dir + "/model.bin", model);
        vocab.save(pre_common->run_dir + "/vocab.txt");

        Table hist;
        hist.header = {"epoch", "train_loss", "val_loss"};
        for (std::size_t e = 0; e < res.history.size(); ++e)
            hist.rows.push_back({std::to_string(e),
                                 fmt_g(res.history[e].train),
                                 fmt_g(res.history[e].val)});
        write_csv(pre_common->run_dir + "/history.csv", hist);

        json j = encoder_json(*pre_opts);
        j["corpus"] = *pre_corpus;
        j["vocab_size"] = vocab.size();
        j["best_epoch"] = res.best_epoch;
        j["best_val_loss"] = res.best_val;
        write_run_record(*pre_common, "pretrain", j);
        std::cout << "best val loss " << fmt_g(res.best_val) << " at epoch "
                  << res.best_epoch << " -> " << pre_common->run_dir
                  << "/model.bin\n";
    });

    // ---- finetune ----
    auto* c_ft = app.add_subcommand("finetune",
                                    "K-fold regression fine-tuning");
    auto ft_common = std::make_shared<CommonOpts>();
    auto ft_input = std::make_shared<std::string>();
    auto ft_target = std::make_shared<std::string>("target");
    auto ft_model = std::make_shared<std::string>();
    auto ft_vocab = std::make_shared<std::string>();
    auto ft_layers = std::make_shared<std::string>();
    auto ft_folds = std::make_shared<int>(5);
    auto ft_opts = std::make_shared<EncoderOpts>();
    cfg_get(cfg, "folds", *ft_folds);
    add_common(c_ft, *ft_common);
    c_ft->add_option("--input", *ft_input)->required();
    c_ft->add_option("--target", *ft_target);
    c_ft->add_option("--model", *ft_model, "pre-trained model artifact");
    c_ft->add_option("--vocab", *ft_vocab, "vocabulary of the artifact");
    c_ft->add_option("--layers", *ft_layers,
                     "1-based encoder layers left trainable, e.g. 11,12");
    c_ft->add_option("--folds", *ft_folds);
    add_encoder_options(c_ft, *ft_opts, cfg);
    c_ft->callback([=] {
        auto tables = load_tables(*ft_common);
        Dataset ds = ingest_dataset(*ft_input, *ft_target, tables, true);

        std::optional<RegressionModel> pretrained;
        if (!ft_model->empty()) {
            if (ft_vocab->empty())
                throw std::runtime_error("--model requires --vocab");
            Vocabulary v = Vocabulary::load(*ft_vocab);
            pretrained = load_model(*ft_model, v);
        }

        FinetuneOptions opts;
        opts.use_features = !ft_opts->no_features;
        opts.folds = *ft_folds;
        if (!ft_layers->empty())
            opts.layer_selection = parse_layer_list(*ft_layers);

        EncoderConfig ec = ft_opts->enc;
        ec.seed = ft_common->seed;
        TrainConfig tc = ft_opts->train;
        tc.seed = ft_common->seed;
        tc.decayed_layers = parse_layer_list(ft_opts->decay_layers);

        FinetuneResult res = finetune(ds.rows, pretrained, opts, ec, tc);

        std::filesystem::create_directories(ft_common->run_dir);
        write_fold_outputs(ft_common->run_dir, res.fold_reports);
        save_model(ft_common->run_dir + "/model.bin", res.model);
        res.model.vocab.save(ft_common->run_dir + "/vocab.txt");

        json j = encoder_json(*ft_opts);
        j["input"] = *ft_input;
        j["target"] = *ft_target;
        j["pretrained_model"] = *ft_model;
        j["layers"] = *ft_layers;
        j["folds"] = *ft_folds;
        j["element_table"] = tables.elements.version();
        j["pair_table"] = tables.pairs.version();
        write_run_record(*ft_common, "finetune", j);
    });

    // ---- baseline ----
    auto* c_bl = app.add_subcommand(
        "baseline", "classical regressor with the same fold splits");
    auto bl_common = std::make_shared<CommonOpts>();
    auto bl_input = std::make_shared<std::string>();
    auto bl_target = std::make_shared<std::string>("target");
    auto bl_algo = std::make_shared<std::string>();
    auto bl_folds = std::make_shared<int>(5);
    auto bl_no_features = std::make_shared<bool>(false);
    auto bl_gp = std::make_shared<GpConfig>();
    auto bl_tree = std::make_shared<TreeConfig>();
    auto bl_forest = std::make_shared<ForestConfig>();
    auto bl_gbr = std::make_shared<GbrConfig>();
    auto bl_k = std::make_shared<int>(5);
    cfg_get(cfg, "folds", *bl_folds);
    add_common(c_bl, *bl_common);
    c_bl->add_option("--input", *bl_input)->required();
    c_bl->add_option("--target", *bl_target);
    c_bl->add_option("--algo", *bl_algo, "gp | dt | rf | gbr | knn")
        ->required()
        ->check(CLI::IsMember({"gp", "dt", "rf", "gbr", "knn"}));
    c_bl->add_option("--folds", *bl_folds);
    c_bl->add_flag("--no-features", *bl_no_features,
                   "element fractions only, no descriptor columns");
    c_bl->add_option("--length-scale", bl_gp->length_scale);
    c_bl->add_option("--noise", bl_gp->noise);
    c_bl->add_option("--constant", bl_gp->constant);
    c_bl->add_option("--max-depth", bl_tree->max_depth);
    c_bl->add_option("--min-leaf", bl_tree->min_leaf);
    c_bl->add_option("--n-trees", bl_forest->n_trees);
    c_bl->add_option("--feature-subsample", bl_forest->feature_subsample);
    c_bl->add_option("--stages", bl_gbr->n_stages);
    c_bl->add_option("--shrinkage", bl_gbr->learning_rate);
    c_bl->add_option("--k", *bl_k, "neighbors for knn");
    c_bl->callback([=] {
        auto tables = load_tables(*bl_common);
        Dataset ds = ingest_dataset(*bl_input, *bl_target, tables, true);

        std::vector<DesignRow> drows;
        for (std::size_t i = 0; i < ds.rows.size(); ++i) {
            DesignRow r;
            r.composition = ds.compositions[i];
            if (!*bl_no_features) {
                const auto& f = *ds.rows[i].features;
                r.features.assign(f.begin(), f.end());
            }
            r.target = ds.rows[i].target;
            drows.push_back(std::move(r));
        }
        std::vector<std::string> fnames;
        if (!*bl_no_features)
            fnames.assign(FeatureVector::names().begin(),
                          FeatureVector::names().end());
        DesignMatrix dm = expand_design_matrix(drows, fnames);

        auto folds =
            kfold_split(dm.rows.size(), *bl_folds, bl_common->seed);
        std::vector<FoldReport> reports;
        for (std::size_t f = 0; f < folds.size(); ++f) {
            const auto& [train_idx, val_idx] = folds[f];

            std::vector<std::vector<double>> cols(dm.column_names.size());
            std::vector<double> ytr;
            for (std::size_t i : train_idx) {
                for (std::size_t j = 0; j < dm.rows[i].size(); ++j)
                    cols[j].push_back(dm.rows[i][j]);
                ytr.push_back(dm.target[i]);
            }
            ScalerParams xs = fit_scaler(cols);
            ScalerParams ys = fit_scaler({ytr});
            auto scale_row = [&](const std::vector<double>& row) {
                std::vector<double> out(row.size());
                for (std::size_t j = 0; j < row.size(); ++j)
                    out[j] = apply_scaler1(xs, j, row[j]);
                return out;
            };
            std::vector<std::vector<double>> xtr;
            std::vector<double> ytr_s;
            for (std::size_t i : train_idx) {
                xtr.push_back(scale_row(dm.rows[i]));
                ytr_s.push_back(apply_scaler1(ys, 0, dm.target[i]));
            }

            std::function<double(const std::vector<double>&)> predict_one;
            GpModel gp;
            std::unique_ptr<TreeNode> tree;
            ForestModel forest;
            GbrModel gbr;
            if (*bl_algo == "gp") {
                gp = gp_fit(xtr, ytr_s, *bl_gp);
                predict_one = [&gp](const std::vector<double>& q) {
                    return gp_predict(gp, q).mean;
                };
            } else if (*bl_algo == "dt") {
                tree = tree_fit(xtr, ytr_s, *bl_tree);
                predict_one = [&tree](const std::vector<double>& q) {
                    return tree_predict(*tree, q);
                };
            } else if (*bl_algo == "rf") {
                ForestConfig fc = *bl_forest;
                fc.tree = *bl_tree;
                fc.seed = bl_common->seed + f;
                forest = rf_fit(xtr, ytr_s, fc);
                predict_one = [&forest](const std::vector<double>& q) {
                    return rf_predict(forest, q);
                };
            } else if (*bl_algo == "gbr") {
                gbr = gbr_fit(xtr, ytr_s, *bl_gbr);
                predict_one = [&gbr](const std::vector<double>& q) {
                    return gbr_predict(gbr, q);
                };
            } else {
                predict_one = [&, k = *bl_k](const std::vector<double>& q) {
                    return knn_predict(xtr, ytr_s, q, k);
                };
            }

            FoldReport rep;
            rep.fold = static_cast<int>(f);
            rep.train_indices = train_idx;
            rep.val_indices = val_idx;
            rep.target_scaler = ys;
            std::vector<double> pred_s, actual_s;
            for (std::size_t i : val_idx) {
                double p = predict_one(scale_row(dm.rows[i]));
                pred_s.push_back(p);
                actual_s.push_back(apply_scaler1(ys, 0, dm.target[i]));
                double po = invert_scaler1(ys, 0, p);
                rep.predictions.push_back(po);
                rep.actuals.push_back(dm.target[i]);
                rep.residuals.push_back(dm.target[i] - po);
            }
            Metrics m = metrics(rep.predictions, rep.actuals);
            rep.mse = m.mse;
            rep.mae = m.mae;
            rep.r2 = m.r2;
            Metrics msc = metrics(pred_s, actual_s);
            rep.mse_scaled = msc.mse;
            rep.mae_scaled = msc.mae;
            rep.r2_scaled = msc.r2;
            reports.push_back(std::move(rep));
        }

        std::filesystem::create_directories(bl_common->run_dir);
        write_fold_outputs(bl_common->run_dir, reports);
        write_run_record(*bl_common, "baseline",
                         {{"input", *bl_input},
                          {"target", *bl_target},
                          {"algo", *bl_algo},
                          {"folds", *bl_folds},
                          {"no_features", *bl_no_features},
                          {"element_table", tables.elements.version()},
                          {"pair_table", tables.pairs.version()}});
    });

    // ---- evaluate ----
    auto* c_ev = app.add_subcommand(
        "evaluate", "metrics over an emitted predictions file");
    auto ev_common = std::make_shared<CommonOpts>();
    auto ev_input = std::make_shared<std::string>();
    auto ev_actual = std::make_shared<std::string>("actual");
    auto ev_pred = std::make_shared<std::string>("predicted");
    auto ev_threshold = std::make_shared<double>(3.0);
    add_common(c_ev, *ev_common);
    c_ev->add_option("--input", *ev_input)->required();
    c_ev->add_option("--actual-col", *ev_actual);
    c_ev->add_option("--predicted-col", *ev_pred);
    c_ev->add_option("--threshold", *ev_threshold,
                     "Z threshold for residual outliers");
    c_ev->callback([=] {
        Table in = read_csv(*ev_input);
        int ia = in.require_column(*ev_actual);
        int ip = in.require_column(*ev_pred);
        std::vector<double> actual, predicted, residual;
        for (std::size_t i = 0; i < in.rows.size(); ++i) {
            try {
                actual.push_back(parse_double(in.rows[i][ia], *ev_actual));
                predicted.push_back(parse_double(in.rows[i][ip], *ev_pred));
            } catch (const std::exception& e) {
                throw std::runtime_error("'" + *ev_input + "' line " +
                                         std::to_string(i + 2) + ": " +
                                         e.what());
            }
            residual.push_back(actual.back() - predicted.back());
        }
        Metrics m = metrics(predicted, actual);
        OutlierResult res = zscore_outliers(residual, *ev_threshold);

        std::filesystem::create_directories(ev_common->run_dir);
        Table mt;
        mt.header = {"mse", "mae", "r2"};
        mt.rows.push_back({fmt_g(m.mse), fmt_g(m.mae), fmt_opt(m.r2)});
        write_csv(ev_common->run_dir + "/metrics.csv", mt);

        Table ot;
        ot.header = {"row_index", "actual", "predicted", "residual", "z"};
        for (const auto& flag : res.flagged)
            ot.rows.push_back({std::to_string(flag.index),
                               fmt_g(actual[flag.index]),
                               fmt_g(predicted[flag.index]),
                               fmt_g(residual[flag.index]), fmt_g(flag.z)});
        write_csv(ev_common->run_dir + "/residual_outliers.csv", ot);

        write_run_record(*ev_common, "evaluate",
                         {{"input", *ev_input},
                          {"actual_col", *ev_actual},
                          {"predicted_col", *ev_pred},
                          {"threshold", *ev_threshold}});
        std::cout << "mse " << fmt_g(m.mse) << "  mae " << fmt_g(m.mae)
                  << "  r2 " << fmt_opt(m.r2) << "\n";
    });

    // ---- attention ----
    auto* c_at = app.add_subcommand(
        "attention", "element-pair attention matrix for a composition");
    auto at_common = std::make_shared<CommonOpts>();
    auto at_model = std::make_shared<std::string>();
    auto at_vocab = std::make_shared<std::string>();
    auto at_comp = std::make_shared<std::string>();
    auto at_include = std::make_shared<bool>(false);
    add_common(c_at, *at_common);
    c_at->add_option("--model", *at_model)->required();
    c_at->add_option("--vocab", *at_vocab)->required();
    c_at->add_option("--composition", *at_comp)->required();
    c_at->add_flag("--include-features", *at_include,
                   "keep feature tokens as one pseudo-group");
    c_at->callback([=] {
        Vocabulary v = Vocabulary::load(*at_vocab);
        RegressionModel model = load_model(*at_model, v);
        Composition c = parse_composition(*at_comp);

        std::optional<std::array<double, kNumFeatures>> features;
        json tables_j = json::object();
        if (model.use_features) {
            auto tables = load_tables(*at_common);
            features =
                featurize(c, tables.elements, tables.pairs).values();
            tables_j = {{"element_table", tables.elements.version()},
                        {"pair_table", tables.pairs.version()}};
        }
        ElementAttentionMatrix m =
            element_attention(model, c, features, *at_include);

        std::filesystem::create_directories(at_common->run_dir);
        export_attention(at_common->run_dir + "/attention.csv", m);
        json j = {{"model", *at_model},
                  {"vocab", *at_vocab},
                  {"composition", canonical_string(c)},
                  {"include_features", *at_include}};
        j.update(tables_j);
        write_run_record(*at_common, "attention", j);
        std::cout << m.elements.size() << " groups -> " << at_common->run_dir
                  << "/attention.csv\n";
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

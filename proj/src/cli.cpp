#include "hemocnn/cli.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "hemocnn/checkpoint.hpp"
#include "hemocnn/dataset.hpp"
#include "hemocnn/errors.hpp"
#include "hemocnn/gradcheck.hpp"
#include "hemocnn/image_io.hpp"
#include "hemocnn/metrics.hpp"
#include "hemocnn/report.hpp"
#include "hemocnn/synth.hpp"
#include "hemocnn/trainer.hpp"

namespace hemocnn {

namespace {

std::vector<double> parse_ratios(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ',')) {
        try {
            out.push_back(std::stod(part));
        } catch (const std::exception&) {
            throw ConfigError("bad --split value '" + text + "'");
        }
    }
    if (out.size() != 3) throw ConfigError("--split expects three comma-separated ratios, got '" + text + "'");
    return out;
}

std::string join(const std::vector<std::string>& items) {
    std::string s;
    for (const auto& i : items) s += (s.empty() ? "" : ", ") + i;
    return s;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
    TrainConfig cfg;
    std::string split = "0.8,0.1,0.1";
};

int cmd_train(TrainArgs& a, std::ostream& out) {
    const auto r = parse_ratios(a.split);
    a.cfg.split = SplitSpec{r[0], r[1], r[2], a.cfg.seed};
    const auto result = train(a.cfg, out);
    out << "checkpoint: " << a.cfg.checkpoint.string() << " (epoch " << result.best_epoch << ", "
        << result.monitored << " " << result.best_loss << ")\n";
    return kExitOk;
}

struct EvalArgs {
    std::string checkpoint;
    std::string data_dir;
    std::string subset;  // empty: test, or all when the checkpoint was trained on every sample
    std::string format = "markdown";
    std::string split;
    std::optional<std::uint64_t> split_seed;
    bool eval_on_all = false;
    std::size_t batch_size = 32;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
    const auto format = parse_report_format(a.format);
    const auto ckpt = load_checkpoint(a.checkpoint);
    const auto index = scan_dataset(a.data_dir);
    if (index.class_names != ckpt.meta.class_names) {
        throw DataError(DataError::Kind::ClassMismatch, "class set mismatch: checkpoint has [" +
                                                            join(ckpt.meta.class_names) + "], dataset has [" +
                                                            join(index.class_names) + "]");
    }

    const std::string subset = !a.subset.empty() ? a.subset : ckpt.meta.eval_on_all ? "all" : "test";
    DatasetIndex view;
    std::string protocol;
    if (a.eval_on_all || subset == "all") {
        view = index;
        protocol = "all samples";
    } else {
        SplitSpec spec{ckpt.meta.split_ratios[0], ckpt.meta.split_ratios[1], ckpt.meta.split_ratios[2],
                       ckpt.meta.split_seed};
        if (!a.split.empty()) {
            const auto r = parse_ratios(a.split);
            spec.train = r[0];
            spec.val = r[1];
            spec.test = r[2];
        }
        if (a.split_seed) spec.seed = *a.split_seed;
        auto parts = split(index, spec);
        if (subset == "train") view = std::move(parts.train);
        else if (subset == "val") view = std::move(parts.val);
        else if (subset == "test") view = std::move(parts.test);
        else throw ConfigError("unknown subset '" + subset + "' (train, val, test or all)");
        std::ostringstream p;
        p << subset << " split of " << spec.train << "/" << spec.val << "/" << spec.test << " (seed " << spec.seed
          << ")";
        protocol = p.str();
    }
    if (view.empty()) throw DataError(DataError::Kind::Io, "selected subset '" + subset + "' is empty");

    const auto& cfg = ckpt.network.config();
    ImageCache cache(cfg.input_height, cfg.input_width);
    const auto result = evaluate(ckpt.network, view, cache, a.batch_size);
    const auto cm = confusion(result.truth, result.predicted, index.num_classes(), index.class_names);

    ReportContext ctx;
    ctx.notes.emplace_back("evaluated", protocol);
    std::ostringstream sel;
    sel << ckpt.meta.monitored << " at epoch " << ckpt.meta.epoch;
    if (ckpt.meta.monitored_loss) sel << " (" << *ckpt.meta.monitored_loss << ")";
    ctx.notes.emplace_back("checkpoint selected by", sel.str());
    if (ckpt.meta.eval_on_all) ctx.notes.emplace_back("training protocol", "trained on all samples");
    out << render_report(cm, per_class_metrics(cm), format, ctx);
    return kExitOk;
}

struct PredictArgs {
    std::string checkpoint;
    std::vector<std::string> images;
    bool json = false;
};

int cmd_predict(const PredictArgs& a, std::ostream& out, std::ostream& err) {
    const auto ckpt = load_checkpoint(a.checkpoint);
    const auto& cfg = ckpt.network.config();
    const auto& names = ckpt.meta.class_names;
    int status = kExitOk;
    for (const auto& path : a.images) {
        Tensor img;
        try {
            img = load_image(path, cfg.input_height, cfg.input_width);
        } catch (const DecodeError& e) {
            err << "error: " << e.what() << '\n';
            status = kExitData;
            continue;
        }
        const Prediction p = predict(ckpt.network, img.reshaped({1, 3, cfg.input_height, cfg.input_width}));
        const std::size_t k = p.labels[0];
        const std::string name = k < names.size() ? names[k] : std::to_string(k);
        if (a.json) {
            nlohmann::json j{{"path", path}, {"class", name}, {"class_id", k}, {"probability", p.probs[k]}};
            j["probs"] = std::vector<double>(p.probs.data().begin(), p.probs.data().end());
            out << j.dump() << '\n';
        } else {
            char prob[32];
            std::snprintf(prob, sizeof prob, "%.6f", static_cast<double>(p.probs[k]));
            out << path << '\t' << name << '\t' << prob << '\n';
        }
    }
    return status;
}

struct GradcheckArgs {
    std::vector<std::uint64_t> seeds{0, 1, 2};
    bool dense_only = false;
    double eps = 1e-5;
    double tolerance = 1e-4;
    double inject_fault = 1.0;
};

int cmd_gradcheck(const GradcheckArgs& a, std::ostream& out) {
    if constexpr (!std::is_same_v<Scalar, double>) {
        throw ConfigError("gradcheck requires a double-precision build");
    }
    const NetConfig cfg = a.dense_only ? dense_only_gradcheck_config() : tiny_gradcheck_config();
    double worst = 0;
    for (auto seed : a.seeds) {
        auto inst = make_gradcheck_instance(cfg, seed);
        inst.net.set_conv_grad_fault(static_cast<Scalar>(a.inject_fault));
        const auto r = grad_check(inst.net, inst.x, inst.labels, a.eps);
        worst = std::max(worst, r.max_rel_error);
        out << "seed " << seed << ": max relative error " << r.max_rel_error << " over " << r.checked
            << " parameters (worst " << r.worst_param << "[" << r.worst_index << "])\n";
    }
    const bool pass = worst <= a.tolerance;
    out << (pass ? "PASS" : "FAIL") << " max relative error " << worst << " (tolerance " << a.tolerance << ")\n";
    return pass ? kExitOk : kExitGradcheck;
}

struct SynthArgs {
    std::string out_dir;
    SynthOptions opts;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
    const auto r = synth_dataset(a.out_dir, a.opts);
    out << "wrote " << r.files.size() << " images in " << a.opts.classes << " classes to " << a.out_dir
        << "\nmanifest: " << r.manifest.string() << '\n';
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Blood-cell CNN: train, evaluate and inspect the classifier"};
    app.require_subcommand(1);

    TrainArgs train_args;
    auto* train = app.add_subcommand("train", "Train on a folder-per-class dataset");
    auto& tc = train_args.cfg;
    train->add_option("--data-dir", tc.data_dir, "Dataset root (<root>/<class>/<image>)")->required();
    train->add_option("--epochs", tc.epochs, "Training epochs")->capture_default_str();
    train->add_option("--lr", tc.learning_rate, "Adam learning rate")->capture_default_str();
    train->add_option("--batch-size", tc.batch_size, "Mini-batch size")->capture_default_str();
    train->add_option("--seed", tc.seed, "Seed for init, split, shuffling and dropout")->capture_default_str();
    train->add_option("--split", train_args.split, "train,val,test ratios")->capture_default_str();
    train->add_option("--checkpoint", tc.checkpoint, "Best-weights checkpoint path")->capture_default_str();
    train->add_option("--metrics-log", tc.metrics_log, "JSON-lines epoch log")->capture_default_str();
    train->add_option("--pool-stride", tc.pool_stride, "Pooling stride (1 or 2)")->capture_default_str();
    train->add_flag("!--pool-exact", tc.pool_ceil, "Use exact (floor) pooling instead of ceil mode");
    train->add_option("--dropout", tc.dropout_rate, "Dropout rate after each conv block")->capture_default_str();
    train->add_option("--filters", tc.conv_filters, "Conv filter counts")->delimiter(',');
    train->add_option("--dense-hidden", tc.dense_hidden, "Hidden dense widths")->delimiter(',');
    train->add_option("--input-size", tc.input_size, "Square model input size")->capture_default_str();
    train->add_flag("--literal-paper", tc.literal_paper, "Stride-1 exact pooling in every block");
    train->add_flag("--eval-on-all", tc.eval_on_all, "Train on every sample and monitor training loss");
    train->add_flag("--log-wall-time", tc.log_wall_time, "Record wall_seconds in the metrics log");

    EvalArgs eval_args;
    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint and print the report");
    eval->add_option("--checkpoint", eval_args.checkpoint)->required();
    eval->add_option("--data-dir", eval_args.data_dir)->required();
    eval->add_option("--subset", eval_args.subset,
                     "train, val, test or all (default: test, or all for checkpoints trained on every sample)");
    eval->add_option("--format", eval_args.format, "markdown, csv or json")->capture_default_str();
    eval->add_option("--split", eval_args.split, "Override the checkpoint's split ratios");
    eval->add_option("--seed", eval_args.split_seed, "Override the checkpoint's split seed");
    eval->add_flag("--eval-on-all", eval_args.eval_on_all, "Evaluate every sample");
    eval->add_option("--batch-size", eval_args.batch_size)->capture_default_str();

    PredictArgs predict_args;
    auto* predict_cmd = app.add_subcommand("predict", "Classify individual images");
    predict_cmd->add_option("--checkpoint", predict_args.checkpoint)->required();
    predict_cmd->add_option("images", predict_args.images, "Image files")->required();
    std::string predict_format = "text";
    predict_cmd->add_option("--format", predict_format, "text or json")->capture_default_str();

    GradcheckArgs gc_args;
    auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every gradient");
    gradcheck->add_option("--seeds", gc_args.seeds, "Seeds")->delimiter(',')->capture_default_str();
    gradcheck->add_flag("--dense-only", gc_args.dense_only, "Check the conv-free degenerate network");
    gradcheck->add_option("--eps", gc_args.eps)->capture_default_str();
    gradcheck->add_option("--tolerance", gc_args.tolerance)->capture_default_str();
    gradcheck->add_option("--inject-fault", gc_args.inject_fault, "Scale conv kernel gradients (mutation test)")
        ->group("");

    SynthArgs synth_args;
    auto* synth = app.add_subcommand("synth", "Write a synthetic folder-per-class dataset");
    synth->add_option("--out-dir", synth_args.out_dir)->required();
    synth->add_option("--classes,-k", synth_args.opts.classes)->capture_default_str();
    synth->add_option("--per-class", synth_args.opts.per_class)->capture_default_str();
    synth->add_option("--image-size", synth_args.opts.image_size)->capture_default_str();
    synth->add_option("--seed", synth_args.opts.seed)->capture_default_str();

    std::vector<std::string> argv_storage{"hemocnn"};
    argv_storage.insert(argv_storage.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& s : argv_storage) argv.push_back(s.data());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*train) return cmd_train(train_args, out);
        if (*eval) return cmd_eval(eval_args, out);
        if (*predict_cmd) {
            if (predict_format != "text" && predict_format != "json") {
                throw ConfigError("unknown predict format '" + predict_format + "'");
            }
            predict_args.json = predict_format == "json";
            return cmd_predict(predict_args, out, err);
        }
        if (*gradcheck) return cmd_gradcheck(gc_args, out);
        if (*synth) return cmd_synth(synth_args, out);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const ShapeError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const NumericError& e) {
        err << "numeric error: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const Error& e) {
        err << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "data error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitFailure;
}

}  // namespace hemocnn

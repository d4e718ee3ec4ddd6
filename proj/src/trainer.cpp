#include "hemocnn/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>

#include "hemocnn/checkpoint.hpp"
#include "hemocnn/errors.hpp"
#include "hemocnn/loss.hpp"

namespace hemocnn {

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (!(learning_rate > 0) || !std::isfinite(learning_rate)) throw ConfigError("learning rate must be > 0");
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
    if (input_size < 1) throw ConfigError("input size must be >= 1");
}

NetConfig TrainConfig::net_config(std::size_t num_classes) const {
    NetConfig net;
    net.input_height = input_size;
    net.input_width = input_size;
    net.conv_filters = conv_filters;
    net.dense_hidden = dense_hidden;
    net.pool_stride = literal_paper ? 1 : pool_stride;
    net.pool_ceil = literal_paper ? false : pool_ceil;
    net.dropout_rate = dropout_rate;
    net.num_classes = num_classes;
    net.seed = seed;
    return net;
}

nlohmann::json to_json(const EpochRecord& r, bool with_wall_time) {
    nlohmann::json j{{"epoch", r.epoch}, {"train_loss", r.train_loss}, {"train_accuracy", r.train_accuracy}};
    j["val_loss"] = r.val_loss ? nlohmann::json(*r.val_loss) : nlohmann::json(nullptr);
    j["val_accuracy"] = r.val_accuracy ? nlohmann::json(*r.val_accuracy) : nlohmann::json(nullptr);
    if (with_wall_time) j["wall_seconds"] = r.wall_seconds;
    return j;
}

EvalResult evaluate(const Network& net, const DatasetIndex& view, ImageCache& cache, std::size_t batch_size) {
    EvalResult r;
    if (view.empty()) return r;
    double loss_sum = 0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < view.size(); start += batch_size) {
        std::vector<std::size_t> positions(std::min(batch_size, view.size() - start));
        std::iota(positions.begin(), positions.end(), start);
        const Batch b = make_batch(view, positions, cache);
        const Prediction p = predict(net, b.images);
        loss_sum += sparse_ce_value(p.probs, b.labels) * static_cast<double>(b.labels.size());
        for (std::size_t i = 0; i < b.labels.size(); ++i) {
            correct += p.labels[i] == b.labels[i];
            r.truth.push_back(b.labels[i]);
            r.predicted.push_back(p.labels[i]);
        }
    }
    r.loss = loss_sum / static_cast<double>(view.size());
    r.accuracy = static_cast<double>(correct) / static_cast<double>(view.size());
    return r;
}

TrainResult train(const TrainConfig& cfg, std::ostream& log) {
    cfg.validate();
    const DatasetIndex index = scan_dataset(cfg.data_dir);
    if (index.ignored_files) log << "warning: ignored " << index.ignored_files << " non-image entries\n";

    DatasetIndex train_view, val_view;
    if (cfg.eval_on_all) {
        train_view = index;
    } else {
        auto parts = split(index, cfg.split);
        for (const auto& w : parts.warnings) log << "warning: " << w << '\n';
        train_view = std::move(parts.train);
        val_view = std::move(parts.val);
    }
    if (train_view.empty()) throw ConfigError("training split is empty");

    const NetConfig net_cfg = cfg.net_config(index.num_classes());
    const NetworkPlan plan = plan_network(net_cfg);
    for (const auto& w : plan.warnings) log << "warning: " << w << '\n';
    if (plan.largest_layer_params > kFeasibleLayerParams) {
        throw ConfigError("refusing to allocate a layer with " + std::to_string(plan.largest_layer_params) +
                          " parameters; reduce --input-size");
    }
    Network net(net_cfg);
    AdamState adam(net.parameters(), AdamHyper{cfg.learning_rate, 0.9, 0.999, 1e-8});
    ImageCache cache(net_cfg.input_height, net_cfg.input_width);

    TrainResult result;
    result.class_names = index.class_names;
    result.monitored = val_view.empty() ? "train_loss" : "val_loss";
    result.best_loss = std::numeric_limits<double>::infinity();
    result.initial_loss = evaluate(net, train_view, cache, cfg.batch_size).loss;
    log << "classes: " << index.num_classes() << ", train samples: " << train_view.size()
        << ", val samples: " << val_view.size() << ", parameters: " << param_count(net)
        << ", counted layers: " << net.counted_layers() << ", initial loss: " << result.initial_loss << '\n';

    std::ofstream metrics(cfg.metrics_log, std::ios::binary | std::ios::trunc);
    if (!metrics) throw DataError(DataError::Kind::Io, "cannot write metrics log '" + cfg.metrics_log.string() + "'");

    CheckpointMeta meta;
    meta.monitored = result.monitored;
    meta.class_names = index.class_names;
    meta.split_ratios = {cfg.split.train, cfg.split.val, cfg.split.test};
    meta.split_seed = cfg.split.seed;
    meta.eval_on_all = cfg.eval_on_all;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        double loss_sum = 0;
        std::size_t correct = 0, seen = 0;
        const auto order = batch_order(train_view.size(), cfg.batch_size, cfg.seed, epoch);
        for (std::size_t b = 0; b < order.size(); ++b) {
            const Batch batch = make_batch(train_view, order[b], cache);
            ForwardTrace trace;
            const Tensor logits = net.forward(batch.images, Mode::Train, {cfg.seed, epoch, b}, &trace);
            LossResult lr;
            try {
                const Tensor probs = softmax(logits);
                lr = sparse_ce_loss(probs, batch.labels);
                const auto pred = argmax_axis(probs, 1);
                for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == batch.labels[i];
                adam_step(net.parameters(), net.backward(lr.dlogits, trace), adam);
            } catch (const NumericError& e) {
                throw NumericError("epoch " + std::to_string(epoch) + ", batch " + std::to_string(b) + ": " + e.what());
            }
            loss_sum += lr.loss * static_cast<double>(batch.labels.size());
            seen += batch.labels.size();
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(seen);
        rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(seen);
        if (!val_view.empty()) {
            const auto v = evaluate(net, val_view, cache, cfg.batch_size);
            rec.val_loss = v.loss;
            rec.val_accuracy = v.accuracy;
        }
        rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        metrics << to_json(rec, cfg.log_wall_time).dump() << '\n';
        metrics.flush();
        result.records.push_back(rec);

        const double monitored = rec.val_loss.value_or(rec.train_loss);
        log << "epoch " << epoch << " train_loss " << rec.train_loss << " train_acc " << rec.train_accuracy;
        if (rec.val_loss) log << " val_loss " << *rec.val_loss << " val_acc " << *rec.val_accuracy;
        if (monitored < result.best_loss) {
            result.best_loss = monitored;
            result.best_epoch = epoch;
            meta.epoch = epoch;
            meta.monitored_loss = monitored;
            save_checkpoint(net, meta, cfg.checkpoint);
            log << " [saved]";
        }
        log << '\n';
    }
    log << "best epoch " << result.best_epoch << " (" << result.monitored << " " << result.best_loss << ")\n";
    return result;
}

}  // namespace hemocnn

#include "hyperfc/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "hyperfc/adam.hpp"
#include "hyperfc/error.hpp"
#include "hyperfc/log.hpp"
#include "hyperfc/parallel.hpp"
#include "hyperfc/rng.hpp"

namespace hyperfc {

std::string model_kind_name(ModelKind kind) {
    switch (kind) {
        case ModelKind::Hypernet: return "hypernet";
        case ModelKind::GlobalLinear: return "global_linear";
        case ModelKind::IndividualLinear: return "individual_linear";
    }
    return "?";
}

ModelKind model_kind_from_name(const std::string& name) {
    if (name == "hypernet") return ModelKind::Hypernet;
    if (name == "global_linear") return ModelKind::GlobalLinear;
    if (name == "individual_linear") return ModelKind::IndividualLinear;
    throw ConfigError("unknown model kind '" + name +
                      "' (expected hypernet, global_linear or individual_linear)");
}

std::string factors_mode_name(FactorsMode mode) {
    switch (mode) {
        case FactorsMode::None: return "none";
        case FactorsMode::IdOnly: return "id_only";
        case FactorsMode::All: return "all";
    }
    return "?";
}

FactorsMode factors_mode_from_name(const std::string& name) {
    if (name == "none") return FactorsMode::None;
    if (name == "id_only") return FactorsMode::IdOnly;
    if (name == "all") return FactorsMode::All;
    throw ConfigError("unknown factors mode '" + name + "' (expected none, id_only or all)");
}

FactorSelection TrainConfig::selection() const {
    FactorSelection s = factors == FactorsMode::All      ? FactorSelection::all()
                        : factors == FactorsMode::IdOnly ? FactorSelection::id_only()
                                                         : FactorSelection::none();
    if (ablation.drop_all_external) s.weather = s.datetime = s.events = false;
    if (ablation.drop_weather) s.weather = false;
    if (ablation.drop_datetime) s.datetime = false;
    if (ablation.drop_events) s.events = false;
    return s;
}

void TrainConfig::validate() const {
    if (learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
    if (early_stop_patience < 1) throw ConfigError("early_stop_patience must be >= 1");
    if (repetitions < 1) throw ConfigError("repetitions must be >= 1");
    if (input_len < 1 || input_len % 24 != 0)
        throw ConfigError("input_len must be a positive multiple of 24 hours");
    if (horizon < 1 || horizon % 24 != 0)
        throw ConfigError("horizon must be a positive multiple of 24 hours");
    if (stride < 1 || eval_stride < 1) throw ConfigError("window strides must be >= 1");
    if (hidden < 1) throw ConfigError("hidden width must be >= 1");
    if (upscale < 1) throw ConfigError("upscale must be >= 1");
    if (id_embed_dim < 0) throw ConfigError("id_embed_dim must be >= 0");
    if (adapt_steps < 1 || adapt_batch < 1)
        throw ConfigError("adaptation steps and batch must be >= 1");
    if (model == ModelKind::Hypernet) {
        if (factors == FactorsMode::None)
            throw ConfigError(
                "the hypernetwork model needs at least the consumer identity; "
                "use --factors id_only or all");
        if (input_len != 2 * kBlockRows * upscale || horizon != kBlockCols * upscale)
            throw ConfigError("hypernet geometry requires input_len = " +
                              std::to_string(2 * kBlockRows) + " * upscale and horizon = " +
                              std::to_string(kBlockCols) +
                              " * upscale; got L=" + std::to_string(input_len) +
                              ", h=" + std::to_string(horizon) +
                              ", u=" + std::to_string(upscale));
    }
}

nlohmann::json TrainConfig::to_json() const {
    return {{"model", model_kind_name(model)},
            {"factors", factors_mode_name(factors)},
            {"drop_weather", ablation.drop_weather},
            {"drop_datetime", ablation.drop_datetime},
            {"drop_events", ablation.drop_events},
            {"drop_all_external", ablation.drop_all_external},
            {"learning_rate", learning_rate},
            {"batch_size", batch_size},
            {"max_epochs", max_epochs},
            {"early_stop_patience", early_stop_patience},
            {"seed", seed},
            {"repetitions", repetitions},
            {"input_len", input_len},
            {"horizon", horizon},
            {"hidden", hidden},
            {"upscale", upscale},
            {"id_embed_dim", id_embed_dim},
            {"stride", stride},
            {"eval_stride", eval_stride},
            {"val_stride", val_stride},
            {"max_windows_per_epoch", max_windows_per_epoch},
            {"max_val_windows", max_val_windows},
            {"adapt_steps", adapt_steps},
            {"adapt_batch", adapt_batch},
            {"workers", workers},
            {"ratio_train", ratios.train},
            {"ratio_val", ratios.val},
            {"ratio_test", ratios.test}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.model = model_kind_from_name(j.at("model").get<std::string>());
    c.factors = factors_mode_from_name(j.at("factors").get<std::string>());
    c.ablation.drop_weather = j.at("drop_weather").get<bool>();
    c.ablation.drop_datetime = j.at("drop_datetime").get<bool>();
    c.ablation.drop_events = j.at("drop_events").get<bool>();
    c.ablation.drop_all_external = j.at("drop_all_external").get<bool>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.batch_size = j.at("batch_size").get<int>();
    c.max_epochs = j.at("max_epochs").get<int>();
    c.early_stop_patience = j.at("early_stop_patience").get<int>();
    c.seed = j.at("seed").get<uint64_t>();
    c.repetitions = j.at("repetitions").get<int>();
    c.input_len = j.at("input_len").get<int>();
    c.horizon = j.at("horizon").get<int>();
    c.hidden = j.at("hidden").get<int>();
    c.upscale = j.at("upscale").get<int>();
    c.id_embed_dim = j.at("id_embed_dim").get<int>();
    c.stride = j.at("stride").get<size_t>();
    c.eval_stride = j.at("eval_stride").get<size_t>();
    c.val_stride = j.value("val_stride", size_t{0});
    c.max_windows_per_epoch = j.at("max_windows_per_epoch").get<size_t>();
    c.max_val_windows = j.at("max_val_windows").get<size_t>();
    c.adapt_steps = j.at("adapt_steps").get<int>();
    c.adapt_batch = j.at("adapt_batch").get<int>();
    c.workers = j.at("workers").get<int>();
    c.ratios.train = j.at("ratio_train").get<double>();
    c.ratios.val = j.at("ratio_val").get<double>();
    c.ratios.test = j.at("ratio_test").get<double>();
    return c;
}

RepetitionStats aggregate_runs(const std::vector<SplitMetrics>& runs) {
    RepetitionStats stats;
    stats.reps = static_cast<int>(runs.size());
    if (runs.empty()) return stats;
    for (const auto& r : runs) {
        stats.mse_mean += r.mse;
        stats.mae_mean += r.mae;
    }
    stats.mse_mean /= runs.size();
    stats.mae_mean /= runs.size();
    if (runs.size() >= 2) {
        double mse_var = 0.0, mae_var = 0.0;
        for (const auto& r : runs) {
            mse_var += (r.mse - stats.mse_mean) * (r.mse - stats.mse_mean);
            mae_var += (r.mae - stats.mae_mean) * (r.mae - stats.mae_mean);
        }
        mse_var /= static_cast<double>(runs.size() - 1);
        mae_var /= static_cast<double>(runs.size() - 1);
        stats.mse_se = std::sqrt(mse_var / static_cast<double>(runs.size()));
        stats.mae_se = std::sqrt(mae_var / static_cast<double>(runs.size()));
    }
    return stats;
}

// ---- Models ------------------------------------------------------------------

WindowBatchItem materialize_window(const DatasetFrame& frame, const ForecastWindow& w,
                                   int input_len, int horizon,
                                   const FactorSelection& selection) {
    WindowBatchItem item;
    item.window = w;
    item.input = window_input(frame, w, input_len, selection);
    item.input_mean = window_input_mean(frame, w, input_len);
    item.target = window_target(frame, w, input_len, horizon);
    return item;
}

HypernetForecaster::HypernetForecaster(int n_consumers, const TrainConfig& cfg)
    : store_(n_consumers, cfg.seed), selection_(cfg.selection()) {
    HypernetGeometry geom;
    geom.in_channels = selection_.embedding_channels();
    geom.out_channels = selection_.input_channels();
    geom.hidden = cfg.hidden;
    geom.upscale = cfg.upscale;
    net_ = HypernetModel(geom, cfg.seed);
}

Tensor HypernetForecaster::generated_weights(int consumer_id,
                                             const CategoricalContext& ctx) const {
    return net_.generate_weights(store_.assemble_input(consumer_id, ctx, selection_));
}

Tensor HypernetForecaster::forecast_from(const Tensor& weights,
                                         const WindowBatchItem& item) const {
    const int p = selection_.input_channels();
    const int l = net_.geometry().output_rows();
    Tensor x = Tensor::from_data({p, l}, item.input);
    return linear_forecast(weights, x);
}

Tensor HypernetForecaster::forecast(const WindowBatchItem& item) const {
    return forecast_from(generated_weights(item.window.consumer_id, item.window.context),
                         item);
}

Tensor HypernetForecaster::forecast_with_embedding(const Tensor& consumer_vec,
                                                   const WindowBatchItem& item) const {
    Tensor z = store_.assemble_with_consumer(consumer_vec, item.window.context, selection_);
    return forecast_from(net_.generate_weights(z), item);
}

std::vector<Tensor> HypernetForecaster::parameters() const {
    std::vector<Tensor> params = net_.parameters();
    for (const auto& p : store_.parameters()) params.push_back(p);
    return params;
}

std::vector<std::string> HypernetForecaster::parameter_names() const {
    std::vector<std::string> names = net_.parameter_names();
    for (const auto& n : store_.parameter_names()) names.push_back(n);
    return names;
}

ParamCounts HypernetForecaster::param_counts() const {
    return count_parameters(net_, store_);
}

GlobalLinearForecaster::GlobalLinearForecaster(int n_consumers, const TrainConfig& cfg)
    : n_consumers_(n_consumers) {
    const FactorSelection sel = cfg.selection();
    const int id_dim = sel.consumer_id ? cfg.id_embed_dim : 0;
    model_ = GlobalLinearModel(sel.input_channels(), cfg.input_len, cfg.horizon, n_consumers,
                               id_dim, cfg.seed);
}

Tensor GlobalLinearForecaster::forecast(const WindowBatchItem& item) const {
    return model_.forecast(item.input, item.input_mean, item.window.consumer_id);
}

ParamCounts GlobalLinearForecaster::param_counts() const {
    const size_t id_params = model_.id_embed_dim() > 0
                                 ? static_cast<size_t>(n_consumers_) *
                                       static_cast<size_t>(model_.id_embed_dim())
                                 : 0;
    return {model_.parameter_count() - id_params, id_params};
}

int GlobalLinearForecaster::consumer_capacity() const {
    return model_.id_embed_dim() > 0 ? n_consumers_ : std::numeric_limits<int>::max();
}

IndividualForecaster::IndividualForecaster(int n_consumers, const TrainConfig& cfg)
    : bank_(n_consumers, cfg.selection().input_channels(), cfg.input_len, cfg.horizon) {}

Tensor IndividualForecaster::forecast(const WindowBatchItem& item) const {
    return bank_.forecast(item.window.consumer_id, item.input, item.input_mean);
}

std::unique_ptr<ForecastModel> make_model(ModelKind kind, int n_consumers,
                                          const TrainConfig& cfg) {
    switch (kind) {
        case ModelKind::Hypernet:
            return std::make_unique<HypernetForecaster>(n_consumers, cfg);
        case ModelKind::GlobalLinear:
            return std::make_unique<GlobalLinearForecaster>(n_consumers, cfg);
        case ModelKind::IndividualLinear:
            return std::make_unique<IndividualForecaster>(n_consumers, cfg);
    }
    throw ConfigError("unknown model kind");
}

// ---- Evaluation -----------------------------------------------------------------

namespace {

uint64_t context_key(int consumer_id, const CategoricalContext& ctx) {
    uint64_t key = static_cast<uint64_t>(consumer_id) << 24;
    key |= static_cast<uint64_t>(ctx.hour) << 19;
    key |= static_cast<uint64_t>(ctx.day_of_week) << 16;
    key |= static_cast<uint64_t>(ctx.day_of_month) << 11;
    key |= static_cast<uint64_t>(ctx.month) << 7;
    key |= static_cast<uint64_t>(ctx.school_holiday) << 6;
    key |= static_cast<uint64_t>(ctx.public_holiday) << 5;
    for (int k = 0; k < kNumTeams; ++k)
        key |= static_cast<uint64_t>(ctx.teams[static_cast<size_t>(k)]) << k;
    return key;
}

} // namespace

SplitMetrics evaluate_split(const ForecastModel& model, const DatasetFrame& norm_frame,
                            const std::vector<ForecastWindow>& windows,
                            const TrainConfig& cfg, std::map<int, SplitMetrics>* per_consumer,
                            std::vector<int>* skipped) {
    const FactorSelection sel = cfg.selection();
    const int capacity = model.consumer_capacity();
    std::vector<const ForecastWindow*> usable;
    usable.reserve(windows.size());
    std::vector<int> skipped_ids;
    for (const auto& w : windows) {
        if (w.consumer_id >= capacity) {
            if (skipped_ids.empty() || skipped_ids.back() != w.consumer_id)
                skipped_ids.push_back(w.consumer_id);
            continue;
        }
        usable.push_back(&w);
    }
    if (skipped != nullptr) {
        std::sort(skipped_ids.begin(), skipped_ids.end());
        skipped_ids.erase(std::unique(skipped_ids.begin(), skipped_ids.end()),
                          skipped_ids.end());
        *skipped = skipped_ids;
    }

    SplitMetrics metrics;
    metrics.windows = usable.size();
    if (usable.empty()) return metrics;

    const auto* hypernet = dynamic_cast<const HypernetForecaster*>(&model);
    std::vector<double> sq(usable.size()), ab(usable.size());
    const int lanes = workers_for(usable.size());
    std::vector<std::unordered_map<uint64_t, Tensor>> weight_caches(
        static_cast<size_t>(lanes));

    parallel_for_lanes(usable.size(), [&](size_t i, int lane) {
        NoGradGuard no_grad;
        const ForecastWindow& w = *usable[i];
        WindowBatchItem item =
            materialize_window(norm_frame, w, cfg.input_len, cfg.horizon, sel);
        Tensor y;
        if (hypernet != nullptr) {
            // Generated weights depend only on (consumer, context); reuse
            // them across windows sharing both.
            auto& cache = weight_caches[static_cast<size_t>(lane)];
            const uint64_t key = context_key(w.consumer_id, w.context);
            auto it = cache.find(key);
            if (it == cache.end())
                it = cache.emplace(key, hypernet->generated_weights(w.consumer_id, w.context))
                         .first;
            y = hypernet->forecast_from(it->second, item);
        } else {
            y = model.forecast(item);
        }
        double s = 0.0, a = 0.0;
        for (size_t j = 0; j < item.target.size(); ++j) {
            const double err = y[j] - item.target[j];
            s += err * err;
            a += std::fabs(err);
        }
        sq[i] = s;
        ab[i] = a;
    });

    double sq_sum = 0.0, ab_sum = 0.0;
    std::map<int, std::pair<double, size_t>> consumer_acc;
    for (size_t i = 0; i < usable.size(); ++i) {
        sq_sum += sq[i];
        ab_sum += ab[i];
        if (per_consumer != nullptr) {
            auto& acc = consumer_acc[usable[i]->consumer_id];
            acc.first += sq[i];
            acc.second += static_cast<size_t>(cfg.horizon);
        }
    }
    const double points =
        static_cast<double>(usable.size()) * static_cast<double>(cfg.horizon);
    metrics.mse = sq_sum / points;
    metrics.mae = ab_sum / points;
    if (usable.size() > 1) {
        double var = 0.0;
        for (size_t i = 0; i < usable.size(); ++i) {
            const double wm = sq[i] / static_cast<double>(cfg.horizon);
            var += (wm - metrics.mse) * (wm - metrics.mse);
        }
        var /= static_cast<double>(usable.size() - 1);
        metrics.mse_se = std::sqrt(var / static_cast<double>(usable.size()));
    }
    if (per_consumer != nullptr) {
        per_consumer->clear();
        for (auto& [cid, acc] : consumer_acc) {
            SplitMetrics m;
            m.mse = acc.first / static_cast<double>(acc.second);
            m.windows = acc.second / static_cast<size_t>(cfg.horizon);
            (*per_consumer)[cid] = m;
        }
    }
    return metrics;
}

// ---- Training --------------------------------------------------------------------

namespace {

std::vector<std::vector<double>> snapshot_params(const std::vector<Tensor>& params) {
    std::vector<std::vector<double>> snap;
    snap.reserve(params.size());
    for (const auto& p : params) snap.push_back(p.data());
    return snap;
}

void restore_params(std::vector<Tensor>& params,
                    const std::vector<std::vector<double>>& snap) {
    for (size_t i = 0; i < params.size(); ++i) params[i].mutable_data() = snap[i];
}

std::vector<ForecastWindow> select_val_subset(const std::vector<ForecastWindow>& val_windows,
                                              const TrainConfig& cfg) {
    if (cfg.max_val_windows == 0 || val_windows.size() <= cfg.max_val_windows)
        return val_windows;
    std::vector<size_t> order(val_windows.size());
    std::iota(order.begin(), order.end(), size_t{0});
    Rng rng(derive_seed(cfg.seed, "val-subset"));
    rng.shuffle(order);
    std::vector<ForecastWindow> subset;
    subset.reserve(cfg.max_val_windows);
    for (size_t i = 0; i < cfg.max_val_windows; ++i) subset.push_back(val_windows[order[i]]);
    return subset;
}

// One mini-batch: forward/backward per item (items run on worker lanes,
// leaf gradients reduced in lane order), then an optimizer step.
// Returns the batch-mean MSE.
struct BatchStats {
    double mse = 0.0;
    double mae = 0.0;
};

BatchStats run_batch(ForecastModel& model, const DatasetFrame& frame,
                     const std::vector<ForecastWindow>& windows,
                     const std::vector<size_t>& order, size_t start, size_t count,
                     const FactorSelection& sel, const TrainConfig& cfg, AdamOptimizer& opt) {
    opt.zero_grad();
    std::vector<double> item_mse(count, 0.0), item_mae(count, 0.0);
    const int lanes = workers_for(count);
    std::vector<MapGradSink> sinks(static_cast<size_t>(lanes));
    parallel_for_lanes(count, [&](size_t bi, int lane) {
        const ForecastWindow& w = windows[order[start + bi]];
        WindowBatchItem item = materialize_window(frame, w, cfg.input_len, cfg.horizon, sel);
        Tensor target = Tensor::from_data({cfg.horizon}, item.target);
        Tensor y = model.forecast(item);
        Tensor loss = mse(y, target);
        item_mse[bi] = loss.value();
        double abs_sum = 0.0;
        for (size_t j = 0; j < item.target.size(); ++j)
            abs_sum += std::fabs(y[j] - item.target[j]);
        item_mae[bi] = abs_sum / static_cast<double>(item.target.size());
        backward(loss, sinks[static_cast<size_t>(lane)], 1.0 / static_cast<double>(count));
    });
    for (auto& sink : sinks) sink.flush();
    BatchStats stats;
    for (size_t i = 0; i < count; ++i) {
        stats.mse += item_mse[i];
        stats.mae += item_mae[i];
    }
    stats.mse /= static_cast<double>(count);
    stats.mae /= static_cast<double>(count);
    if (!std::isfinite(stats.mse))
        throw NumericError("training loss became non-finite; lower the learning rate "
                           "(current " +
                           std::to_string(cfg.learning_rate) + ") or check the input scaling");
    opt.step();
    return stats;
}

void train_minibatch(ForecastModel& model, const DatasetFrame& frame,
                     const std::vector<ForecastWindow>& train_windows,
                     const std::vector<ForecastWindow>& val_windows, const TrainConfig& cfg,
                     MetricsReport& report) {
    std::vector<Tensor> params = model.parameters();
    AdamOptimizer opt(params, cfg.learning_rate);
    const FactorSelection sel = cfg.selection();
    const std::vector<ForecastWindow> val_subset = select_val_subset(val_windows, cfg);

    double best_val = std::numeric_limits<double>::infinity();
    SplitMetrics best_val_metrics;
    std::vector<std::vector<double>> best_snap;
    std::vector<double> epoch_mae_history;
    int epochs_since_improvement = 0;

    std::vector<size_t> order(train_windows.size());
    std::iota(order.begin(), order.end(), size_t{0});

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(cfg.seed, "shuffle", static_cast<uint64_t>(epoch)));
        shuffle_rng.shuffle(order);
        const size_t epoch_n = cfg.max_windows_per_epoch == 0
                                   ? order.size()
                                   : std::min(order.size(), cfg.max_windows_per_epoch);
        double epoch_mse_sum = 0.0, epoch_mae_sum = 0.0;
        size_t epoch_items = 0;
        for (size_t start = 0; start < epoch_n; start += static_cast<size_t>(cfg.batch_size)) {
            const size_t count =
                std::min(static_cast<size_t>(cfg.batch_size), epoch_n - start);
            const BatchStats stats = run_batch(model, frame, train_windows, order, start,
                                               count, sel, cfg, opt);
            epoch_mse_sum += stats.mse * static_cast<double>(count);
            epoch_mae_sum += stats.mae * static_cast<double>(count);
            epoch_items += count;
        }
        report.train_mse_history.push_back(epoch_mse_sum / static_cast<double>(epoch_items));
        epoch_mae_history.push_back(epoch_mae_sum / static_cast<double>(epoch_items));
        report.epochs_run = epoch + 1;

        SplitMetrics val = evaluate_split(model, frame, val_subset, cfg);
        report.val_mse_history.push_back(val.mse);
        log_info("epoch ", epoch, ": train mse ", report.train_mse_history.back(),
                 ", val mse ", val.mse);
        if (val.mse < best_val) {
            best_val = val.mse;
            best_val_metrics = val;
            best_snap = snapshot_params(params);
            report.best_epoch = epoch;
            epochs_since_improvement = 0;
        } else if (++epochs_since_improvement >= cfg.early_stop_patience) {
            break;
        }
    }
    if (!best_snap.empty()) restore_params(params, best_snap);
    report.val = best_val_metrics;
    const size_t pick = report.best_epoch >= 0 ? static_cast<size_t>(report.best_epoch)
                                               : report.train_mse_history.size() - 1;
    report.train.mse = report.train_mse_history[pick];
    report.train.mae = epoch_mae_history[pick];
    report.train.windows = train_windows.size();
}

void train_individual(IndividualForecaster& model, const DatasetFrame& frame,
                      const std::vector<ForecastWindow>& train_windows,
                      const std::vector<ForecastWindow>& val_windows, const TrainConfig& cfg,
                      MetricsReport& report) {
    const int n = model.bank().consumers();
    std::vector<std::vector<ForecastWindow>> train_by(static_cast<size_t>(n));
    std::vector<std::vector<ForecastWindow>> val_by(static_cast<size_t>(n));
    for (const auto& w : train_windows)
        if (w.consumer_id < n) train_by[static_cast<size_t>(w.consumer_id)].push_back(w);
    for (const auto& w : val_windows)
        if (w.consumer_id < n) val_by[static_cast<size_t>(w.consumer_id)].push_back(w);
    const FactorSelection sel = cfg.selection();

    // Disjoint parameters per consumer: train them independently.
    parallel_for(static_cast<size_t>(n), [&](size_t ci) {
        const auto& cons_train = train_by[ci];
        const auto& cons_val = val_by[ci];
        if (cons_train.empty()) return;
        std::vector<Tensor> params = model.bank().parameters_for(static_cast<int>(ci));
        AdamOptimizer opt(params, cfg.learning_rate);
        auto eval_local = [&](const std::vector<ForecastWindow>& ws) {
            NoGradGuard no_grad;
            double sq = 0.0;
            for (const auto& w : ws) {
                WindowBatchItem item =
                    materialize_window(frame, w, cfg.input_len, cfg.horizon, sel);
                Tensor y = model.forecast(item);
                for (size_t j = 0; j < item.target.size(); ++j) {
                    const double err = y[j] - item.target[j];
                    sq += err * err;
                }
            }
            return sq / (static_cast<double>(ws.size()) * cfg.horizon);
        };

        double best_val = std::numeric_limits<double>::infinity();
        std::vector<std::vector<double>> best_snap;
        int since = 0;
        std::vector<size_t> order(cons_train.size());
        std::iota(order.begin(), order.end(), size_t{0});
        Rng shuffle_rng(derive_seed(cfg.seed, "individual", ci));
        for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
            shuffle_rng.shuffle(order);
            for (size_t start = 0; start < order.size();
                 start += static_cast<size_t>(cfg.batch_size)) {
                const size_t count =
                    std::min(static_cast<size_t>(cfg.batch_size), order.size() - start);
                opt.zero_grad();
                for (size_t bi = 0; bi < count; ++bi) {
                    const ForecastWindow& w = cons_train[order[start + bi]];
                    WindowBatchItem item =
                        materialize_window(frame, w, cfg.input_len, cfg.horizon, sel);
                    Tensor target = Tensor::from_data({cfg.horizon}, item.target);
                    Tensor loss = mse(model.forecast(item), target);
                    if (!std::isfinite(loss.value()))
                        throw NumericError(
                            "individual training loss became non-finite; lower the "
                            "learning rate");
                    backward(loss, 1.0 / static_cast<double>(count));
                }
                opt.step();
            }
            const double val_mse = cons_val.empty() ? eval_local(cons_train)
                                                    : eval_local(cons_val);
            if (val_mse < best_val) {
                best_val = val_mse;
                best_snap = snapshot_params(params);
                since = 0;
            } else if (++since >= cfg.early_stop_patience) {
                break;
            }
        }
        if (!best_snap.empty()) restore_params(params, best_snap);
    });

    report.epochs_run = cfg.max_epochs;
    report.train = evaluate_split(model, frame, train_windows, cfg);
    report.val = evaluate_split(model, frame, val_windows, cfg);
}

} // namespace

MetricsReport train_model(ForecastModel& model, const DatasetFrame& norm_frame,
                          const std::vector<ForecastWindow>& train_windows,
                          const std::vector<ForecastWindow>& val_windows,
                          const TrainConfig& cfg) {
    cfg.validate();
    if (train_windows.empty()) throw ConfigError("training requires at least one window");
    if (val_windows.empty()) throw ConfigError("training requires validation windows");
    const auto t0 = std::chrono::steady_clock::now();

    MetricsReport report;
    report.config_echo = cfg.to_json();
    const ParamCounts counts = model.param_counts();
    report.model_params = counts.hypernet;
    report.embedding_params = counts.embeddings;

    if (auto* individual = dynamic_cast<IndividualForecaster*>(&model))
        train_individual(*individual, norm_frame, train_windows, val_windows, cfg, report);
    else
        train_minibatch(model, norm_frame, train_windows, val_windows, cfg, report);

    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

void adapt_embeddings(HypernetForecaster& model, const DatasetFrame& norm_frame,
                      const std::vector<ForecastWindow>& windows,
                      const std::vector<int>& consumer_ids, const TrainConfig& cfg) {
    cfg.validate();
    std::unordered_map<int, std::vector<const ForecastWindow*>> by_consumer;
    for (const auto& w : windows) by_consumer[w.consumer_id].push_back(&w);
    for (int cid : consumer_ids) {
        if (cid < 0 || cid >= model.store().consumers())
            throw IndexError("adaptation: consumer " + std::to_string(cid) +
                             " has no embedding row (grow the store first)");
        auto it = by_consumer.find(cid);
        if (it == by_consumer.end() || it->second.empty())
            throw ArgumentError("adaptation: no windows for consumer " + std::to_string(cid));
    }

    // Freeze the decoder and every non-consumer table for the duration.
    std::vector<Tensor> frozen = model.net().parameters();
    {
        auto store_params = model.store().parameters();
        for (size_t i = 1; i < store_params.size(); ++i) frozen.push_back(store_params[i]);
    }
    for (auto& p : frozen) p.set_requires_grad(false);

    const FactorSelection sel = model.selection();
    Tensor table = model.store().consumer_table();

    parallel_for(consumer_ids.size(), [&](size_t idx) {
        const int cid = consumer_ids[idx];
        const auto& cons_windows = by_consumer[cid];
        // Local copy of the row; everything else stays untouched.
        std::vector<double> row_data(
            table.data().begin() + static_cast<long>(cid) * kConsumerEmbedDim,
            table.data().begin() + static_cast<long>(cid + 1) * kConsumerEmbedDim);
        Tensor row = Tensor::from_data({kConsumerEmbedDim}, std::move(row_data), true);
        AdamOptimizer opt({row}, cfg.learning_rate);
        Rng rng(derive_seed(cfg.seed, "adapt", static_cast<uint64_t>(cid)));
        const size_t batch =
            std::min<size_t>(static_cast<size_t>(cfg.adapt_batch), cons_windows.size());
        for (int step = 0; step < cfg.adapt_steps; ++step) {
            opt.zero_grad();
            for (size_t bi = 0; bi < batch; ++bi) {
                const ForecastWindow& w =
                    *cons_windows[rng.uniform_int(cons_windows.size())];
                WindowBatchItem item =
                    materialize_window(norm_frame, w, cfg.input_len, cfg.horizon, sel);
                Tensor target = Tensor::from_data({cfg.horizon}, item.target);
                Tensor loss = mse(model.forecast_with_embedding(row, item), target);
                backward(loss, 1.0 / static_cast<double>(batch));
            }
            opt.step();
        }
        // Disjoint row ranges: safe to write back concurrently.
        std::copy(row.data().begin(), row.data().end(),
                  table.mutable_data().begin() + static_cast<long>(cid) * kConsumerEmbedDim);
    });

    for (auto& p : frozen) p.set_requires_grad(true);
}

ExperimentResult run_experiment(const DatasetFrame& raw_frame, const TrainConfig& cfg) {
    cfg.validate();
    if (cfg.workers > 0) set_worker_cap(cfg.workers);
    const size_t need = static_cast<size_t>(cfg.input_len) + static_cast<size_t>(cfg.horizon);
    Splits splits = chronological_split(raw_frame.hours(), cfg.ratios, need);
    NormalizationSpec norm = fit_normalizer(raw_frame, splits.train);
    DatasetFrame frame = norm.apply(raw_frame);
    auto train_w = make_windows(frame, splits.train, cfg.input_len, cfg.horizon, cfg.stride);
    const size_t val_stride = cfg.val_stride == 0 ? cfg.eval_stride : cfg.val_stride;
    auto val_w = make_windows(frame, splits.val, cfg.input_len, cfg.horizon, val_stride);
    auto test_w = make_windows(frame, splits.test, cfg.input_len, cfg.horizon, cfg.eval_stride);

    std::shared_ptr<ForecastModel> model = make_model(cfg.model, frame.consumers(), cfg);
    MetricsReport report = train_model(*model, frame, train_w, val_w, cfg);
    report.test = evaluate_split(*model, frame, test_w, cfg, &report.per_consumer,
                                 &report.skipped_consumers);
    return ExperimentResult{std::move(model), std::move(report), std::move(norm), splits};
}

std::vector<AblationRow> run_ablation(const DatasetFrame& raw_frame, const TrainConfig& cfg) {
    const char* groups[] = {"weather", "datetime", "events", "none"};
    std::vector<AblationRow> rows;
    for (const char* group : groups) {
        std::vector<SplitMetrics> runs;
        for (int rep = 0; rep < cfg.repetitions; ++rep) {
            TrainConfig run_cfg = cfg;
            run_cfg.model = ModelKind::Hypernet;
            run_cfg.factors = FactorsMode::All;
            run_cfg.ablation = {};
            if (std::string(group) == "weather") run_cfg.ablation.drop_weather = true;
            if (std::string(group) == "datetime") run_cfg.ablation.drop_datetime = true;
            if (std::string(group) == "events") run_cfg.ablation.drop_events = true;
            run_cfg.seed = derive_seed(cfg.seed, "ablation-rep", static_cast<uint64_t>(rep));
            log_info("ablation: removed=", group, " rep=", rep);
            runs.push_back(run_experiment(raw_frame, run_cfg).report.test);
        }
        rows.push_back(AblationRow{group, aggregate_runs(runs)});
    }
    return rows;
}

} // namespace hyperfc

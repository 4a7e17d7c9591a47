// hyperfc: per-household electricity forecasting with a weight-generating
// network, linear baselines, a synthetic panel generator and reproducible
// experiment plumbing.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "hyperfc/checkpoint.hpp"
#include "hyperfc/config.hpp"
#include "hyperfc/error.hpp"
#include "hyperfc/log.hpp"
#include "hyperfc/parallel.hpp"
#include "hyperfc/synthgen.hpp"
#include "hyperfc/timeutil.hpp"
#include "hyperfc/training.hpp"

namespace fs = std::filesystem;
using namespace hyperfc;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> overrides;  // key=value
    std::string model;
    std::string factors;
    int64_t seed = -1;
    int workers = -1;
    std::string out;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool with_model = true) {
    cmd->add_option("--config", args.config_path, "experiment config file (key = value)");
    cmd->add_option("--set", args.overrides, "override a config key, e.g. --set stride=48")
        ->take_all();
    if (with_model) {
        cmd->add_option("--model", args.model,
                        "hypernet | global_linear | individual_linear");
        cmd->add_option("--factors", args.factors, "none | id_only | all");
    }
    cmd->add_option("--seed", args.seed, "random seed (overrides the config)");
    cmd->add_option("--workers", args.workers, "worker thread cap (0 = hardware)");
    cmd->add_option("--out", args.out, "output directory");
}

ExperimentConfig resolve_config(const CommonArgs& args) {
    ExperimentConfig cfg;
    if (!args.config_path.empty()) cfg = ExperimentConfig::load(args.config_path);
    for (const auto& kv : args.overrides) {
        const size_t eq = kv.find('=');
        if (eq == std::string::npos)
            throw ConfigError("--set expects key=value, got '" + kv + "'");
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!args.model.empty()) cfg.train.model = model_kind_from_name(args.model);
    if (!args.factors.empty()) cfg.train.factors = factors_mode_from_name(args.factors);
    if (args.seed >= 0) {
        cfg.train.seed = static_cast<uint64_t>(args.seed);
        cfg.generator.seed = static_cast<uint64_t>(args.seed);
    }
    if (args.workers >= 0) cfg.train.workers = args.workers;
    if (!args.out.empty()) cfg.out_dir = args.out;
    if (cfg.train.workers > 0) set_worker_cap(cfg.train.workers);
    return cfg;
}

CsvPaths default_paths(const ExperimentConfig& cfg, const std::string& dir) {
    CsvPaths paths = cfg.data;
    if (paths.consumption.empty()) paths.consumption = dir + "/consumption.csv";
    if (paths.weather.empty()) paths.weather = dir + "/weather.csv";
    if (paths.calendar.empty()) paths.calendar = dir + "/calendar.csv";
    if (paths.events.empty()) paths.events = dir + "/events.csv";
    return paths;
}

DatasetFrame load_frame(const ExperimentConfig& cfg) {
    if (cfg.data.consumption.empty())
        throw ConfigError("no dataset configured; set data.consumption/... or --set them");
    return load_csv(cfg.data);
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << text;
}

void write_report(const ExperimentConfig& cfg, const MetricsReport& report,
                  const std::string& stem) {
    fs::create_directories(cfg.out_dir);
    nlohmann::json j = report.to_json();
    j["experiment"] = cfg.echo();
    write_text(cfg.out_dir + "/" + stem + ".json", j.dump(2) + "\n");
    write_text(cfg.out_dir + "/" + stem + ".txt", report.to_table());
    std::cout << report.to_table();
}

int cmd_generate(const CommonArgs& args, bool force) {
    ExperimentConfig cfg = resolve_config(args);
    fs::create_directories(cfg.out_dir);
    CsvPaths paths = default_paths(ExperimentConfig{}, cfg.out_dir);
    const std::string registry_path = cfg.out_dir + "/registry.json";
    if (!force) {
        for (const std::string& p :
             {paths.consumption, paths.weather, paths.calendar, paths.events, registry_path})
            if (fs::exists(p))
                throw DataError("refusing to overwrite " + p + " (use --force)");
    }
    SynthResult result = generate(cfg.generator);
    write_csv(result.frame, paths);
    result.registry.save(registry_path);
    std::cout << "generated " << result.frame.consumers() << " consumers x "
              << result.frame.hours() << " hours into " << cfg.out_dir << "\n";
    return kExitOk;
}

int cmd_train(const CommonArgs& args) {
    ExperimentConfig cfg = resolve_config(args);
    DatasetFrame frame = load_frame(cfg);
    ExperimentResult result = run_experiment(frame, cfg.train);
    fs::create_directories(cfg.out_dir);
    const std::string ckpt =
        cfg.out_dir + "/" + model_kind_name(cfg.train.model) + ".ckpt";
    save_checkpoint(ckpt, *result.model, cfg.train, result.norm);
    write_report(cfg, result.report, "metrics");
    std::cout << "checkpoint written to " << ckpt << "\n";
    return kExitOk;
}

int cmd_evaluate(const CommonArgs& args, const std::string& ckpt_path) {
    ExperimentConfig cfg = resolve_config(args);
    LoadedCheckpoint ckpt = load_checkpoint(ckpt_path);
    DatasetFrame raw = load_frame(cfg);
    const TrainConfig& tc = ckpt.config;
    const size_t need = static_cast<size_t>(tc.input_len) + static_cast<size_t>(tc.horizon);
    Splits splits = chronological_split(raw.hours(), tc.ratios, need);
    DatasetFrame frame = ckpt.norm.apply(raw);

    MetricsReport report;
    report.config_echo = tc.to_json();
    const ParamCounts counts = ckpt.model->param_counts();
    report.model_params = counts.hypernet;
    report.embedding_params = counts.embeddings;
    auto eval = [&](const SplitRange& seg) {
        auto windows = make_windows(frame, seg, tc.input_len, tc.horizon, tc.eval_stride);
        return evaluate_split(*ckpt.model, frame, windows, tc);
    };
    report.train = eval(splits.train);
    report.val = eval(splits.val);
    auto test_windows =
        make_windows(frame, splits.test, tc.input_len, tc.horizon, tc.eval_stride);
    report.test = evaluate_split(*ckpt.model, frame, test_windows, tc, &report.per_consumer,
                                 &report.skipped_consumers);
    write_report(cfg, report, "evaluate");
    if (!report.skipped_consumers.empty()) {
        std::cout << "skipped consumers (no embedding; run adapt):";
        for (int cid : report.skipped_consumers) std::cout << " " << cid;
        std::cout << "\n";
    }
    return kExitOk;
}

int cmd_forecast(const CommonArgs& args, const std::string& ckpt_path, int consumer,
                 const std::string& origin_iso, bool kwh, const std::string& out_file) {
    ExperimentConfig cfg = resolve_config(args);
    LoadedCheckpoint ckpt = load_checkpoint(ckpt_path);
    DatasetFrame raw = load_frame(cfg);
    const TrainConfig& tc = ckpt.config;
    DatasetFrame frame = ckpt.norm.apply(raw);

    if (consumer < 0 || consumer >= frame.consumers())
        throw IndexError("consumer " + std::to_string(consumer) +
                         " is not in the dataset (0.." +
                         std::to_string(frame.consumers() - 1) + ")");
    if (consumer >= ckpt.model->consumer_capacity())
        throw IndexError("consumer " + std::to_string(consumer) +
                         " has no embedding in this checkpoint; run the adapt command");

    const int64_t origin_epoch = parse_iso_hour(origin_iso);
    const int64_t offset = (origin_epoch - frame.timestamps.front()) / kSecondsPerHour;
    const int64_t origin_index = offset - tc.input_len;
    if (origin_index < 0 ||
        static_cast<size_t>(offset + tc.horizon) > frame.hours())
        throw ArgumentError("forecast origin " + origin_iso + " needs " +
                            std::to_string(tc.input_len) + " hours of history and " +
                            std::to_string(tc.horizon) + " hours ahead inside the dataset");

    ForecastWindow w;
    w.consumer_id = consumer;
    w.origin = static_cast<size_t>(origin_index);
    w.context = window_context(frame, w.origin, tc.input_len, tc.horizon);
    WindowBatchItem item =
        materialize_window(frame, w, tc.input_len, tc.horizon, tc.selection());
    NoGradGuard no_grad;
    Tensor y = ckpt.model->forecast(item);

    std::ostringstream os;
    os << "timestamp,value\n";
    for (int j = 0; j < tc.horizon; ++j) {
        const double v = kwh ? ckpt.norm.consumption.invert(y[static_cast<size_t>(j)])
                             : y[static_cast<size_t>(j)];
        os << format_iso_hour(origin_epoch + static_cast<int64_t>(j) * kSecondsPerHour) << ','
           << v << '\n';
    }
    if (out_file.empty()) {
        std::cout << os.str();
    } else {
        write_text(out_file, os.str());
        std::cout << "forecast written to " << out_file << "\n";
    }
    return kExitOk;
}

int cmd_adapt(const CommonArgs& args, const std::string& ckpt_path,
              const std::string& out_ckpt) {
    ExperimentConfig cfg = resolve_config(args);
    LoadedCheckpoint ckpt = load_checkpoint(ckpt_path);
    auto* model = dynamic_cast<HypernetForecaster*>(ckpt.model.get());
    if (model == nullptr)
        throw ConfigError("embedding adaptation applies to hypernet checkpoints only");
    DatasetFrame raw = load_frame(cfg);
    // The checkpoint carries the training-time config; explicitly given
    // keys and flags override it for the adaptation run.
    TrainConfig tc = ckpt.config;
    if (cfg.explicitly_set("adapt_steps")) tc.adapt_steps = cfg.train.adapt_steps;
    if (cfg.explicitly_set("adapt_batch")) tc.adapt_batch = cfg.train.adapt_batch;
    if (cfg.explicitly_set("stride")) tc.stride = cfg.train.stride;
    if (cfg.explicitly_set("learning_rate")) tc.learning_rate = cfg.train.learning_rate;
    if (cfg.explicitly_set("workers")) tc.workers = cfg.train.workers;
    if (cfg.explicitly_set("seed")) tc.seed = cfg.train.seed;
    if (args.workers >= 0) tc.workers = args.workers;
    if (args.seed >= 0) tc.seed = static_cast<uint64_t>(args.seed);

    const size_t need = static_cast<size_t>(tc.input_len) + static_cast<size_t>(tc.horizon);
    Splits splits = chronological_split(raw.hours(), tc.ratios, need);
    DatasetFrame frame = ckpt.norm.apply(raw);

    const int old_n = model->store().consumers();
    if (frame.consumers() <= old_n)
        throw ConfigError("dataset has no consumers beyond the checkpoint's " +
                          std::to_string(old_n));
    model->store().grow_consumers(frame.consumers(), tc.seed);

    auto windows = make_windows(frame, splits.train, tc.input_len, tc.horizon, tc.stride);
    std::vector<ForecastWindow> new_windows;
    std::vector<int> new_ids;
    for (const auto& w : windows)
        if (w.consumer_id >= old_n) new_windows.push_back(w);
    for (int i = old_n; i < frame.consumers(); ++i) new_ids.push_back(i);

    adapt_embeddings(*model, frame, new_windows, new_ids, tc);

    const std::string out_path = out_ckpt.empty()
                                     ? (fs::path(cfg.out_dir) / "hypernet_adapted.ckpt").string()
                                     : out_ckpt;
    fs::create_directories(fs::path(out_path).parent_path().empty()
                               ? "."
                               : fs::path(out_path).parent_path().string());
    save_checkpoint(out_path, *model, tc, ckpt.norm);
    std::cout << "adapted " << new_ids.size() << " consumers (" << old_n << ".."
              << frame.consumers() - 1 << "), checkpoint written to " << out_path << "\n";
    return kExitOk;
}

int cmd_ablate(const CommonArgs& args) {
    ExperimentConfig cfg = resolve_config(args);
    DatasetFrame frame = load_frame(cfg);
    std::vector<AblationRow> rows = run_ablation(frame, cfg.train);
    fs::create_directories(cfg.out_dir);
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : rows) {
        nlohmann::json row = {{"removed", r.removed},
                              {"reps", r.stats.reps},
                              {"mse_mean", r.stats.mse_mean},
                              {"mae_mean", r.stats.mae_mean}};
        if (r.stats.mse_se) row["mse_se"] = *r.stats.mse_se;
        if (r.stats.mae_se) row["mae_se"] = *r.stats.mae_se;
        j.push_back(row);
    }
    nlohmann::json out = {{"rows", j}, {"experiment", cfg.echo()}};
    write_text(cfg.out_dir + "/ablation.json", out.dump(2) + "\n");
    const std::string table = ablation_table(rows, true);
    write_text(cfg.out_dir + "/ablation.txt", table);
    std::cout << table;
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    tune_allocator_for_tensors();
    CLI::App app{"household electricity forecasting with a weight-generating network"};
    app.require_subcommand(1);

    CommonArgs gen_args, train_args, eval_args, fc_args, adapt_args, ablate_args;
    bool force = false;
    std::string eval_ckpt, fc_ckpt, adapt_ckpt, adapt_out;
    int fc_consumer = 0;
    std::string fc_origin, fc_out;
    bool fc_kwh = false;

    CLI::App* generate = app.add_subcommand("generate", "write a synthetic panel as CSVs");
    add_common(generate, gen_args, false);
    generate->add_flag("--force", force, "overwrite existing output files");

    CLI::App* train = app.add_subcommand("train", "train a model and save a checkpoint");
    add_common(train, train_args);

    CLI::App* evaluate = app.add_subcommand("evaluate", "evaluate a checkpoint on a dataset");
    add_common(evaluate, eval_args, false);
    evaluate->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();

    CLI::App* forecast =
        app.add_subcommand("forecast", "emit one consumer forecast as CSV");
    add_common(forecast, fc_args, false);
    forecast->add_option("--checkpoint", fc_ckpt, "checkpoint file")->required();
    forecast->add_option("--consumer", fc_consumer, "consumer id")->required();
    forecast->add_option("--origin", fc_origin, "first forecast hour (ISO-8601 UTC)")
        ->required();
    forecast->add_flag("--kwh", fc_kwh, "report kWh instead of normalized units");
    forecast->add_option("--out-file", fc_out, "output CSV path (default stdout)");

    CLI::App* adapt = app.add_subcommand(
        "adapt", "fit embeddings for new consumers with the decoder frozen");
    add_common(adapt, adapt_args, false);
    adapt->add_option("--checkpoint", adapt_ckpt, "checkpoint file")->required();
    adapt->add_option("--out-checkpoint", adapt_out, "adapted checkpoint path");

    CLI::App* ablate =
        app.add_subcommand("ablate", "hypernet error with factor groups removed");
    add_common(ablate, ablate_args, false);

    try {
        app.parse(argc, argv);
        if (generate->parsed()) return cmd_generate(gen_args, force);
        if (train->parsed()) return cmd_train(train_args);
        if (evaluate->parsed()) return cmd_evaluate(eval_args, eval_ckpt);
        if (forecast->parsed())
            return cmd_forecast(fc_args, fc_ckpt, fc_consumer, fc_origin, fc_kwh, fc_out);
        if (adapt->parsed()) return cmd_adapt(adapt_args, adapt_ckpt, adapt_out);
        if (ablate->parsed()) return cmd_ablate(ablate_args);
        std::cerr << app.help();
        return kExitUsage;
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitUsage;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
}

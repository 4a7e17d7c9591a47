#include <cstdio>
#include <sstream>

#include "hyperfc/training.hpp"

namespace hyperfc {

namespace {

nlohmann::json split_to_json(const SplitMetrics& m) {
    return {{"mse", m.mse}, {"mae", m.mae}, {"windows", m.windows}, {"mse_se", m.mse_se}};
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

} // namespace

nlohmann::json MetricsReport::to_json() const {
    nlohmann::json per;
    for (const auto& [cid, m] : per_consumer) per[std::to_string(cid)] = split_to_json(m);
    return {{"train", split_to_json(train)},
            {"val", split_to_json(val)},
            {"test", split_to_json(test)},
            {"per_consumer", per},
            {"skipped_consumers", skipped_consumers},
            {"train_mse_history", train_mse_history},
            {"val_mse_history", val_mse_history},
            {"wall_seconds", wall_seconds},
            {"model_params", model_params},
            {"embedding_params", embedding_params},
            {"total_params", model_params + embedding_params},
            {"epochs_run", epochs_run},
            {"best_epoch", best_epoch},
            {"config", config_echo}};
}

std::string MetricsReport::to_table() const {
    std::ostringstream os;
    const std::string model = config_echo.contains("model")
                                  ? config_echo.at("model").get<std::string>()
                                  : std::string("?");
    const std::string factors = config_echo.contains("factors")
                                    ? config_echo.at("factors").get<std::string>()
                                    : std::string("?");
    char line[160];
    os << "model: " << model << "   factors: " << factors << "\n";
    std::snprintf(line, sizeof(line), "%-8s %12s %12s %10s\n", "split", "MSE", "MAE",
                  "windows");
    os << line;
    auto row = [&](const char* name, const SplitMetrics& m) {
        std::snprintf(line, sizeof(line), "%-8s %12s %12s %10zu\n", name, fmt(m.mse).c_str(),
                      fmt(m.mae).c_str(), m.windows);
        os << line;
    };
    row("train", train);
    row("val", val);
    row("test", test);
    std::snprintf(line, sizeof(line),
                  "params: %zu model + %zu embeddings    epochs: %d (best %d)    %.1fs\n",
                  model_params, embedding_params, epochs_run, best_epoch, wall_seconds);
    os << line;
    return os.str();
}

std::string ablation_table(const std::vector<AblationRow>& rows, bool with_reference) {
    std::ostringstream os;
    char line[200];
    std::snprintf(line, sizeof(line), "%-12s %12s %12s %12s %12s\n", "removed", "MSE",
                  "+/-", "MAE", "+/-");
    os << line;
    for (const auto& r : rows) {
        std::snprintf(line, sizeof(line), "%-12s %12s %12s %12s %12s\n", r.removed.c_str(),
                      fmt(r.stats.mse_mean).c_str(),
                      r.stats.mse_se ? fmt(*r.stats.mse_se).c_str() : "-",
                      fmt(r.stats.mae_mean).c_str(),
                      r.stats.mae_se ? fmt(*r.stats.mae_se).c_str() : "-");
        os << line;
    }
    if (with_reference) {
        os << "reference results from the original panel (not reproducible here):\n";
        for (const auto& ref : kReferenceAblation) {
            std::snprintf(line, sizeof(line), "%-12s %12s %12s\n", ref.removed,
                          fmt(ref.mse).c_str(), fmt(ref.mae).c_str());
            os << line;
        }
    }
    return os.str();
}

} // namespace hyperfc

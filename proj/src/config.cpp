#include "hyperfc/config.hpp"

#include <charconv>
#include <fstream>

#include "hyperfc/error.hpp"

namespace hyperfc {

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r");
    size_t e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& value) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc() || p != value.data() + value.size())
        throw ConfigError("key '" + key + "': cannot parse number '" + value + "'");
    return v;
}

long long to_int(const std::string& key, const std::string& value) {
    long long v = 0;
    auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc() || p != value.data() + value.size())
        throw ConfigError("key '" + key + "': cannot parse integer '" + value + "'");
    return v;
}

bool to_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError("key '" + key + "': cannot parse boolean '" + value + "'");
}

} // namespace

void ExperimentConfig::set(const std::string& key, const std::string& value) {
    explicit_keys.insert(key);
    // Paths and outputs.
    if (key == "data.consumption") data.consumption = value;
    else if (key == "data.weather") data.weather = value;
    else if (key == "data.calendar") data.calendar = value;
    else if (key == "data.events") data.events = value;
    else if (key == "data.registry") registry_path = value;
    else if (key == "out") out_dir = value;
    // Training.
    else if (key == "model") train.model = model_kind_from_name(value);
    else if (key == "factors") train.factors = factors_mode_from_name(value);
    else if (key == "drop_weather") train.ablation.drop_weather = to_bool(key, value);
    else if (key == "drop_datetime") train.ablation.drop_datetime = to_bool(key, value);
    else if (key == "drop_events") train.ablation.drop_events = to_bool(key, value);
    else if (key == "drop_all_external")
        train.ablation.drop_all_external = to_bool(key, value);
    else if (key == "learning_rate") train.learning_rate = to_double(key, value);
    else if (key == "batch_size") train.batch_size = static_cast<int>(to_int(key, value));
    else if (key == "max_epochs") train.max_epochs = static_cast<int>(to_int(key, value));
    else if (key == "early_stop_patience")
        train.early_stop_patience = static_cast<int>(to_int(key, value));
    else if (key == "seed") train.seed = static_cast<uint64_t>(to_int(key, value));
    else if (key == "repetitions") train.repetitions = static_cast<int>(to_int(key, value));
    else if (key == "input_len") train.input_len = static_cast<int>(to_int(key, value));
    else if (key == "horizon") train.horizon = static_cast<int>(to_int(key, value));
    else if (key == "hidden") train.hidden = static_cast<int>(to_int(key, value));
    else if (key == "upscale") train.upscale = static_cast<int>(to_int(key, value));
    else if (key == "id_embed_dim")
        train.id_embed_dim = static_cast<int>(to_int(key, value));
    else if (key == "stride") train.stride = static_cast<size_t>(to_int(key, value));
    else if (key == "eval_stride")
        train.eval_stride = static_cast<size_t>(to_int(key, value));
    else if (key == "val_stride")
        train.val_stride = static_cast<size_t>(to_int(key, value));
    else if (key == "max_windows_per_epoch")
        train.max_windows_per_epoch = static_cast<size_t>(to_int(key, value));
    else if (key == "max_val_windows")
        train.max_val_windows = static_cast<size_t>(to_int(key, value));
    else if (key == "adapt_steps") train.adapt_steps = static_cast<int>(to_int(key, value));
    else if (key == "adapt_batch") train.adapt_batch = static_cast<int>(to_int(key, value));
    else if (key == "workers") train.workers = static_cast<int>(to_int(key, value));
    else if (key == "ratio_train") train.ratios.train = to_double(key, value);
    else if (key == "ratio_val") train.ratios.val = to_double(key, value);
    else if (key == "ratio_test") train.ratios.test = to_double(key, value);
    // Generator.
    else if (key == "gen.n_consumers")
        generator.n_consumers = static_cast<int>(to_int(key, value));
    else if (key == "gen.hours") generator.hours = static_cast<size_t>(to_int(key, value));
    else if (key == "gen.seed") generator.seed = static_cast<uint64_t>(to_int(key, value));
    else if (key == "gen.start_epoch") generator.start_epoch = to_int(key, value);
    else if (key == "gen.cluster_count")
        generator.cluster_count = static_cast<int>(to_int(key, value));
    else if (key == "gen.heating_fraction")
        generator.heating_fraction = to_double(key, value);
    else if (key == "gen.heating_sign_mix")
        generator.heating_sign_mix = to_double(key, value);
    else if (key == "gen.event_fraction") generator.event_fraction = to_double(key, value);
    else if (key == "gen.event_sign_mix") generator.event_sign_mix = to_double(key, value);
    else if (key == "gen.temp_sensitivity_scale")
        generator.temp_sensitivity_scale = to_double(key, value);
    else if (key == "gen.event_delta_scale")
        generator.event_delta_scale = to_double(key, value);
    else if (key == "gen.holiday_spread") generator.holiday_spread = to_double(key, value);
    else if (key == "gen.noise_scale") generator.noise_scale = to_double(key, value);
    else if (key == "gen.pattern_scale") generator.pattern_scale = to_double(key, value);
    else if (key == "gen.temp_mean") generator.temp_mean = to_double(key, value);
    else if (key == "gen.temp_annual_amp")
        generator.temp_annual_amp = to_double(key, value);
    else if (key == "gen.temp_daily_amp") generator.temp_daily_amp = to_double(key, value);
    else if (key == "gen.temp_ar_phi") generator.temp_ar_phi = to_double(key, value);
    else if (key == "gen.temp_ar_sigma") generator.temp_ar_sigma = to_double(key, value);
    else if (key == "gen.event_density") generator.event_density = to_double(key, value);
    else if (key == "gen.school_holiday_density")
        generator.school_holiday_density = to_double(key, value);
    else if (key == "gen.public_holiday_density")
        generator.public_holiday_density = to_double(key, value);
    else
        throw ConfigError("unknown configuration key '" + key + "'");
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    ExperimentConfig cfg;
    std::string line;
    size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + " line " + std::to_string(row) +
                              ": expected key = value");
        cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

nlohmann::json ExperimentConfig::echo() const {
    return {{"data",
             {{"consumption", data.consumption},
              {"weather", data.weather},
              {"calendar", data.calendar},
              {"events", data.events},
              {"registry", registry_path}}},
            {"out", out_dir},
            {"train", train.to_json()},
            {"generator", generator.to_json()}};
}

} // namespace hyperfc

#include "hyperfc/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "hyperfc/error.hpp"
#include "hyperfc/parallel.hpp"
#include "hyperfc/rng.hpp"
#include "hyperfc/timeutil.hpp"

namespace hyperfc {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// Rule-based Luxembourg-style calendar.
bool rule_public_holiday(int month, int day) {
    static constexpr std::pair<int, int> kDates[] = {
        {1, 1},  {4, 10}, {5, 1},  {5, 9},   {5, 21},  {6, 1},
        {6, 23}, {8, 15}, {11, 1}, {12, 25}, {12, 26},
    };
    for (auto [m, d] : kDates)
        if (m == month && d == day) return true;
    return false;
}

bool rule_school_holiday(int month, int day) {
    static constexpr std::array<std::array<int, 4>, 6> kRanges = {{
        {12, 20, 12, 31},
        {1, 1, 1, 5},
        {2, 10, 2, 18},
        {4, 4, 4, 19},
        {7, 16, 9, 14},
        {10, 31, 11, 6},
    }};
    const int key = month * 100 + day;
    for (const auto& r : kRanges) {
        const int lo = r[0] * 100 + r[1];
        const int hi = r[2] * 100 + r[3];
        if (lo <= hi) {
            if (key >= lo && key <= hi) return true;
        } else if (key >= lo || key <= hi) {
            return true;
        }
    }
    return false;
}

double ar1_step(double prev, double phi, double sigma, Rng& rng) {
    return phi * prev + sigma * rng.normal();
}

std::array<double, 24> draw_daily_pattern(Rng& rng) {
    std::array<double, 24> pattern{};
    // Evening peak, morning shoulder, night trough, light personal jitter.
    const double evening = 0.35 + 0.25 * rng.uniform();
    const double morning = 0.10 + 0.15 * rng.uniform();
    const double night = 0.25 + 0.15 * rng.uniform();
    double mean = 0.0;
    for (int h = 0; h < 24; ++h) {
        double v = 1.0;
        v += evening * std::exp(-0.5 * (h - 19.0) * (h - 19.0) / 4.0);
        v += morning * std::exp(-0.5 * (h - 8.0) * (h - 8.0) / 3.0);
        v -= night * std::exp(-0.5 * (h - 3.5) * (h - 3.5) / 6.0);
        v *= 1.0 + 0.05 * rng.normal();
        pattern[static_cast<size_t>(h)] = std::max(0.2, v);
        mean += pattern[static_cast<size_t>(h)];
    }
    mean /= 24.0;
    for (auto& v : pattern) v /= mean;
    return pattern;
}

std::array<double, 7> draw_weekly_scale(Rng& rng) {
    std::array<double, 7> scale = {0.97, 0.96, 0.96, 0.97, 1.00, 1.08, 1.06};
    double mean = 0.0;
    for (auto& v : scale) {
        v *= 1.0 + 0.02 * rng.normal();
        mean += v;
    }
    mean /= 7.0;
    for (auto& v : scale) v /= mean;
    return scale;
}

ConsumerProfile draw_profile(const GeneratorConfig& cfg, uint64_t profile_index) {
    Rng rng(derive_seed(cfg.seed, "profile", profile_index));
    ConsumerProfile p;
    p.base_load = 0.5 + 1.4 * rng.uniform();
    p.daily_pattern = draw_daily_pattern(rng);
    p.weekly_scale = draw_weekly_scale(rng);
    if (cfg.pattern_scale != 1.0) {
        for (auto& v : p.daily_pattern)
            v = std::max(0.1, 1.0 + cfg.pattern_scale * (v - 1.0));
        for (auto& v : p.weekly_scale)
            v = std::max(0.1, 1.0 + cfg.pattern_scale * (v - 1.0));
    }
    if (rng.uniform() < cfg.heating_fraction) {
        const double magnitude = (0.02 + 0.05 * rng.uniform()) * cfg.temp_sensitivity_scale;
        const double sign = rng.uniform() < cfg.heating_sign_mix ? -1.0 : 1.0;
        p.temp_sensitivity = sign * magnitude;
    }
    p.holiday_delta = 1.0 + cfg.holiday_spread * 0.8 * (rng.uniform() - 0.35);
    if (rng.uniform() < cfg.event_fraction) {
        const double magnitude = (0.2 + 0.4 * rng.uniform()) * cfg.event_delta_scale;
        const double sign = rng.uniform() < cfg.event_sign_mix ? -1.0 : 1.0;
        p.event_delta = sign * magnitude;
    }
    p.noise_std = (0.06 + 0.10 * rng.uniform()) * p.base_load * cfg.noise_scale;
    return p;
}

} // namespace

void GeneratorConfig::validate() const {
    if (n_consumers < 2) throw ArgumentError("generator needs at least 2 consumers");
    if (hours < 552) throw ArgumentError("generator needs at least 552 hours");
    if (start_epoch % kSecondsPerHour != 0)
        throw ArgumentError("generator start must be aligned to a whole hour");
    for (double frac : {heating_fraction, heating_sign_mix, event_fraction, event_sign_mix})
        if (frac < 0.0 || frac > 1.0)
            throw ArgumentError("generator mixture fractions must lie in [0, 1]");
    if (event_density < 0.0 || event_density > 1.0)
        throw ArgumentError("event density must lie in [0, 1]");
    if (noise_scale < 0.0) throw ArgumentError("noise scale must be >= 0");
    if (cluster_count < 0) throw ArgumentError("cluster count must be >= 0");
    if (temp_ar_phi <= -1.0 || temp_ar_phi >= 1.0)
        throw ArgumentError("temperature AR coefficient must lie in (-1, 1)");
}

double mean_consumption(const ConsumerProfile& p, const DatasetFrame& frame, size_t t) {
    double holiday_factor = 1.0;
    if (frame.public_holiday[t])
        holiday_factor = p.holiday_delta;
    else if (frame.school_holiday[t])
        holiday_factor = 1.0 + 0.5 * (p.holiday_delta - 1.0);
    double value = p.base_load * p.daily_pattern[frame.hour[t]] *
                   p.weekly_scale[frame.day_of_week[t]] * holiday_factor;
    value += p.temp_sensitivity * std::max(0.0, kHeatingThresholdC - frame.temperature[t]);
    bool any_team = false;
    for (const auto& team : frame.team_playing)
        if (team[t]) any_team = true;
    if (any_team) value += p.event_delta;
    return value;
}

SynthResult generate_from_profiles(const GeneratorConfig& cfg,
                                   const std::vector<ConsumerProfile>& profiles,
                                   const std::vector<uint64_t>& noise_offsets) {
    cfg.validate();
    if (profiles.size() != static_cast<size_t>(cfg.n_consumers) ||
        noise_offsets.size() != profiles.size())
        throw ArgumentError("profiles/noise offsets must match the consumer count");

    DatasetFrame frame;
    const size_t t_n = cfg.hours;
    frame.timestamps.resize(t_n);
    for (size_t t = 0; t < t_n; ++t)
        frame.timestamps[t] = cfg.start_epoch + static_cast<int64_t>(t) * kSecondsPerHour;
    frame.derive_calendar_codes();

    // Weather: seasonal + daily shapes with AR(1) deviations.
    {
        Rng rng(derive_seed(cfg.seed, "weather"));
        frame.temperature.resize(t_n);
        frame.humidity.resize(t_n);
        frame.wind.resize(t_n);
        frame.sunlight.resize(t_n);
        double ar_t = 0.0, ar_h = 0.0, ar_w = 0.0, ar_s = 0.0;
        for (size_t t = 0; t < t_n; ++t) {
            CivilTime ct = civil_from_epoch(frame.timestamps[t]);
            const double doy =
                static_cast<double>(days_from_civil(ct.year, ct.month, ct.day) -
                                    days_from_civil(ct.year, 1, 1));
            const double hod = static_cast<double>(ct.hour);
            ar_t = ar1_step(ar_t, cfg.temp_ar_phi, cfg.temp_ar_sigma, rng);
            ar_h = ar1_step(ar_h, 0.9, 2.0, rng);
            ar_w = ar1_step(ar_w, 0.92, 2.2, rng);
            ar_s = ar1_step(ar_s, 0.85, 0.18, rng);
            const double seasonal = -std::cos(kTwoPi * (doy - 15.0) / 365.25);
            frame.temperature[t] = cfg.temp_mean + cfg.temp_annual_amp * seasonal +
                                   cfg.temp_daily_amp * std::sin(kTwoPi * (hod - 9.0) / 24.0) +
                                   ar_t;
            frame.humidity[t] =
                std::clamp(75.0 - 1.2 * (frame.temperature[t] - 10.0) + ar_h, 0.0, 100.0);
            frame.wind[t] = std::clamp(12.0 + 2.0 * ar_w, 0.0, 120.0);
            const double day_len = 12.0 + 4.0 * std::cos(kTwoPi * (doy - 172.0) / 365.25);
            const double sunrise = 12.0 - day_len / 2.0;
            const double sunset = 12.0 + day_len / 2.0;
            const double clear = std::clamp(0.55 + ar_s, 0.0, 1.0);
            frame.sunlight[t] =
                (hod >= sunrise && hod < sunset) ? std::clamp(60.0 * clear, 0.0, 60.0) : 0.0;
        }
    }

    // Calendar flags.
    frame.school_holiday.resize(t_n);
    frame.public_holiday.resize(t_n);
    {
        Rng rng(derive_seed(cfg.seed, "calendar"));
        uint8_t sh = 0, ph = 0;
        int64_t current_day = INT64_MIN;
        for (size_t t = 0; t < t_n; ++t) {
            const int64_t day = frame.timestamps[t] / kSecondsPerDay;
            if (day != current_day) {
                current_day = day;
                CivilTime ct = civil_from_epoch(frame.timestamps[t]);
                sh = cfg.school_holiday_density < 0.0
                         ? rule_school_holiday(ct.month, ct.day)
                         : rng.uniform() < cfg.school_holiday_density;
                ph = cfg.public_holiday_density < 0.0
                         ? rule_public_holiday(ct.month, ct.day)
                         : rng.uniform() < cfg.public_holiday_density;
            }
            frame.school_holiday[t] = sh;
            frame.public_holiday[t] = ph;
        }
    }

    // Team events: per day, per team.
    for (auto& team : frame.team_playing) team.resize(t_n);
    {
        std::array<uint8_t, kNumTeams> flags{};
        int64_t current_day = INT64_MIN;
        for (size_t t = 0; t < t_n; ++t) {
            const int64_t day = frame.timestamps[t] / kSecondsPerDay;
            if (day != current_day) {
                current_day = day;
                for (int k = 0; k < kNumTeams; ++k) {
                    Rng rng(derive_seed(cfg.seed, "events",
                                        static_cast<uint64_t>(day) * kNumTeams +
                                            static_cast<uint64_t>(k)));
                    flags[static_cast<size_t>(k)] = rng.uniform() < cfg.event_density;
                }
            }
            for (int k = 0; k < kNumTeams; ++k)
                frame.team_playing[static_cast<size_t>(k)][t] = flags[static_cast<size_t>(k)];
        }
    }

    // Consumption: mean function plus household noise, one independent
    // stream per noise offset.
    frame.consumption.assign(static_cast<size_t>(cfg.n_consumers),
                             std::vector<double>(t_n, 0.0));
    parallel_for(static_cast<size_t>(cfg.n_consumers), [&](size_t i) {
        const ConsumerProfile& p = profiles[i];
        Rng rng(derive_seed(cfg.seed, "noise", noise_offsets[i]));
        auto& row = frame.consumption[i];
        for (size_t t = 0; t < t_n; ++t)
            row[t] = mean_consumption(p, frame, t) + p.noise_std * rng.normal();
    });

    frame.validate();
    return SynthResult{std::move(frame), GroundTruthRegistry{cfg, profiles}};
}

SynthResult generate(const GeneratorConfig& cfg) {
    cfg.validate();
    std::vector<ConsumerProfile> profiles(static_cast<size_t>(cfg.n_consumers));
    std::vector<uint64_t> offsets(static_cast<size_t>(cfg.n_consumers));
    for (int i = 0; i < cfg.n_consumers; ++i) {
        const uint64_t profile_index =
            cfg.cluster_count > 0 ? static_cast<uint64_t>(i % cfg.cluster_count)
                                  : static_cast<uint64_t>(i);
        profiles[static_cast<size_t>(i)] = draw_profile(cfg, profile_index);
        offsets[static_cast<size_t>(i)] = static_cast<uint64_t>(i);
    }
    return generate_from_profiles(cfg, profiles, offsets);
}

OracleFloor oracle_error(const DatasetFrame& raw_frame, const GroundTruthRegistry& registry,
                         int input_len, int horizon, size_t stride, const SplitRange& segment,
                         const NormalizationSpec* norm) {
    if (registry.profiles.size() != static_cast<size_t>(raw_frame.consumers()))
        throw ArgumentError("registry does not match the frame's consumer count");
    OracleFloor floor;
    floor.per_consumer_mse.assign(registry.profiles.size(), 0.0);
    const size_t need = static_cast<size_t>(input_len) + static_cast<size_t>(horizon);
    if (segment.length() < need) return floor;
    const size_t last_origin = segment.end - need;
    std::vector<double> window_mses;
    double sq_sum = 0.0, abs_sum = 0.0;
    size_t points = 0;
    for (size_t i = 0; i < registry.profiles.size(); ++i) {
        const ConsumerProfile& p = registry.profiles[i];
        double consumer_sq = 0.0;
        size_t consumer_points = 0;
        for (size_t origin = segment.begin; origin <= last_origin; origin += stride) {
            double win_sq = 0.0;
            for (size_t t = origin + static_cast<size_t>(input_len);
                 t < origin + need; ++t) {
                double predicted = mean_consumption(p, raw_frame, t);
                double actual = raw_frame.consumption[i][t];
                if (norm != nullptr) {
                    predicted = norm->consumption.normalize(predicted);
                    actual = norm->consumption.normalize(actual);
                }
                const double err = predicted - actual;
                win_sq += err * err;
                abs_sum += std::fabs(err);
            }
            const double win_mse = win_sq / static_cast<double>(horizon);
            window_mses.push_back(win_mse);
            consumer_sq += win_sq;
            consumer_points += static_cast<size_t>(horizon);
            sq_sum += win_sq;
            points += static_cast<size_t>(horizon);
            ++floor.windows;
        }
        floor.per_consumer_mse[i] =
            consumer_points > 0 ? consumer_sq / static_cast<double>(consumer_points) : 0.0;
    }
    if (points == 0) return floor;
    floor.pooled_mse = sq_sum / static_cast<double>(points);
    floor.pooled_mae = abs_sum / static_cast<double>(points);
    if (window_mses.size() > 1) {
        double var = 0.0;
        for (double m : window_mses) {
            const double d = m - floor.pooled_mse;
            var += d * d;
        }
        var /= static_cast<double>(window_mses.size() - 1);
        floor.pooled_se = std::sqrt(var / static_cast<double>(window_mses.size()));
    }
    return floor;
}

// ---- JSON ---------------------------------------------------------------------

nlohmann::json ConsumerProfile::to_json() const {
    return {{"base_load", base_load},
            {"daily_pattern", daily_pattern},
            {"weekly_scale", weekly_scale},
            {"temp_sensitivity", temp_sensitivity},
            {"holiday_delta", holiday_delta},
            {"event_delta", event_delta},
            {"noise_std", noise_std}};
}

ConsumerProfile ConsumerProfile::from_json(const nlohmann::json& j) {
    ConsumerProfile p;
    p.base_load = j.at("base_load").get<double>();
    p.daily_pattern = j.at("daily_pattern").get<std::array<double, 24>>();
    p.weekly_scale = j.at("weekly_scale").get<std::array<double, 7>>();
    p.temp_sensitivity = j.at("temp_sensitivity").get<double>();
    p.holiday_delta = j.at("holiday_delta").get<double>();
    p.event_delta = j.at("event_delta").get<double>();
    p.noise_std = j.at("noise_std").get<double>();
    return p;
}

nlohmann::json GeneratorConfig::to_json() const {
    return {{"n_consumers", n_consumers},
            {"hours", hours},
            {"seed", seed},
            {"start_epoch", start_epoch},
            {"cluster_count", cluster_count},
            {"heating_fraction", heating_fraction},
            {"heating_sign_mix", heating_sign_mix},
            {"event_fraction", event_fraction},
            {"event_sign_mix", event_sign_mix},
            {"temp_sensitivity_scale", temp_sensitivity_scale},
            {"event_delta_scale", event_delta_scale},
            {"holiday_spread", holiday_spread},
            {"noise_scale", noise_scale},
            {"pattern_scale", pattern_scale},
            {"temp_mean", temp_mean},
            {"temp_annual_amp", temp_annual_amp},
            {"temp_daily_amp", temp_daily_amp},
            {"temp_ar_phi", temp_ar_phi},
            {"temp_ar_sigma", temp_ar_sigma},
            {"event_density", event_density},
            {"school_holiday_density", school_holiday_density},
            {"public_holiday_density", public_holiday_density}};
}

GeneratorConfig GeneratorConfig::from_json(const nlohmann::json& j) {
    GeneratorConfig c;
    c.n_consumers = j.at("n_consumers").get<int>();
    c.hours = j.at("hours").get<size_t>();
    c.seed = j.at("seed").get<uint64_t>();
    c.start_epoch = j.at("start_epoch").get<int64_t>();
    c.cluster_count = j.at("cluster_count").get<int>();
    c.heating_fraction = j.at("heating_fraction").get<double>();
    c.heating_sign_mix = j.at("heating_sign_mix").get<double>();
    c.event_fraction = j.at("event_fraction").get<double>();
    c.event_sign_mix = j.at("event_sign_mix").get<double>();
    c.temp_sensitivity_scale = j.at("temp_sensitivity_scale").get<double>();
    c.event_delta_scale = j.at("event_delta_scale").get<double>();
    c.holiday_spread = j.at("holiday_spread").get<double>();
    c.noise_scale = j.at("noise_scale").get<double>();
    c.pattern_scale = j.value("pattern_scale", 1.0);
    c.temp_mean = j.at("temp_mean").get<double>();
    c.temp_annual_amp = j.at("temp_annual_amp").get<double>();
    c.temp_daily_amp = j.at("temp_daily_amp").get<double>();
    c.temp_ar_phi = j.at("temp_ar_phi").get<double>();
    c.temp_ar_sigma = j.at("temp_ar_sigma").get<double>();
    c.event_density = j.at("event_density").get<double>();
    c.school_holiday_density = j.at("school_holiday_density").get<double>();
    c.public_holiday_density = j.at("public_holiday_density").get<double>();
    return c;
}

nlohmann::json GroundTruthRegistry::to_json() const {
    nlohmann::json profiles_json = nlohmann::json::array();
    for (const auto& p : profiles) profiles_json.push_back(p.to_json());
    return {{"config", config.to_json()}, {"profiles", profiles_json}};
}

GroundTruthRegistry GroundTruthRegistry::from_json(const nlohmann::json& j) {
    GroundTruthRegistry r;
    r.config = GeneratorConfig::from_json(j.at("config"));
    for (const auto& pj : j.at("profiles")) r.profiles.push_back(ConsumerProfile::from_json(pj));
    return r;
}

void GroundTruthRegistry::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << to_json().dump(2) << "\n";
}

GroundTruthRegistry GroundTruthRegistry::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    nlohmann::json j;
    in >> j;
    return from_json(j);
}

} // namespace hyperfc

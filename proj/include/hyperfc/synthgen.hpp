#ifndef HYPERFC_SYNTHGEN_HPP
#define HYPERFC_SYNTHGEN_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hyperfc/dataset.hpp"

namespace hyperfc {

// Consumption below this temperature responds linearly for
// temperature-sensitive households (electric-heating analog).
constexpr double kHeatingThresholdC = 15.0;

// Ground-truth generating parameters of one household.
// mean load [kWh] at hour t:
//   base * daily[hour] * weekly[dow] * holiday_factor
//     + temp_sensitivity * max(0, threshold - temp)
//     + event_delta * any_team_playing
struct ConsumerProfile {
    double base_load = 1.0;                  // kWh, > 0
    std::array<double, 24> daily_pattern{};  // positive, mean 1
    std::array<double, 7> weekly_scale{};    // mean 1
    double temp_sensitivity = 0.0;           // kWh per degree C below threshold
    double holiday_delta = 1.0;              // multiplicative on public holidays
    double event_delta = 0.0;                // kWh added on match days
    double noise_std = 0.1;                  // kWh

    nlohmann::json to_json() const;
    static ConsumerProfile from_json(const nlohmann::json& j);
};

struct GeneratorConfig {
    int n_consumers = 20;
    size_t hours = 2000;
    uint64_t seed = 0;
    int64_t start_epoch = 1577836800;  // 2020-01-01T00:00:00Z

    // Profile population mixture. cluster_count > 0 draws that many
    // distinct profiles and assigns consumer i profile i % cluster_count
    // (with independent noise realizations); 0 gives every consumer its
    // own profile.
    int cluster_count = 0;
    double heating_fraction = 0.5;   // share with a temperature response
    double heating_sign_mix = 0.0;   // share of those whose response is negative
    double event_fraction = 0.5;     // share with a match-day response
    double event_sign_mix = 0.5;     // share of those whose response is negative
    double temp_sensitivity_scale = 1.0;
    double event_delta_scale = 1.0;
    double holiday_spread = 1.0;     // 0 disables holiday response
    double noise_scale = 1.0;
    double pattern_scale = 1.0;      // contrast of the daily/weekly shapes

    // Weather process.
    double temp_mean = 10.0;
    double temp_annual_amp = 8.0;
    double temp_daily_amp = 3.0;
    double temp_ar_phi = 0.97;
    double temp_ar_sigma = 0.45;

    // Calendar/event densities. Negative holiday densities select the
    // rule-based calendar (fixed holiday dates and school periods).
    double event_density = 0.04;  // per team, per day
    double school_holiday_density = -1.0;
    double public_holiday_density = -1.0;

    void validate() const;
    nlohmann::json to_json() const;
    static GeneratorConfig from_json(const nlohmann::json& j);
};

struct GroundTruthRegistry {
    GeneratorConfig config;
    std::vector<ConsumerProfile> profiles;  // resolved per consumer

    nlohmann::json to_json() const;
    static GroundTruthRegistry from_json(const nlohmann::json& j);
    void save(const std::string& path) const;
    static GroundTruthRegistry load(const std::string& path);
};

struct SynthResult {
    DatasetFrame frame;  // raw kWh units
    GroundTruthRegistry registry;
};

// Deterministic per config; parallelizes across consumers.
SynthResult generate(const GeneratorConfig& config);

// Same, with explicit profiles and per-consumer noise stream offsets
// (consumers sharing a profile and an offset get identical series).
SynthResult generate_from_profiles(const GeneratorConfig& config,
                                   const std::vector<ConsumerProfile>& profiles,
                                   const std::vector<uint64_t>& noise_offsets);

// Noise-free mean of consumer i's load at hour t, in kWh.
double mean_consumption(const ConsumerProfile& profile, const DatasetFrame& frame, size_t t);

struct OracleFloor {
    double pooled_mse = 0.0;
    double pooled_mae = 0.0;
    double pooled_se = 0.0;  // standard error over window-level MSEs
    std::vector<double> per_consumer_mse;
    size_t windows = 0;
};

// Evaluates the generating mean function itself as a predictor over
// sliding windows of the (raw) frame; with a normalization spec the
// floor is reported in normalized units. No model can beat this floor
// except by fitting noise.
OracleFloor oracle_error(const DatasetFrame& raw_frame, const GroundTruthRegistry& registry,
                         int input_len, int horizon, size_t stride, const SplitRange& segment,
                         const NormalizationSpec* norm = nullptr);

} // namespace hyperfc

#endif

#ifndef HYPERFC_DATASET_HPP
#define HYPERFC_DATASET_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace hyperfc {

// Number of numerical external factor series (temperature, humidity,
// wind, sunlight) and of team-event flags.
constexpr int kNumWeatherFactors = 4;
constexpr int kNumTeams = 5;

// Cardinalities of the categorical calendar factors.
constexpr int kHourCardinality = 24;
constexpr int kDayOfWeekCardinality = 7;
constexpr int kDayOfMonthCardinality = 31;
constexpr int kMonthCardinality = 12;

// Aligned hourly panel: consumption per consumer, shared weather series,
// and per-timestamp categorical codes. Read-only after construction.
struct DatasetFrame {
    std::vector<int64_t> timestamps;  // hourly, strictly increasing, gapless

    // consumption[i][t] in kWh (or normalized units after apply()).
    std::vector<std::vector<double>> consumption;

    std::vector<double> temperature;  // degrees C
    std::vector<double> humidity;     // percent, [0, 100] raw
    std::vector<double> wind;         // km/h
    std::vector<double> sunlight;     // minutes per hour, [0, 60] raw

    std::vector<uint8_t> hour;          // 0..23
    std::vector<uint8_t> day_of_week;   // 0..6, Monday = 0
    std::vector<uint8_t> day_of_month;  // 0..30
    std::vector<uint8_t> month;         // 0..11
    std::vector<uint8_t> school_holiday;
    std::vector<uint8_t> public_holiday;
    std::array<std::vector<uint8_t>, kNumTeams> team_playing;

    int consumers() const { return static_cast<int>(consumption.size()); }
    size_t hours() const { return timestamps.size(); }

    // Fills the calendar code columns from the timestamps.
    void derive_calendar_codes();
    // Checks the panel invariants (lengths, ranges, gapless timeline).
    void validate() const;
};

struct CsvPaths {
    std::string consumption;
    std::string weather;
    std::string calendar;
    std::string events;
};

// Reads and validates the four-file panel. Throws DataError with the
// offending file/row on malformed input.
DatasetFrame load_csv(const CsvPaths& paths);

// Writes the panel back out in the same four-file layout.
void write_csv(const DatasetFrame& frame, const CsvPaths& paths);

// ---- Chronological splitting ------------------------------------------------

struct SplitRange {
    size_t begin = 0;
    size_t end = 0;  // exclusive
    size_t length() const { return end - begin; }
};

struct Splits {
    SplitRange train, val, test;
};

struct SplitRatios {
    double train = 0.7;
    double val = 0.1;
    double test = 0.2;
};

// Contiguous segments in chronological order with boundaries at
// floor(T * train) and floor(T * (train + val)). All three ratios must
// be positive and sum to 1. If min_segment_len > 0, every segment must
// be at least that long (ConfigError otherwise).
Splits chronological_split(size_t total_hours, const SplitRatios& ratios,
                           size_t min_segment_len = 0);

// ---- Normalization -----------------------------------------------------------

enum class NormMode { ZScore, MinMax, Identity };

struct SeriesNorm {
    NormMode mode = NormMode::Identity;
    double a = 0.0;  // mean (zscore) or min (minmax)
    double b = 1.0;  // std (zscore) or max (minmax)
    bool degenerate = false;

    double normalize(double x) const;
    double invert(double x) const;
};

// Consumption/temperature/wind are standardized, humidity/sunlight
// min-max scaled; statistics come from the training range only.
// Consumption statistics are pooled over all consumers.
struct NormalizationSpec {
    SeriesNorm consumption;
    SeriesNorm temperature;
    SeriesNorm humidity;
    SeriesNorm wind;
    SeriesNorm sunlight;

    // Normalized copy of the frame (all splits).
    DatasetFrame apply(const DatasetFrame& frame) const;

    nlohmann::json to_json() const;
    static NormalizationSpec from_json(const nlohmann::json& j);
};

NormalizationSpec fit_normalizer(const DatasetFrame& frame, const SplitRange& train_range);

// ---- Windows ------------------------------------------------------------------

// Which inputs a model consumes. Weather gates the numerical factor rows
// of the linear input; datetime/events gate embedding channels.
struct FactorSelection {
    bool consumer_id = true;
    bool weather = true;
    bool datetime = true;  // hour, day_of_week, day_of_month, month, holidays
    bool events = true;    // team flags

    static FactorSelection all() { return {true, true, true, true}; }
    static FactorSelection id_only() { return {true, false, false, false}; }
    static FactorSelection none() { return {false, false, false, false}; }

    // Channel count p of the linear head input.
    int input_channels() const { return 1 + (weather ? kNumWeatherFactors : 0); }
    // Hypernetwork input channels (consumer, datetime pairs, event).
    int embedding_channels() const {
        return (consumer_id ? 1 : 0) + (datetime ? 3 : 0) + (events ? 1 : 0);
    }
};

// Categorical codes conditioning one forecast. Calendar codes are taken
// at the forecast origin t+L; holiday and team flags are active if set
// at any hour of the first forecast day.
struct CategoricalContext {
    uint8_t hour = 0;
    uint8_t day_of_week = 0;
    uint8_t day_of_month = 0;
    uint8_t month = 0;
    uint8_t school_holiday = 0;
    uint8_t public_holiday = 0;
    std::array<uint8_t, kNumTeams> teams{};

    bool operator==(const CategoricalContext&) const = default;
};

// One training/eval sample, stored as indices into the frame; input and
// target rows are materialized on demand.
struct ForecastWindow {
    int consumer_id = 0;
    size_t origin = 0;  // input covers [origin, origin+L), target [origin+L, origin+L+h)
    CategoricalContext context;
};

// Windows for every consumer with origins at begin, begin+stride, ...
// such that the whole [t, t+L+h) range stays inside the segment.
std::vector<ForecastWindow> make_windows(const DatasetFrame& frame, const SplitRange& segment,
                                         int input_len, int horizon, size_t stride);

CategoricalContext window_context(const DatasetFrame& frame, size_t origin, int input_len,
                                  int horizon);

// Input matrix (p x L, row-major): consumption history then the selected
// numerical factor rows.
std::vector<double> window_input(const DatasetFrame& frame, const ForecastWindow& w,
                                 int input_len, const FactorSelection& factors);

std::vector<double> window_target(const DatasetFrame& frame, const ForecastWindow& w,
                                  int input_len, int horizon);

// Mean of the consumption row over the input span (instance statistics
// for the reversible-normalization baselines).
double window_input_mean(const DatasetFrame& frame, const ForecastWindow& w, int input_len);

} // namespace hyperfc

#endif

#include "hyperfc/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <unordered_map>

#include "hyperfc/error.hpp"
#include "hyperfc/log.hpp"
#include "hyperfc/timeutil.hpp"

namespace hyperfc {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> fields;
    size_t start = 0;
    while (true) {
        size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    if (!fields.empty() && !fields.back().empty() && fields.back().back() == '\r')
        fields.back().pop_back();
    return fields;
}

double parse_double(const std::string& s, const std::string& file, size_t row,
                    const std::string& what) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
        throw DataError(file + " row " + std::to_string(row) + ": bad " + what + " '" + s +
                        "'");
    return v;
}

long parse_long(const std::string& s, const std::string& file, size_t row,
                const std::string& what) {
    long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw DataError(file + " row " + std::to_string(row) + ": bad " + what + " '" + s +
                        "'");
    return v;
}

int parse_flag(const std::string& s, const std::string& file, size_t row,
               const std::string& what) {
    long v = parse_long(s, file, row, what);
    if (v != 0 && v != 1)
        throw DataError(file + " row " + std::to_string(row) + ": " + what +
                        " must be 0 or 1, got '" + s + "'");
    return static_cast<int>(v);
}

struct CsvReader {
    std::ifstream in;
    std::string file;
    size_t row = 0;

    CsvReader(const std::string& path, const std::string& expected_header) : file(path) {
        in.open(path);
        if (!in) throw DataError("cannot open " + path);
        std::string header;
        if (!std::getline(in, header)) throw DataError(path + ": empty file");
        ++row;
        if (!header.empty() && header.back() == '\r') header.pop_back();
        if (header != expected_header)
            throw DataError(path + ": expected header '" + expected_header + "', got '" +
                            header + "'");
    }

    bool next(std::vector<std::string>& fields, size_t expected_fields) {
        std::string line;
        while (std::getline(in, line)) {
            ++row;
            if (line.empty() || line == "\r") continue;
            fields = split_line(line);
            if (fields.size() != expected_fields)
                throw DataError(file + " row " + std::to_string(row) + ": expected " +
                                std::to_string(expected_fields) + " fields, got " +
                                std::to_string(fields.size()));
            return true;
        }
        return false;
    }
};

void check_timeline(const std::vector<int64_t>& ts, const std::string& file) {
    for (size_t i = 1; i < ts.size(); ++i) {
        if (ts[i] == ts[i - 1])
            throw DataError(file + ": duplicate timestamp " + format_iso_hour(ts[i]));
        if (ts[i] != ts[i - 1] + kSecondsPerHour)
            throw DataError(file + ": gap or disorder after " + format_iso_hour(ts[i - 1]) +
                            " (next is " + format_iso_hour(ts[i]) + ")");
    }
}

} // namespace

void DatasetFrame::derive_calendar_codes() {
    const size_t t_n = timestamps.size();
    hour.resize(t_n);
    day_of_week.resize(t_n);
    day_of_month.resize(t_n);
    month.resize(t_n);
    for (size_t t = 0; t < t_n; ++t) {
        CivilTime ct = civil_from_epoch(timestamps[t]);
        hour[t] = static_cast<uint8_t>(ct.hour);
        day_of_week[t] = static_cast<uint8_t>(weekday_from_epoch(timestamps[t]));
        day_of_month[t] = static_cast<uint8_t>(ct.day - 1);
        month[t] = static_cast<uint8_t>(ct.month - 1);
    }
}

void DatasetFrame::validate() const {
    const size_t t_n = timestamps.size();
    if (t_n == 0) throw DataError("frame has no timestamps");
    check_timeline(timestamps, "frame");
    auto check_len = [&](size_t got, const char* what) {
        if (got != t_n)
            throw DataError(std::string("frame: ") + what + " length " + std::to_string(got) +
                            " does not match timeline length " + std::to_string(t_n));
    };
    for (const auto& series : consumption) check_len(series.size(), "consumption series");
    check_len(temperature.size(), "temperature");
    check_len(humidity.size(), "humidity");
    check_len(wind.size(), "wind");
    check_len(sunlight.size(), "sunlight");
    check_len(hour.size(), "hour codes");
    check_len(day_of_week.size(), "day_of_week codes");
    check_len(day_of_month.size(), "day_of_month codes");
    check_len(month.size(), "month codes");
    check_len(school_holiday.size(), "school_holiday flags");
    check_len(public_holiday.size(), "public_holiday flags");
    for (const auto& team : team_playing) check_len(team.size(), "team flags");
    for (size_t t = 0; t < t_n; ++t) {
        if (hour[t] >= kHourCardinality || day_of_week[t] >= kDayOfWeekCardinality ||
            day_of_month[t] >= kDayOfMonthCardinality || month[t] >= kMonthCardinality)
            throw DataError("frame: calendar code out of range at " +
                            format_iso_hour(timestamps[t]));
        if (school_holiday[t] > 1 || public_holiday[t] > 1)
            throw DataError("frame: holiday flag out of range at " +
                            format_iso_hour(timestamps[t]));
    }
}

DatasetFrame load_csv(const CsvPaths& paths) {
    DatasetFrame frame;
    std::vector<std::string> f;

    // Weather defines the hourly timeline.
    {
        CsvReader reader(paths.weather, "timestamp,temperature,humidity,wind,sunlight");
        while (reader.next(f, 5)) {
            int64_t ts = 0;
            try {
                ts = parse_iso_hour(f[0]);
            } catch (const DataError& e) {
                throw DataError(paths.weather + " row " + std::to_string(reader.row) + ": " +
                                e.what());
            }
            frame.timestamps.push_back(ts);
            frame.temperature.push_back(
                parse_double(f[1], paths.weather, reader.row, "temperature"));
            const double hum = parse_double(f[2], paths.weather, reader.row, "humidity");
            if (hum < 0.0 || hum > 100.0)
                throw DataError(paths.weather + " row " + std::to_string(reader.row) +
                                ": humidity " + f[2] + " outside [0, 100]");
            frame.humidity.push_back(hum);
            frame.wind.push_back(parse_double(f[3], paths.weather, reader.row, "wind"));
            const double sun = parse_double(f[4], paths.weather, reader.row, "sunlight");
            if (sun < 0.0 || sun > 60.0)
                throw DataError(paths.weather + " row " + std::to_string(reader.row) +
                                ": sunlight " + f[4] + " outside [0, 60]");
            frame.sunlight.push_back(sun);
        }
        if (frame.timestamps.empty()) throw DataError(paths.weather + ": no data rows");
        check_timeline(frame.timestamps, paths.weather);
    }
    const size_t t_n = frame.timestamps.size();
    const int64_t t0 = frame.timestamps.front();
    auto index_of = [&](int64_t ts) -> size_t {
        if (ts < t0) return t_n;  // out of range
        const int64_t idx = (ts - t0) / kSecondsPerHour;
        return idx < static_cast<int64_t>(t_n) ? static_cast<size_t>(idx) : t_n;
    };

    // Consumption: long format, one row per (timestamp, consumer).
    {
        CsvReader reader(paths.consumption, "timestamp,consumer_id,kwh");
        std::vector<std::vector<uint8_t>> seen;
        while (reader.next(f, 3)) {
            int64_t ts = 0;
            try {
                ts = parse_iso_hour(f[0]);
            } catch (const DataError& e) {
                throw DataError(paths.consumption + " row " + std::to_string(reader.row) +
                                ": " + e.what());
            }
            const size_t t = index_of(ts);
            if (t == t_n)
                throw DataError(paths.consumption + " row " + std::to_string(reader.row) +
                                ": timestamp " + f[0] + " outside the weather timeline");
            const long cid = parse_long(f[1], paths.consumption, reader.row, "consumer_id");
            if (cid < 0)
                throw DataError(paths.consumption + " row " + std::to_string(reader.row) +
                                ": unknown consumer id " + f[1]);
            if (static_cast<size_t>(cid) >= frame.consumption.size()) {
                frame.consumption.resize(static_cast<size_t>(cid) + 1,
                                         std::vector<double>(t_n, 0.0));
                seen.resize(static_cast<size_t>(cid) + 1, std::vector<uint8_t>(t_n, 0));
            }
            if (seen[static_cast<size_t>(cid)][t])
                throw DataError(paths.consumption + " row " + std::to_string(reader.row) +
                                ": duplicate reading for consumer " + f[1] + " at " + f[0]);
            seen[static_cast<size_t>(cid)][t] = 1;
            frame.consumption[static_cast<size_t>(cid)][t] =
                parse_double(f[2], paths.consumption, reader.row, "kwh");
        }
        if (frame.consumption.empty()) throw DataError(paths.consumption + ": no data rows");
        for (size_t i = 0; i < seen.size(); ++i)
            for (size_t t = 0; t < t_n; ++t)
                if (!seen[i][t])
                    throw DataError(paths.consumption + ": consumer " + std::to_string(i) +
                                    " is missing a reading at " +
                                    format_iso_hour(frame.timestamps[t]));
    }

    // Calendar flags per hour.
    {
        CsvReader reader(paths.calendar, "timestamp,school_holiday,public_holiday");
        frame.school_holiday.assign(t_n, 0);
        frame.public_holiday.assign(t_n, 0);
        std::vector<uint8_t> seen(t_n, 0);
        while (reader.next(f, 3)) {
            int64_t ts = 0;
            try {
                ts = parse_iso_hour(f[0]);
            } catch (const DataError& e) {
                throw DataError(paths.calendar + " row " + std::to_string(reader.row) + ": " +
                                e.what());
            }
            const size_t t = index_of(ts);
            if (t == t_n)
                throw DataError(paths.calendar + " row " + std::to_string(reader.row) +
                                ": timestamp " + f[0] + " outside the weather timeline");
            if (seen[t])
                throw DataError(paths.calendar + " row " + std::to_string(reader.row) +
                                ": duplicate timestamp " + f[0]);
            seen[t] = 1;
            frame.school_holiday[t] = static_cast<uint8_t>(
                parse_flag(f[1], paths.calendar, reader.row, "school_holiday"));
            frame.public_holiday[t] = static_cast<uint8_t>(
                parse_flag(f[2], paths.calendar, reader.row, "public_holiday"));
        }
        for (size_t t = 0; t < t_n; ++t)
            if (!seen[t])
                throw DataError(paths.calendar + ": missing timestamp " +
                                format_iso_hour(frame.timestamps[t]));
    }

    // Events: per-day team flags covering the whole timeline.
    {
        CsvReader reader(paths.events, "date,team_lu,team_de,team_fr,team_be,team_pt");
        std::unordered_map<int64_t, std::array<uint8_t, kNumTeams>> days;
        while (reader.next(f, 1 + kNumTeams)) {
            int64_t day = 0;
            try {
                day = parse_iso_date(f[0]);
            } catch (const DataError& e) {
                throw DataError(paths.events + " row " + std::to_string(reader.row) + ": " +
                                e.what());
            }
            if (days.count(day))
                throw DataError(paths.events + " row " + std::to_string(reader.row) +
                                ": duplicate date " + f[0]);
            std::array<uint8_t, kNumTeams> flags{};
            for (int k = 0; k < kNumTeams; ++k)
                flags[static_cast<size_t>(k)] = static_cast<uint8_t>(
                    parse_flag(f[static_cast<size_t>(k) + 1], paths.events, reader.row,
                               "team flag"));
            days[day] = flags;
        }
        for (auto& team : frame.team_playing) team.assign(t_n, 0);
        for (size_t t = 0; t < t_n; ++t) {
            int64_t ts = frame.timestamps[t];
            int64_t day = (ts / kSecondsPerDay) * kSecondsPerDay;
            if (ts < 0 && ts % kSecondsPerDay != 0) day -= kSecondsPerDay;
            auto it = days.find(day);
            if (it == days.end())
                throw DataError(paths.events + ": missing date " + format_iso_date(day));
            for (int k = 0; k < kNumTeams; ++k)
                frame.team_playing[static_cast<size_t>(k)][t] = it->second[static_cast<size_t>(k)];
        }
    }

    frame.derive_calendar_codes();
    frame.validate();
    return frame;
}

void write_csv(const DatasetFrame& frame, const CsvPaths& paths) {
    auto open = [](const std::string& path) {
        std::ofstream out(path, std::ios::binary);  // LF line endings everywhere
        if (!out) throw DataError("cannot write " + path);
        return out;
    };
    // Shortest representation that parses back to the same double.
    auto fmt = [](double v) {
        char buf[32];
        auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
        (void)ec;
        return std::string(buf, p);
    };
    {
        std::ofstream out = open(paths.weather);
        out << "timestamp,temperature,humidity,wind,sunlight\n";
        for (size_t t = 0; t < frame.hours(); ++t)
            out << format_iso_hour(frame.timestamps[t]) << ',' << fmt(frame.temperature[t])
                << ',' << fmt(frame.humidity[t]) << ',' << fmt(frame.wind[t]) << ','
                << fmt(frame.sunlight[t]) << '\n';
    }
    {
        std::ofstream out = open(paths.consumption);
        out << "timestamp,consumer_id,kwh\n";
        for (size_t t = 0; t < frame.hours(); ++t) {
            const std::string ts = format_iso_hour(frame.timestamps[t]);
            for (int i = 0; i < frame.consumers(); ++i)
                out << ts << ',' << i << ','
                    << fmt(frame.consumption[static_cast<size_t>(i)][t]) << '\n';
        }
    }
    {
        std::ofstream out = open(paths.calendar);
        out << "timestamp,school_holiday,public_holiday\n";
        for (size_t t = 0; t < frame.hours(); ++t)
            out << format_iso_hour(frame.timestamps[t]) << ','
                << static_cast<int>(frame.school_holiday[t]) << ','
                << static_cast<int>(frame.public_holiday[t]) << '\n';
    }
    {
        std::ofstream out = open(paths.events);
        out << "date,team_lu,team_de,team_fr,team_be,team_pt\n";
        for (size_t t = 0; t < frame.hours(); ++t) {
            if (t != 0 && frame.timestamps[t] / kSecondsPerDay ==
                              frame.timestamps[t - 1] / kSecondsPerDay)
                continue;
            out << format_iso_date(frame.timestamps[t]);
            for (int k = 0; k < kNumTeams; ++k)
                out << ',' << static_cast<int>(frame.team_playing[static_cast<size_t>(k)][t]);
            out << '\n';
        }
    }
}

// ---- Splits -----------------------------------------------------------------

Splits chronological_split(size_t total_hours, const SplitRatios& ratios,
                           size_t min_segment_len) {
    if (ratios.train <= 0.0 || ratios.val <= 0.0 || ratios.test <= 0.0)
        throw ConfigError("split ratios must all be positive (val/test must be nonempty)");
    if (std::fabs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9)
        throw ConfigError("split ratios must sum to 1");
    // Guard against 0.7 + 0.1 rounding just below the exact boundary.
    auto boundary = [&](double ratio) {
        const double v = static_cast<double>(total_hours) * ratio;
        return static_cast<size_t>(std::floor(v + v * 1e-12));
    };
    const size_t n1 = boundary(ratios.train);
    const size_t n2 = boundary(ratios.train + ratios.val);
    Splits s;
    s.train = {0, n1};
    s.val = {n1, n2};
    s.test = {n2, total_hours};
    if (min_segment_len > 0)
        for (const SplitRange* r : {&s.train, &s.val, &s.test})
            if (r->length() < min_segment_len)
                throw ConfigError("split segment [" + std::to_string(r->begin) + ", " +
                                  std::to_string(r->end) + ") is shorter than required " +
                                  std::to_string(min_segment_len) + " hours");
    return s;
}

// ---- Normalization ------------------------------------------------------------

double SeriesNorm::normalize(double x) const {
    switch (mode) {
        case NormMode::ZScore: return (x - a) / b;
        case NormMode::MinMax: return (x - a) / (b - a);
        case NormMode::Identity: return x;
    }
    return x;
}

double SeriesNorm::invert(double x) const {
    switch (mode) {
        case NormMode::ZScore: return x * b + a;
        case NormMode::MinMax: return x * (b - a) + a;
        case NormMode::Identity: return x;
    }
    return x;
}

namespace {

SeriesNorm fit_zscore(const std::vector<const std::vector<double>*>& series,
                      const SplitRange& range, const char* name) {
    double sum = 0.0;
    size_t n = 0;
    for (const auto* s : series)
        for (size_t t = range.begin; t < range.end; ++t) {
            sum += (*s)[t];
            ++n;
        }
    const double mean = sum / static_cast<double>(n);
    double var = 0.0;
    for (const auto* s : series)
        for (size_t t = range.begin; t < range.end; ++t) {
            const double d = (*s)[t] - mean;
            var += d * d;
        }
    const double stddev = std::sqrt(var / static_cast<double>(n));
    if (stddev == 0.0) {
        log_warn("normalizer: ", name, " is constant over the training range, using identity");
        return {NormMode::Identity, 0.0, 1.0, true};
    }
    return {NormMode::ZScore, mean, stddev, false};
}

SeriesNorm fit_minmax(const std::vector<double>& series, const SplitRange& range,
                      const char* name) {
    double lo = series[range.begin], hi = series[range.begin];
    for (size_t t = range.begin; t < range.end; ++t) {
        lo = std::min(lo, series[t]);
        hi = std::max(hi, series[t]);
    }
    if (lo == hi) {
        log_warn("normalizer: ", name, " is constant over the training range, using identity");
        return {NormMode::Identity, 0.0, 1.0, true};
    }
    return {NormMode::MinMax, lo, hi, false};
}

nlohmann::json series_to_json(const SeriesNorm& s) {
    const char* mode = s.mode == NormMode::ZScore   ? "zscore"
                       : s.mode == NormMode::MinMax ? "minmax"
                                                    : "identity";
    return {{"mode", mode}, {"a", s.a}, {"b", s.b}, {"degenerate", s.degenerate}};
}

SeriesNorm series_from_json(const nlohmann::json& j) {
    SeriesNorm s;
    const std::string mode = j.at("mode").get<std::string>();
    s.mode = mode == "zscore"   ? NormMode::ZScore
             : mode == "minmax" ? NormMode::MinMax
                                : NormMode::Identity;
    s.a = j.at("a").get<double>();
    s.b = j.at("b").get<double>();
    s.degenerate = j.at("degenerate").get<bool>();
    return s;
}

} // namespace

NormalizationSpec fit_normalizer(const DatasetFrame& frame, const SplitRange& train_range) {
    if (train_range.length() == 0) throw ConfigError("normalizer needs a nonempty train range");
    NormalizationSpec spec;
    std::vector<const std::vector<double>*> cons;
    cons.reserve(frame.consumption.size());
    for (const auto& s : frame.consumption) cons.push_back(&s);
    spec.consumption = fit_zscore(cons, train_range, "consumption");
    spec.temperature = fit_zscore({&frame.temperature}, train_range, "temperature");
    spec.wind = fit_zscore({&frame.wind}, train_range, "wind");
    spec.humidity = fit_minmax(frame.humidity, train_range, "humidity");
    spec.sunlight = fit_minmax(frame.sunlight, train_range, "sunlight");
    return spec;
}

DatasetFrame NormalizationSpec::apply(const DatasetFrame& frame) const {
    DatasetFrame out = frame;
    for (auto& series : out.consumption)
        for (auto& v : series) v = consumption.normalize(v);
    for (auto& v : out.temperature) v = temperature.normalize(v);
    for (auto& v : out.humidity) v = humidity.normalize(v);
    for (auto& v : out.wind) v = wind.normalize(v);
    for (auto& v : out.sunlight) v = sunlight.normalize(v);
    return out;
}

nlohmann::json NormalizationSpec::to_json() const {
    return {{"consumption", series_to_json(consumption)},
            {"temperature", series_to_json(temperature)},
            {"humidity", series_to_json(humidity)},
            {"wind", series_to_json(wind)},
            {"sunlight", series_to_json(sunlight)}};
}

NormalizationSpec NormalizationSpec::from_json(const nlohmann::json& j) {
    NormalizationSpec spec;
    spec.consumption = series_from_json(j.at("consumption"));
    spec.temperature = series_from_json(j.at("temperature"));
    spec.humidity = series_from_json(j.at("humidity"));
    spec.wind = series_from_json(j.at("wind"));
    spec.sunlight = series_from_json(j.at("sunlight"));
    return spec;
}

// ---- Windows -------------------------------------------------------------------

CategoricalContext window_context(const DatasetFrame& frame, size_t origin, int input_len,
                                  int horizon) {
    CategoricalContext ctx;
    const size_t anchor = origin + static_cast<size_t>(input_len);  // forecast origin
    ctx.hour = frame.hour[anchor];
    ctx.day_of_week = frame.day_of_week[anchor];
    ctx.day_of_month = frame.day_of_month[anchor];
    ctx.month = frame.month[anchor];
    const size_t day_end = anchor + static_cast<size_t>(std::min(24, horizon));
    for (size_t t = anchor; t < day_end; ++t) {
        ctx.school_holiday |= frame.school_holiday[t];
        ctx.public_holiday |= frame.public_holiday[t];
        for (int k = 0; k < kNumTeams; ++k)
            ctx.teams[static_cast<size_t>(k)] |= frame.team_playing[static_cast<size_t>(k)][t];
    }
    return ctx;
}

std::vector<ForecastWindow> make_windows(const DatasetFrame& frame, const SplitRange& segment,
                                         int input_len, int horizon, size_t stride) {
    if (stride == 0) throw ArgumentError("window stride must be >= 1");
    if (input_len < 1 || horizon < 1)
        throw ArgumentError("window input length and horizon must be >= 1");
    std::vector<ForecastWindow> windows;
    const size_t need = static_cast<size_t>(input_len) + static_cast<size_t>(horizon);
    if (segment.length() < need) {
        log_warn("segment of ", segment.length(), " hours is too short for L+h = ", need,
                 ", producing no windows");
        return windows;
    }
    const size_t last_origin = segment.end - need;
    for (int i = 0; i < frame.consumers(); ++i)
        for (size_t t = segment.begin; t <= last_origin; t += stride) {
            ForecastWindow w;
            w.consumer_id = i;
            w.origin = t;
            w.context = window_context(frame, t, input_len, horizon);
            windows.push_back(w);
        }
    return windows;
}

std::vector<double> window_input(const DatasetFrame& frame, const ForecastWindow& w,
                                 int input_len, const FactorSelection& factors) {
    const size_t l = static_cast<size_t>(input_len);
    std::vector<double> input;
    input.reserve(static_cast<size_t>(factors.input_channels()) * l);
    const auto& cons = frame.consumption[static_cast<size_t>(w.consumer_id)];
    input.insert(input.end(), cons.begin() + static_cast<long>(w.origin),
                 cons.begin() + static_cast<long>(w.origin + l));
    if (factors.weather) {
        for (const std::vector<double>* s :
             {&frame.temperature, &frame.humidity, &frame.wind, &frame.sunlight})
            input.insert(input.end(), s->begin() + static_cast<long>(w.origin),
                         s->begin() + static_cast<long>(w.origin + l));
    }
    return input;
}

std::vector<double> window_target(const DatasetFrame& frame, const ForecastWindow& w,
                                  int input_len, int horizon) {
    const auto& cons = frame.consumption[static_cast<size_t>(w.consumer_id)];
    const size_t start = w.origin + static_cast<size_t>(input_len);
    return std::vector<double>(cons.begin() + static_cast<long>(start),
                               cons.begin() + static_cast<long>(start + horizon));
}

double window_input_mean(const DatasetFrame& frame, const ForecastWindow& w, int input_len) {
    const auto& cons = frame.consumption[static_cast<size_t>(w.consumer_id)];
    double sum = 0.0;
    for (size_t t = w.origin; t < w.origin + static_cast<size_t>(input_len); ++t) sum += cons[t];
    return sum / static_cast<double>(input_len);
}

} // namespace hyperfc

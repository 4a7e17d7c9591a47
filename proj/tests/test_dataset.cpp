#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "hyperfc/dataset.hpp"
#include "hyperfc/error.hpp"
#include "hyperfc/rng.hpp"
#include "hyperfc/timeutil.hpp"

using namespace hyperfc;
namespace fs = std::filesystem;

namespace {

// Minimal complete frame for ingestion tests.
DatasetFrame tiny_frame(int consumers, size_t hours, uint64_t seed = 0) {
    DatasetFrame f;
    Rng rng(seed);
    f.timestamps.resize(hours);
    for (size_t t = 0; t < hours; ++t)
        f.timestamps[t] = 1577836800 + static_cast<int64_t>(t) * kSecondsPerHour;
    f.derive_calendar_codes();
    f.temperature.resize(hours);
    f.humidity.resize(hours);
    f.wind.resize(hours);
    f.sunlight.resize(hours);
    for (size_t t = 0; t < hours; ++t) {
        f.temperature[t] = 5.0 + 10.0 * rng.uniform();
        f.humidity[t] = 100.0 * rng.uniform();
        f.wind[t] = 30.0 * rng.uniform();
        f.sunlight[t] = 60.0 * rng.uniform();
    }
    f.school_holiday.assign(hours, 0);
    f.public_holiday.assign(hours, 0);
    for (auto& team : f.team_playing) team.assign(hours, 0);
    f.consumption.assign(static_cast<size_t>(consumers), std::vector<double>(hours));
    for (auto& row : f.consumption)
        for (auto& v : row) v = 0.2 + 2.0 * rng.uniform();
    return f;
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("hyperfc_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int& counter() {
        static int c = 0;
        return c;
    }
    CsvPaths csv_paths() const {
        return {(path / "consumption.csv").string(), (path / "weather.csv").string(),
                (path / "calendar.csv").string(), (path / "events.csv").string()};
    }
};

} // namespace

TEST_CASE("iso hour parsing and formatting round-trip") {
    const std::string iso = "2020-03-07T14:00:00Z";
    const int64_t epoch = parse_iso_hour(iso);
    CHECK(format_iso_hour(epoch) == iso);
    CHECK(parse_iso_hour("1970-01-01T00:00:00Z") == 0);
    CHECK_THROWS_AS(parse_iso_hour("2020-03-07T14:30:00Z"), DataError);
    CHECK_THROWS_AS(parse_iso_hour("2020-03-07 14:00:00Z"), DataError);
}

TEST_CASE("weekday codes use Monday = 0") {
    // 2020-01-01 was a Wednesday.
    CHECK(weekday_from_epoch(parse_iso_hour("2020-01-01T00:00:00Z")) == 2);
    // 2020-01-06 was a Monday.
    CHECK(weekday_from_epoch(parse_iso_hour("2020-01-06T09:00:00Z")) == 0);
}

TEST_CASE("chronological split boundaries") {
    Splits s = chronological_split(100, {});
    CHECK(s.train.length() == 70);
    CHECK(s.val.length() == 10);
    CHECK(s.test.length() == 20);

    // Two years of hourly data.
    s = chronological_split(17520, {});
    CHECK(s.train.length() == 12264);
    CHECK(s.val.length() == 1752);
    CHECK(s.test.length() == 3504);
    CHECK(s.train.end == s.val.begin);
    CHECK(s.val.end == s.test.begin);
    CHECK(s.test.end == 17520);
}

TEST_CASE("chronological split rejects empty segments and bad ratios") {
    CHECK_THROWS_AS(chronological_split(100, {1.0, 0.0, 0.0}), ConfigError);
    CHECK_THROWS_AS(chronological_split(100, {0.5, 0.2, 0.2}), ConfigError);
    CHECK_THROWS_AS(chronological_split(100, {0.7, 0.1, 0.2}, 25), ConfigError);
}

TEST_CASE("normalizer fits on train only and round-trips") {
    DatasetFrame f = tiny_frame(3, 200, 42);
    Splits s = chronological_split(f.hours(), {});
    NormalizationSpec spec = fit_normalizer(f, s.train);
    CHECK(spec.consumption.mode == NormMode::ZScore);
    CHECK(spec.humidity.mode == NormMode::MinMax);

    DatasetFrame norm = spec.apply(f);
    double max_err = 0.0;
    for (int i = 0; i < f.consumers(); ++i)
        for (size_t t = 0; t < f.hours(); ++t)
            max_err = std::max(max_err,
                               std::fabs(spec.consumption.invert(
                                             norm.consumption[static_cast<size_t>(i)][t]) -
                                         f.consumption[static_cast<size_t>(i)][t]));
    for (size_t t = 0; t < f.hours(); ++t) {
        max_err = std::max(max_err, std::fabs(spec.temperature.invert(norm.temperature[t]) -
                                              f.temperature[t]));
        max_err = std::max(max_err,
                           std::fabs(spec.sunlight.invert(norm.sunlight[t]) - f.sunlight[t]));
    }
    CHECK(max_err < 1e-9);

    // Statistics depend on the train segment only.
    DatasetFrame perturbed = f;
    for (size_t t = s.test.begin; t < s.test.end; ++t) perturbed.consumption[0][t] += 100.0;
    NormalizationSpec spec2 = fit_normalizer(perturbed, s.train);
    CHECK(spec2.consumption.a == spec.consumption.a);
    CHECK(spec2.consumption.b == spec.consumption.b);
}

TEST_CASE("degenerate series fall back to identity") {
    DatasetFrame f = tiny_frame(2, 100, 7);
    for (auto& v : f.sunlight) v = 30.0;
    for (auto& r : f.consumption)
        for (auto& v : r) v = 1.5;
    Splits s = chronological_split(f.hours(), {});
    NormalizationSpec spec = fit_normalizer(f, s.train);
    CHECK(spec.sunlight.mode == NormMode::Identity);
    CHECK(spec.sunlight.degenerate);
    CHECK(spec.consumption.mode == NormMode::Identity);
    CHECK(spec.consumption.normalize(1.5) == 1.5);
}

TEST_CASE("minmax maps the sunlight range onto [0, 1]") {
    DatasetFrame f = tiny_frame(2, 61, 9);
    for (size_t t = 0; t < f.hours(); ++t) f.sunlight[t] = static_cast<double>(t);
    NormalizationSpec spec = fit_normalizer(f, {0, 61});
    CHECK(spec.sunlight.normalize(0.0) == 0.0);
    CHECK(spec.sunlight.normalize(60.0) == 1.0);
    CHECK(spec.sunlight.normalize(30.0) == doctest::Approx(0.5));
}

TEST_CASE("window construction origins and counts") {
    DatasetFrame f = tiny_frame(2, 600, 3);
    auto windows = make_windows(f, {0, 600}, 336, 168, 24);
    // floor((600 - 504) / 24) + 1 = 5 per consumer
    REQUIRE(windows.size() == 10);
    for (int k = 0; k < 5; ++k)
        CHECK(windows[static_cast<size_t>(k)].origin == static_cast<size_t>(24 * k));

    auto one = make_windows(f, {0, 600}, 336, 168, 600);
    CHECK(one.size() == 2);  // exactly one per consumer

    // Count formula on random segments and strides.
    Rng rng(5);
    for (int iter = 0; iter < 10; ++iter) {
        const size_t stride = 1 + rng.uniform_int(100);
        const size_t seg = 504 + rng.uniform_int(96);
        auto ws = make_windows(f, {0, seg}, 336, 168, stride);
        const size_t expect = (seg - 504) / stride + 1;
        CHECK(ws.size() == expect * 2);
    }
}

TEST_CASE("window target equals the frame slice verbatim") {
    DatasetFrame f = tiny_frame(2, 600, 11);
    auto windows = make_windows(f, {0, 600}, 336, 168, 24);
    const ForecastWindow& w = windows[3];
    auto target = window_target(f, w, 336, 168);
    REQUIRE(target.size() == 168);
    for (size_t j = 0; j < 168; ++j)
        CHECK(target[j] ==
              f.consumption[static_cast<size_t>(w.consumer_id)][w.origin + 336 + j]);

    auto input = window_input(f, w, 336, FactorSelection::all());
    REQUIRE(input.size() == 5 * 336);
    for (size_t j = 0; j < 336; ++j) {
        CHECK(input[j] == f.consumption[static_cast<size_t>(w.consumer_id)][w.origin + j]);
        CHECK(input[336 + j] == f.temperature[w.origin + j]);
    }
    CHECK(window_input(f, w, 336, FactorSelection::id_only()).size() == 336);
}

TEST_CASE("windows never straddle a split boundary") {
    DatasetFrame f = tiny_frame(2, 2000, 13);
    Splits s = chronological_split(f.hours(), {});
    for (const SplitRange& seg : {s.train, s.val, s.test}) {
        auto ws = make_windows(f, seg, 336, 168, 24);
        for (const auto& w : ws) {
            CHECK(w.origin >= seg.begin);
            CHECK(w.origin + 504 <= seg.end);
        }
    }
}

TEST_CASE("window context anchors at the forecast origin") {
    DatasetFrame f = tiny_frame(1, 600, 17);
    // Flag one hour inside the first forecast day and one team later the
    // same day.
    const size_t origin = 24;
    const size_t anchor = origin + 336;
    f.public_holiday[anchor + 5] = 1;
    f.team_playing[2][anchor + 23] = 1;
    f.team_playing[4][anchor + 24] = 1;  // next day: must not leak in
    CategoricalContext ctx = window_context(f, origin, 336, 168);
    CHECK(ctx.hour == f.hour[anchor]);
    CHECK(ctx.day_of_week == f.day_of_week[anchor]);
    CHECK(ctx.public_holiday == 1);
    CHECK(ctx.teams[2] == 1);
    CHECK(ctx.teams[4] == 0);
}

TEST_CASE("csv round-trip preserves the frame") {
    TempDir dir;
    DatasetFrame f = tiny_frame(2, 48, 23);
    f.public_holiday[30] = 1;  // whole-day flags only survive per-day files
    for (size_t t = 24; t < 48; ++t) f.public_holiday[t] = f.public_holiday[30];
    f.team_playing[1] = f.public_holiday;
    write_csv(f, dir.csv_paths());
    DatasetFrame loaded = load_csv(dir.csv_paths());
    CHECK(loaded.consumers() == 2);
    CHECK(loaded.hours() == 48);
    CHECK(loaded.timestamps == f.timestamps);
    CHECK(loaded.consumption == f.consumption);
    CHECK(loaded.temperature == f.temperature);
    CHECK(loaded.sunlight == f.sunlight);
    CHECK(loaded.team_playing[1] == f.team_playing[1]);
    CHECK(loaded.hour == f.hour);
}

TEST_CASE("ingestion rejects a missing weather hour naming the timestamp") {
    TempDir dir;
    DatasetFrame f = tiny_frame(2, 48, 29);
    write_csv(f, dir.csv_paths());
    // Drop one mid-file weather row.
    auto path = dir.csv_paths().weather;
    std::ifstream in(path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    in.close();
    lines.erase(lines.begin() + 11);
    std::ofstream out(path, std::ios::binary);
    for (const auto& l : lines) out << l << "\n";
    out.close();
    CHECK_THROWS_WITH_AS(load_csv(dir.csv_paths()),
                         doctest::Contains("2020-01-01T09:00:00Z"), DataError);
}

TEST_CASE("ingestion rejects out-of-range humidity at the offending row") {
    TempDir dir;
    DatasetFrame f = tiny_frame(2, 48, 31);
    write_csv(f, dir.csv_paths());
    auto path = dir.csv_paths().weather;
    std::ifstream in(path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    in.close();
    // Row 5 (1-based with header): corrupt humidity.
    auto& bad = lines[4];
    size_t first = bad.find(',');
    size_t second = bad.find(',', first + 1);
    size_t third = bad.find(',', second + 1);
    bad = bad.substr(0, second + 1) + "250" + bad.substr(third);
    std::ofstream out(path, std::ios::binary);
    for (const auto& l : lines) out << l << "\n";
    out.close();
    CHECK_THROWS_WITH_AS(load_csv(dir.csv_paths()), doctest::Contains("row 5"), DataError);
}

TEST_CASE("ingestion rejects duplicate consumption rows") {
    TempDir dir;
    DatasetFrame f = tiny_frame(2, 48, 37);
    write_csv(f, dir.csv_paths());
    auto path = dir.csv_paths().consumption;
    std::ofstream out(path, std::ios::app | std::ios::binary);
    out << "2020-01-01T05:00:00Z,1,0.5\n";
    out.close();
    CHECK_THROWS_WITH_AS(load_csv(dir.csv_paths()), doctest::Contains("duplicate"), DataError);
}

TEST_CASE("ingestion rejects negative consumer ids") {
    TempDir dir;
    DatasetFrame f = tiny_frame(2, 48, 41);
    write_csv(f, dir.csv_paths());
    auto path = dir.csv_paths().consumption;
    std::ofstream out(path, std::ios::app | std::ios::binary);
    out << "2020-01-01T05:00:00Z,-3,0.5\n";
    out.close();
    CHECK_THROWS_WITH_AS(load_csv(dir.csv_paths()), doctest::Contains("unknown consumer"),
                         DataError);
}

TEST_CASE("ingestion rejects missing event dates") {
    TempDir dir;
    DatasetFrame f = tiny_frame(2, 72, 43);
    write_csv(f, dir.csv_paths());
    // Drop the last day from the events file.
    auto path = dir.csv_paths().events;
    std::ifstream in(path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    in.close();
    lines.pop_back();
    std::ofstream out(path, std::ios::binary);
    for (const auto& l : lines) out << l << "\n";
    out.close();
    CHECK_THROWS_WITH_AS(load_csv(dir.csv_paths()), doctest::Contains("missing date"),
                         DataError);
}

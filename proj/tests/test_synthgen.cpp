#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "hyperfc/error.hpp"
#include "hyperfc/synthgen.hpp"
#include "hyperfc/training.hpp"

using namespace hyperfc;
namespace fs = std::filesystem;

TEST_CASE("generation is deterministic per config") {
    GeneratorConfig cfg;
    cfg.n_consumers = 3;
    cfg.hours = 600;
    cfg.seed = 5;
    SynthResult a = generate(cfg);
    SynthResult b = generate(cfg);
    CHECK(a.frame.consumption == b.frame.consumption);
    CHECK(a.frame.temperature == b.frame.temperature);
    CHECK(a.frame.team_playing[2] == b.frame.team_playing[2]);
}

TEST_CASE("noise-free structural config is exactly weekly periodic") {
    GeneratorConfig cfg;
    cfg.n_consumers = 2;
    cfg.hours = 24 * 7 * 5;
    cfg.seed = 7;
    cfg.noise_scale = 0.0;
    cfg.heating_fraction = 0.0;
    cfg.event_fraction = 0.0;
    cfg.event_density = 0.0;
    cfg.holiday_spread = 0.0;         // holiday factor collapses to 1
    cfg.school_holiday_density = 0.0;  // and no holidays are emitted at all
    cfg.public_holiday_density = 0.0;
    SynthResult r = generate(cfg);
    const auto& row = r.frame.consumption[0];
    for (size_t t = 0; t + 168 < row.size(); ++t) CHECK(row[t] == row[t + 168]);
}

TEST_CASE("shared profile and noise stream give identical series") {
    GeneratorConfig cfg;
    cfg.n_consumers = 2;
    cfg.hours = 600;
    cfg.seed = 9;
    ConsumerProfile p = generate(cfg).registry.profiles[0];
    SynthResult r = generate_from_profiles(cfg, {p, p}, {0, 0});
    CHECK(r.frame.consumption[0] == r.frame.consumption[1]);

    SynthResult distinct = generate_from_profiles(cfg, {p, p}, {0, 1});
    CHECK(distinct.frame.consumption[0] != distinct.frame.consumption[1]);
}

TEST_CASE("heating-sensitive consumption anti-correlates with cold temperature") {
    GeneratorConfig cfg;
    cfg.n_consumers = 2;
    cfg.hours = 2400;  // winter start (January)
    cfg.seed = 11;
    cfg.heating_fraction = 1.0;
    cfg.heating_sign_mix = 0.0;
    cfg.temp_sensitivity_scale = 8.0;
    cfg.noise_scale = 0.3;
    cfg.event_fraction = 0.0;
    SynthResult r = generate(cfg);
    // Correlation of (consumption, -temperature) over hours below the
    // heating threshold.
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    size_t n = 0;
    for (size_t t = 0; t < cfg.hours; ++t) {
        if (r.frame.temperature[t] >= kHeatingThresholdC) continue;
        const double x = r.frame.consumption[0][t];
        const double y = -r.frame.temperature[t];
        sx += x;
        sy += y;
        sxx += x * x;
        syy += y * y;
        sxy += x * y;
        ++n;
    }
    REQUIRE(n > 100);
    const double nd = static_cast<double>(n);
    const double corr = (sxy - sx * sy / nd) /
                        std::sqrt((sxx - sx * sx / nd) * (syy - sy * sy / nd));
    CHECK(corr > 0.5);
}

TEST_CASE("oracle floor is zero without noise") {
    GeneratorConfig cfg;
    cfg.n_consumers = 2;
    cfg.hours = 1200;
    cfg.seed = 13;
    cfg.noise_scale = 0.0;
    SynthResult r = generate(cfg);
    OracleFloor floor = oracle_error(r.frame, r.registry, 336, 168, 24, {0, cfg.hours});
    CHECK(floor.pooled_mse == 0.0);
}

TEST_CASE("oracle floor approaches the injected noise variance") {
    GeneratorConfig cfg;
    cfg.n_consumers = 4;
    cfg.hours = 8760;
    cfg.seed = 17;
    SynthResult r = generate(cfg);
    OracleFloor floor = oracle_error(r.frame, r.registry, 336, 168, 24, {0, cfg.hours});
    double expected = 0.0;
    for (const auto& p : r.registry.profiles) expected += p.noise_std * p.noise_std;
    expected /= static_cast<double>(r.registry.profiles.size());
    CHECK(floor.pooled_mse == doctest::Approx(expected).epsilon(0.05));
    // Per consumer as well.
    for (size_t i = 0; i < r.registry.profiles.size(); ++i) {
        const double sigma2 =
            r.registry.profiles[i].noise_std * r.registry.profiles[i].noise_std;
        CHECK(floor.per_consumer_mse[i] == doctest::Approx(sigma2).epsilon(0.08));
    }
}

TEST_CASE("generated files round-trip through csv ingestion losslessly") {
    GeneratorConfig cfg;
    cfg.n_consumers = 2;
    cfg.hours = 600;
    cfg.seed = 19;
    SynthResult r = generate(cfg);
    fs::path dir = fs::temp_directory_path() / "hyperfc_synth_csv";
    fs::create_directories(dir);
    CsvPaths paths{(dir / "consumption.csv").string(), (dir / "weather.csv").string(),
                   (dir / "calendar.csv").string(), (dir / "events.csv").string()};
    write_csv(r.frame, paths);
    DatasetFrame loaded = load_csv(paths);
    CHECK(loaded.consumption == r.frame.consumption);
    CHECK(loaded.temperature == r.frame.temperature);
    CHECK(loaded.humidity == r.frame.humidity);
    CHECK(loaded.wind == r.frame.wind);
    CHECK(loaded.sunlight == r.frame.sunlight);
    CHECK(loaded.school_holiday == r.frame.school_holiday);
    CHECK(loaded.public_holiday == r.frame.public_holiday);
    for (int k = 0; k < kNumTeams; ++k)
        CHECK(loaded.team_playing[static_cast<size_t>(k)] ==
              r.frame.team_playing[static_cast<size_t>(k)]);
    fs::remove_all(dir);
}

TEST_CASE("registry serializes and restores exactly") {
    GeneratorConfig cfg;
    cfg.n_consumers = 3;
    cfg.hours = 600;
    cfg.seed = 23;
    SynthResult r = generate(cfg);
    fs::path path = fs::temp_directory_path() / "hyperfc_registry.json";
    r.registry.save(path.string());
    GroundTruthRegistry loaded = GroundTruthRegistry::load(path.string());
    REQUIRE(loaded.profiles.size() == r.registry.profiles.size());
    for (size_t i = 0; i < loaded.profiles.size(); ++i) {
        CHECK(loaded.profiles[i].base_load == r.registry.profiles[i].base_load);
        CHECK(loaded.profiles[i].noise_std == r.registry.profiles[i].noise_std);
        CHECK(loaded.profiles[i].daily_pattern == r.registry.profiles[i].daily_pattern);
    }
    CHECK(loaded.config.seed == cfg.seed);
    fs::remove(path);
}

TEST_CASE("invalid generator configs are rejected") {
    GeneratorConfig cfg;
    cfg.n_consumers = 1;
    CHECK_THROWS_AS(generate(cfg), ArgumentError);
    cfg.n_consumers = 2;
    cfg.hours = 100;
    CHECK_THROWS_AS(generate(cfg), ArgumentError);
    cfg.hours = 600;
    cfg.heating_fraction = 1.5;
    CHECK_THROWS_AS(generate(cfg), ArgumentError);
}

TEST_CASE("heterogeneous populations leave a gap no shared model can close") {
    GeneratorConfig cfg;
    cfg.n_consumers = 6;
    cfg.hours = 5100;
    cfg.seed = 29;
    cfg.heating_fraction = 1.0;
    cfg.heating_sign_mix = 0.5;  // per-household responses of opposite sign
    cfg.temp_sensitivity_scale = 4.0;
    cfg.event_fraction = 0.0;
    SynthResult r = generate(cfg);
    Splits splits = chronological_split(cfg.hours, {}, 504);
    NormalizationSpec norm = fit_normalizer(r.frame, splits.train);
    OracleFloor floor =
        oracle_error(r.frame, r.registry, 336, 168, 168, splits.test, &norm);

    TrainConfig tc;
    tc.model = ModelKind::GlobalLinear;
    tc.factors = FactorsMode::All;
    tc.id_embed_dim = 0;
    tc.seed = 31;
    tc.max_epochs = 6;
    tc.batch_size = 16;
    tc.stride = 24;
    tc.eval_stride = 168;
    ExperimentResult result = run_experiment(r.frame, tc);
    CHECK(result.report.test.mse - floor.pooled_mse > 0.0);
    // The gap is structural, not borderline noise.
    CHECK(result.report.test.mse > 1.5 * floor.pooled_mse);
}

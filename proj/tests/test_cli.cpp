// End-to-end tests driving the installed CLI binary.

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#ifndef HYPERFC_CLI_PATH
#define HYPERFC_CLI_PATH "hyperfc"
#endif

namespace fs = std::filesystem;

namespace {

struct CliFixture {
    fs::path dir;
    CliFixture() {
        dir = fs::temp_directory_path() / ("hyperfc_cli_" + std::to_string(::getpid()));
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    ~CliFixture() { fs::remove_all(dir); }

    int run(const std::string& args) const {
        const std::string cmd = std::string(HYPERFC_CLI_PATH) + " " + args + " > " +
                                (dir / "stdout.txt").string() + " 2> " +
                                (dir / "stderr.txt").string();
        const int status = std::system(cmd.c_str());
        return WEXITSTATUS(status);
    }

    std::string stdout_text() const {
        std::ifstream in(dir / "stdout.txt");
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    std::string stderr_text() const {
        std::ifstream in(dir / "stderr.txt");
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    std::string data_args() const {
        const std::string d = (dir / "data").string();
        return " --set data.consumption=" + d + "/consumption.csv --set data.weather=" + d +
               "/weather.csv --set data.calendar=" + d + "/calendar.csv --set data.events=" +
               d + "/events.csv ";
    }

    std::vector<uint8_t> file_bytes(const fs::path& p) const {
        std::ifstream in(p, std::ios::binary);
        return std::vector<uint8_t>((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    }
};

const char* kTinyTrain =
    " --set hidden=2 --set batch_size=8 --set max_epochs=2 --set stride=336"
    " --set eval_stride=336 --set seed=5 ";

} // namespace

TEST_CASE("cli generate writes a reloadable panel and refuses to overwrite") {
    CliFixture fx;
    const std::string out = (fx.dir / "data").string();
    REQUIRE(fx.run("generate --set gen.n_consumers=3 --set gen.hours=5100 --set gen.seed=2 "
                   "--out " +
                   out) == 0);
    for (const char* f :
         {"consumption.csv", "weather.csv", "calendar.csv", "events.csv", "registry.json"})
        CHECK(fs::exists(fx.dir / "data" / f));

    // Second run without --force fails and changes nothing.
    auto before = fx.file_bytes(fx.dir / "data" / "consumption.csv");
    CHECK(fx.run("generate --set gen.n_consumers=3 --set gen.hours=5100 --set gen.seed=2 "
                 "--out " +
                 out) == 2);
    CHECK(fx.file_bytes(fx.dir / "data" / "consumption.csv") == before);

    // Same invocation with --force is byte-identical (deterministic).
    REQUIRE(fx.run("generate --set gen.n_consumers=3 --set gen.hours=5100 --set gen.seed=2 "
                   "--force --out " +
                   out) == 0);
    CHECK(fx.file_bytes(fx.dir / "data" / "consumption.csv") == before);
}

TEST_CASE("cli train/evaluate/forecast round trip") {
    CliFixture fx;
    const std::string out = (fx.dir / "data").string();
    REQUIRE(fx.run("generate --set gen.n_consumers=3 --set gen.hours=5100 --set gen.seed=3 "
                   "--out " +
                   out) == 0);

    const std::string run_dir = (fx.dir / "run").string();
    REQUIRE(fx.run("train --model global_linear --factors all" + fx.data_args() + kTinyTrain +
                   "--out " + run_dir) == 0);
    const fs::path ckpt = fs::path(run_dir) / "global_linear.ckpt";
    REQUIRE(fs::exists(ckpt));
    REQUIRE(fs::exists(fs::path(run_dir) / "metrics.json"));

    nlohmann::json train_metrics;
    std::ifstream(fs::path(run_dir) / "metrics.json") >> train_metrics;
    CHECK(train_metrics.at("config").at("seed").get<int>() == 5);
    CHECK(train_metrics.contains("experiment"));

    // Evaluating the checkpoint on the same data reproduces the metrics.
    const std::string eval_dir = (fx.dir / "eval").string();
    REQUIRE(fx.run("evaluate --checkpoint " + ckpt.string() + fx.data_args() + "--out " +
                   eval_dir) == 0);
    nlohmann::json eval_metrics;
    std::ifstream(fs::path(eval_dir) / "evaluate.json") >> eval_metrics;
    CHECK(eval_metrics.at("test").at("mse").get<double>() ==
          train_metrics.at("test").at("mse").get<double>());
    CHECK(eval_metrics.at("test").at("mae").get<double>() ==
          train_metrics.at("test").at("mae").get<double>());

    // Forecast: header plus exactly h rows.
    const std::string fc = (fx.dir / "forecast.csv").string();
    REQUIRE(fx.run("forecast --checkpoint " + ckpt.string() + fx.data_args() +
                   "--consumer 1 --origin 2020-06-01T00:00:00Z --out-file " + fc) == 0);
    std::ifstream in(fc);
    std::string line;
    size_t rows = 0;
    std::getline(in, line);
    CHECK(line == "timestamp,value");
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 168);

    // kWh output differs from normalized output.
    const std::string fc2 = (fx.dir / "forecast_kwh.csv").string();
    REQUIRE(fx.run("forecast --checkpoint " + ckpt.string() + fx.data_args() +
                   "--consumer 1 --origin 2020-06-01T00:00:00Z --kwh --out-file " + fc2) == 0);
    CHECK(fx.file_bytes(fc) != fx.file_bytes(fc2));
}

TEST_CASE("cli adapt extends a hypernet checkpoint to new consumers") {
    CliFixture fx;
    const std::string out = (fx.dir / "data").string();
    REQUIRE(fx.run("generate --set gen.n_consumers=2 --set gen.hours=5100 --set gen.seed=7 "
                   "--out " +
                   out) == 0);
    const std::string run_dir = (fx.dir / "run").string();
    REQUIRE(fx.run("train --model hypernet --factors all" + fx.data_args() + kTinyTrain +
                   "--out " + run_dir) == 0);

    // Wider panel: the first two consumers are unchanged, two are new.
    const std::string out4 = (fx.dir / "data4").string();
    REQUIRE(fx.run("generate --set gen.n_consumers=4 --set gen.hours=5100 --set gen.seed=7 "
                   "--out " +
                   out4) == 0);
    const std::string d4 = " --set data.consumption=" + out4 +
                           "/consumption.csv --set data.weather=" + out4 +
                           "/weather.csv --set data.calendar=" + out4 +
                           "/calendar.csv --set data.events=" + out4 + "/events.csv ";
    const std::string adapted = (fx.dir / "adapted.ckpt").string();
    REQUIRE(fx.run("adapt --checkpoint " + (fs::path(run_dir) / "hypernet.ckpt").string() +
                   d4 + "--set adapt_steps=3 --set adapt_batch=2 --out-checkpoint " +
                   adapted) == 0);
    REQUIRE(fs::exists(adapted));

    // Evaluation with the adapted checkpoint covers all four consumers.
    const std::string eval_dir = (fx.dir / "eval").string();
    REQUIRE(fx.run("evaluate --checkpoint " + adapted + d4 + "--out " + eval_dir) == 0);
    nlohmann::json metrics;
    std::ifstream(fs::path(eval_dir) / "evaluate.json") >> metrics;
    CHECK(metrics.at("per_consumer").size() == 4);
    CHECK(metrics.at("skipped_consumers").empty());

    // Without adaptation consumers 2 and 3 are skipped, not failed.
    const std::string eval2 = (fx.dir / "eval2").string();
    REQUIRE(fx.run("evaluate --checkpoint " + (fs::path(run_dir) / "hypernet.ckpt").string() +
                   d4 + "--out " + eval2) == 0);
    nlohmann::json metrics2;
    std::ifstream(fs::path(eval2) / "evaluate.json") >> metrics2;
    CHECK(metrics2.at("skipped_consumers") == nlohmann::json::array({2, 3}));
}

TEST_CASE("cli exit codes distinguish usage, data and lookup failures") {
    CliFixture fx;
    // Unknown flag: usage error.
    CHECK(fx.run("train --no-such-flag") == 1);
    // Unknown config key: usage error.
    CHECK(fx.run("train --set nonsense=1") == 1);
    // Missing dataset: usage error with guidance.
    CHECK(fx.run("train --model global_linear" + std::string(kTinyTrain)) == 1);
    // Unreadable checkpoint: data error.
    CHECK(fx.run("evaluate --checkpoint /nonexistent.ckpt --set data.consumption=x "
                 "--set data.weather=x --set data.calendar=x --set data.events=x") == 2);

    const std::string out = (fx.dir / "data").string();
    REQUIRE(fx.run("generate --set gen.n_consumers=2 --set gen.hours=5100 --set gen.seed=9 "
                   "--out " +
                   out) == 0);
    const std::string run_dir = (fx.dir / "run").string();
    REQUIRE(fx.run("train --model hypernet --factors id_only" + fx.data_args() + kTinyTrain +
                   "--out " + run_dir) == 0);
    // Unknown consumer for forecast: lookup error with an adapt hint.
    CHECK(fx.run("forecast --checkpoint " + (fs::path(run_dir) / "hypernet.ckpt").string() +
                 fx.data_args() + "--consumer 7 --origin 2020-06-01T00:00:00Z") == 2);
    // Hypernet refuses factors=none up front.
    CHECK(fx.run("train --model hypernet --factors none" + fx.data_args() + kTinyTrain +
                 "--out " + run_dir) == 1);
}

TEST_CASE("cli ablate emits the four-row factor-group table") {
    CliFixture fx;
    const std::string out = (fx.dir / "data").string();
    REQUIRE(fx.run("generate --set gen.n_consumers=3 --set gen.hours=5100 --set gen.seed=13 "
                   "--out " +
                   out) == 0);
    const std::string ab_dir = (fx.dir / "ablate").string();
    REQUIRE(fx.run("ablate" + fx.data_args() + kTinyTrain +
                   "--set repetitions=1 --set max_windows_per_epoch=16 --out " + ab_dir) == 0);
    nlohmann::json j;
    std::ifstream(fs::path(ab_dir) / "ablation.json") >> j;
    REQUIRE(j.at("rows").size() == 4);
    std::vector<std::string> removed;
    for (const auto& row : j.at("rows")) removed.push_back(row.at("removed"));
    CHECK(removed == std::vector<std::string>{"weather", "datetime", "events", "none"});
    CHECK(fx.stdout_text().find("reference results") != std::string::npos);
}

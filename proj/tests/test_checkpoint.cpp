#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "hyperfc/checkpoint.hpp"
#include "hyperfc/error.hpp"
#include "hyperfc/sha256.hpp"
#include "hyperfc/synthgen.hpp"

using namespace hyperfc;
namespace fs = std::filesystem;

namespace {

std::vector<uint8_t> read_all(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::vector<uint8_t>((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
}

struct Fixture {
    fs::path dir;
    Fixture() {
        dir = fs::temp_directory_path() / ("hyperfc_ckpt_" + std::to_string(::getpid()));
        fs::create_directories(dir);
    }
    ~Fixture() { fs::remove_all(dir); }
};

TrainConfig small_cfg(ModelKind kind) {
    TrainConfig cfg;
    cfg.model = kind;
    cfg.hidden = 2;
    cfg.seed = 42;
    cfg.max_epochs = 1;
    cfg.stride = 336;
    cfg.eval_stride = 336;
    cfg.batch_size = 4;
    return cfg;
}

} // namespace

TEST_CASE("sha256 matches the reference vectors") {
    CHECK(sha256_hex(nullptr, 0) ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    const std::string abc = "abc";
    CHECK(sha256_hex(abc.data(), abc.size()) ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    // 56 bytes forces the two-block padding path.
    const std::string two = "abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq";
    CHECK(sha256_hex(two.data(), two.size()) ==
          "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
}

TEST_CASE("checkpoint save/load/save is byte-identical and metrics survive") {
    Fixture fx;
    GeneratorConfig gen;
    gen.n_consumers = 2;
    gen.hours = 5100;
    gen.seed = 3;
    DatasetFrame frame = generate(gen).frame;

    for (ModelKind kind :
         {ModelKind::Hypernet, ModelKind::GlobalLinear, ModelKind::IndividualLinear}) {
        CAPTURE(model_kind_name(kind));
        TrainConfig cfg = small_cfg(kind);
        ExperimentResult result = run_experiment(frame, cfg);

        const std::string p1 = (fx.dir / "a.ckpt").string();
        const std::string p2 = (fx.dir / "b.ckpt").string();
        save_checkpoint(p1, *result.model, cfg, result.norm);

        LoadedCheckpoint loaded = load_checkpoint(p1);
        save_checkpoint(p2, *loaded.model, loaded.config, loaded.norm);
        CHECK(read_all(p1) == read_all(p2));

        // Evaluation after reload matches the pre-save run exactly.
        DatasetFrame nf = result.norm.apply(frame);
        auto test_w = make_windows(nf, result.splits.test, cfg.input_len, cfg.horizon,
                                   cfg.eval_stride);
        SplitMetrics before = evaluate_split(*result.model, nf, test_w, cfg);
        SplitMetrics after = evaluate_split(*loaded.model, nf, test_w, loaded.config);
        CHECK(before.mse == after.mse);
        CHECK(before.mae == after.mae);
    }
}

TEST_CASE("version mismatch is rejected") {
    Fixture fx;
    GeneratorConfig gen;
    gen.n_consumers = 2;
    gen.hours = 5100;
    gen.seed = 5;
    DatasetFrame frame = generate(gen).frame;
    TrainConfig cfg = small_cfg(ModelKind::GlobalLinear);
    ExperimentResult result = run_experiment(frame, cfg);
    const std::string path = (fx.dir / "v.ckpt").string();
    save_checkpoint(path, *result.model, cfg, result.norm);

    // Bump the version field (bytes 4..8).
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(4);
    uint32_t bad = 999;
    f.write(reinterpret_cast<const char*>(&bad), 4);
    f.close();
    CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("version"), DataError);
}

TEST_CASE("manifest and raw section lengths must agree") {
    Fixture fx;
    GeneratorConfig gen;
    gen.n_consumers = 2;
    gen.hours = 5100;
    gen.seed = 7;
    DatasetFrame frame = generate(gen).frame;
    TrainConfig cfg = small_cfg(ModelKind::GlobalLinear);
    ExperimentResult result = run_experiment(frame, cfg);
    const std::string path = (fx.dir / "t.ckpt").string();
    save_checkpoint(path, *result.model, cfg, result.norm);

    // Truncate the raw section.
    const auto bytes = read_all(path);
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size() - 16));
    out.close();
    CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("raw section"), DataError);
}

TEST_CASE("adapted checkpoints persist grown consumer tables") {
    Fixture fx;
    GeneratorConfig gen;
    gen.n_consumers = 3;
    gen.hours = 5100;
    gen.seed = 9;
    DatasetFrame frame = generate(gen).frame;
    TrainConfig cfg = small_cfg(ModelKind::Hypernet);
    cfg.adapt_steps = 2;
    cfg.adapt_batch = 2;

    Splits splits = chronological_split(frame.hours(), cfg.ratios, 504);
    NormalizationSpec norm = fit_normalizer(frame, splits.train);
    DatasetFrame nf = norm.apply(frame);
    auto windows = make_windows(nf, splits.train, cfg.input_len, cfg.horizon, cfg.stride);

    HypernetForecaster model(2, cfg);
    model.store().grow_consumers(3, cfg.seed);
    std::vector<ForecastWindow> new_w;
    for (const auto& w : windows)
        if (w.consumer_id == 2) new_w.push_back(w);
    adapt_embeddings(model, nf, new_w, {2}, cfg);

    const std::string path = (fx.dir / "grown.ckpt").string();
    save_checkpoint(path, model, cfg, norm);
    LoadedCheckpoint loaded = load_checkpoint(path);
    CHECK(loaded.n_consumers == 3);
    auto* hn = dynamic_cast<HypernetForecaster*>(loaded.model.get());
    REQUIRE(hn != nullptr);
    CHECK(hn->store().consumer_table().data() == model.store().consumer_table().data());
}

#include "hyperfc/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "hyperfc/error.hpp"

namespace hyperfc {

static_assert(std::endian::native == std::endian::little,
              "checkpoint serialization assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'H', 'Y', 'F', 'C'};

template <typename T>
void write_le(std::ofstream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_le(std::ifstream& in, const std::string& path) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw DataError(path + ": truncated checkpoint");
    return value;
}

nlohmann::json geometry_json(const ForecastModel& model, const TrainConfig& cfg) {
    nlohmann::json g = {{"block_rows", kBlockRows},
                        {"block_cols", kBlockCols},
                        {"upscale", cfg.upscale},
                        {"hidden", cfg.hidden},
                        {"input_len", cfg.input_len},
                        {"horizon", cfg.horizon},
                        {"input_channels", cfg.selection().input_channels()}};
    if (model.kind() == ModelKind::Hypernet)
        g["embedding_channels"] = cfg.selection().embedding_channels();
    return g;
}

nlohmann::json cardinalities_json() {
    return {{"hour", kHourCardinality},
            {"day_of_week", kDayOfWeekCardinality},
            {"day_of_month", kDayOfMonthCardinality},
            {"month", kMonthCardinality},
            {"school_holiday", 2},
            {"public_holiday", 2},
            {"teams", kNumTeams}};
}

} // namespace

void save_checkpoint(const std::string& path, const ForecastModel& model,
                     const TrainConfig& cfg, const NormalizationSpec& norm) {
    const std::vector<Tensor> params = model.parameters();
    const std::vector<std::string> names = model.parameter_names();

    nlohmann::json manifest = nlohmann::json::array();
    for (size_t i = 0; i < params.size(); ++i)
        manifest.push_back({{"name", names[i]}, {"shape", params[i].shape()}});

    nlohmann::json meta = {{"format", "hyperfc-checkpoint"},
                           {"format_version", kCheckpointVersion},
                           {"model", model_kind_name(model.kind())},
                           {"n_consumers", model.trained_consumers()},
                           {"geometry", geometry_json(model, cfg)},
                           {"factor_cardinalities", cardinalities_json()},
                           {"normalization", norm.to_json()},
                           {"config", cfg.to_json()},
                           {"manifest", manifest}};
    const std::string meta_str = meta.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint " + path);
    out.write(kMagic, 4);
    write_le<uint32_t>(out, kCheckpointVersion);
    write_le<uint64_t>(out, meta_str.size());
    out.write(meta_str.data(), static_cast<std::streamsize>(meta_str.size()));
    for (const auto& p : params)
        out.write(reinterpret_cast<const char*>(p.data().data()),
                  static_cast<std::streamsize>(p.numel() * sizeof(double)));
    if (!out) throw DataError("write failure on checkpoint " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw DataError(path + ": not a hyperfc checkpoint (bad magic)");
    const uint32_t version = read_le<uint32_t>(in, path);
    if (version != kCheckpointVersion)
        throw DataError(path + ": checkpoint version " + std::to_string(version) +
                        " is not supported (expected " + std::to_string(kCheckpointVersion) +
                        ")");
    const uint64_t meta_len = read_le<uint64_t>(in, path);
    std::string meta_str(meta_len, '\0');
    in.read(meta_str.data(), static_cast<std::streamsize>(meta_len));
    if (!in) throw DataError(path + ": truncated metadata block");
    nlohmann::json meta = nlohmann::json::parse(meta_str);

    LoadedCheckpoint loaded;
    loaded.metadata = meta;
    loaded.config = TrainConfig::from_json(meta.at("config"));
    loaded.norm = NormalizationSpec::from_json(meta.at("normalization"));
    loaded.n_consumers = meta.at("n_consumers").get<int>();

    const ModelKind kind = model_kind_from_name(meta.at("model").get<std::string>());
    std::shared_ptr<ForecastModel> model =
        make_model(kind, loaded.n_consumers, loaded.config);

    const auto& manifest = meta.at("manifest");
    std::vector<Tensor> params = model->parameters();
    const std::vector<std::string> names = model->parameter_names();
    if (manifest.size() != params.size())
        throw DataError(path + ": manifest lists " + std::to_string(manifest.size()) +
                        " tensors, model expects " + std::to_string(params.size()));

    // Validate the manifest against the declared raw length before reading.
    const std::streampos raw_begin = in.tellg();
    in.seekg(0, std::ios::end);
    const uint64_t raw_bytes = static_cast<uint64_t>(in.tellg() - raw_begin);
    uint64_t expected_bytes = 0;
    for (const auto& entry : manifest) {
        const Shape shape = entry.at("shape").get<Shape>();
        expected_bytes += shape_numel(shape) * sizeof(double);
    }
    if (expected_bytes != raw_bytes)
        throw DataError(path + ": manifest shapes account for " +
                        std::to_string(expected_bytes) + " bytes but the raw section has " +
                        std::to_string(raw_bytes));
    in.seekg(raw_begin);

    for (size_t i = 0; i < params.size(); ++i) {
        const auto& entry = manifest[i];
        const std::string name = entry.at("name").get<std::string>();
        const Shape shape = entry.at("shape").get<Shape>();
        if (name != names[i])
            throw DataError(path + ": manifest tensor '" + name + "' does not match model '" +
                            names[i] + "'");
        if (shape != params[i].shape())
            throw DataError(path + ": tensor '" + name + "' has shape " + shape_str(shape) +
                            ", model expects " + shape_str(params[i].shape()));
        in.read(reinterpret_cast<char*>(params[i].mutable_data().data()),
                static_cast<std::streamsize>(params[i].numel() * sizeof(double)));
        if (!in) throw DataError(path + ": truncated raw section at tensor '" + name + "'");
    }
    loaded.model = std::move(model);
    return loaded;
}

} // namespace hyperfc

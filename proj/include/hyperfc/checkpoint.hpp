#ifndef HYPERFC_CHECKPOINT_HPP
#define HYPERFC_CHECKPOINT_HPP

#include <memory>
#include <string>

#include <json.hpp>

#include "hyperfc/training.hpp"

namespace hyperfc {

// Binary checkpoint:
//   "HYFC" magic, u32 LE format version,
//   u64 LE metadata length, metadata JSON (geometry, consumer count,
//   factor cardinalities, normalization spec, full config echo, tensor
//   manifest),
//   raw little-endian 64-bit floats, tensors in manifest order.
// The manifest shapes must multiply out to the raw-section length;
// version mismatches are rejected.
constexpr uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const ForecastModel& model,
                     const TrainConfig& cfg, const NormalizationSpec& norm);

struct LoadedCheckpoint {
    std::shared_ptr<ForecastModel> model;
    TrainConfig config;
    NormalizationSpec norm;
    int n_consumers = 0;
    nlohmann::json metadata;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

} // namespace hyperfc

#endif

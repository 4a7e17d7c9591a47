#ifndef HYPERFC_HYPERNET_HPP
#define HYPERFC_HYPERNET_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "hyperfc/embeddings.hpp"
#include "hyperfc/tensor.hpp"

namespace hyperfc {

// Splits the upscale factor into four per-stage factors (ascending,
// product exactly u) so there is one residual block after each upsample.
std::array<int, 4> stage_factors_for(int upscale);

struct HypernetGeometry {
    int in_channels = 5;   // assembled embedding channels
    int out_channels = 5;  // p, linear-head input channels
    int hidden = 64;       // conv width C
    int upscale = 24;      // u
    int in_rows = 2 * kBlockRows;  // 14
    int in_cols = kBlockCols;      // 7

    int output_rows() const { return in_rows * upscale; }  // L
    int output_cols() const { return in_cols * upscale; }  // h
};

// Pre-activation residual block at fixed channel width:
//   x + conv(relu(conv(relu(x)))).
class ResidualBlock {
public:
    ResidualBlock() = default;
    ResidualBlock(int channels, Rng& rng);

    Tensor forward(const Tensor& x) const;
    std::vector<Tensor> parameters() const { return {k1_, b1_, k2_, b2_}; }

private:
    Tensor k1_, b1_, k2_, b2_;
};

// Weight-generating decoder: maps the stacked embedding tensor to the
// per-consumer linear model weights through a stem conv, four
// (nearest-upsample, residual block) stages and a zero-initialized head
// conv. Pure function of (parameters, input); no normalization layers.
class HypernetModel {
public:
    HypernetModel() = default;
    HypernetModel(const HypernetGeometry& geometry, uint64_t seed);

    // [p x L x h] generated weights. DimensionError on geometry mismatch.
    Tensor generate_weights(const Tensor& z) const;

    const HypernetGeometry& geometry() const { return geom_; }
    std::vector<Tensor> parameters() const;
    std::vector<std::string> parameter_names() const;
    size_t parameter_count() const;

private:
    HypernetGeometry geom_;
    std::array<int, 4> factors_{};
    Tensor stem_k_, stem_b_;
    std::array<ResidualBlock, 4> blocks_;
    Tensor head_k_, head_b_;
};

// Trainable-scalar accounting, split by origin.
struct ParamCounts {
    size_t hypernet = 0;
    size_t embeddings = 0;
    size_t total() const { return hypernet + embeddings; }
};

ParamCounts count_parameters(const HypernetModel& model, const EmbeddingStore& store);

} // namespace hyperfc

#endif

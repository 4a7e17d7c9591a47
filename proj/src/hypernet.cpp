#include "hyperfc/hypernet.hpp"

#include <algorithm>
#include <cmath>

#include "hyperfc/error.hpp"

namespace hyperfc {

std::array<int, 4> stage_factors_for(int upscale) {
    if (upscale < 1) throw ArgumentError("upscale factor must be >= 1");
    std::vector<int> primes;
    int rest = upscale;
    for (int p = 2; p * p <= rest; ++p)
        while (rest % p == 0) {
            primes.push_back(p);
            rest /= p;
        }
    if (rest > 1) primes.push_back(rest);
    while (primes.size() < 4) primes.push_back(1);
    std::sort(primes.begin(), primes.end());
    // Too many prime factors: merge the smallest pair until four remain.
    while (primes.size() > 4) {
        primes[1] *= primes[0];
        primes.erase(primes.begin());
        std::sort(primes.begin(), primes.end());
    }
    return {primes[0], primes[1], primes[2], primes[3]};
}

namespace {

Tensor conv_kernel_init(int out_ch, int in_ch, Rng& rng) {
    const double stddev = std::sqrt(2.0 / (static_cast<double>(in_ch) * 9.0));
    return Tensor::randn({out_ch, in_ch, 3, 3}, rng, stddev, true);
}

} // namespace

ResidualBlock::ResidualBlock(int channels, Rng& rng) {
    k1_ = conv_kernel_init(channels, channels, rng);
    b1_ = Tensor::zeros({channels}, true);
    k2_ = conv_kernel_init(channels, channels, rng);
    b2_ = Tensor::zeros({channels}, true);
}

Tensor ResidualBlock::forward(const Tensor& x) const {
    Tensor h = conv2d(relu(x), k1_, b1_);
    h = conv2d(relu(h), k2_, b2_);
    return add(x, h);
}

HypernetModel::HypernetModel(const HypernetGeometry& geometry, uint64_t seed)
    : geom_(geometry), factors_(stage_factors_for(geometry.upscale)) {
    if (geom_.in_channels < 1 || geom_.out_channels < 1 || geom_.hidden < 1)
        throw ArgumentError("hypernet geometry requires positive channel counts");
    Rng rng(derive_seed(seed, "hypernet"));
    stem_k_ = conv_kernel_init(geom_.hidden, geom_.in_channels, rng);
    stem_b_ = Tensor::zeros({geom_.hidden}, true);
    for (auto& block : blocks_) block = ResidualBlock(geom_.hidden, rng);
    // Zero head: initial generated weights are zero, so early forecasts
    // start damped at zero in normalized units.
    head_k_ = Tensor::zeros({geom_.out_channels, geom_.hidden, 3, 3}, true);
    head_b_ = Tensor::zeros({geom_.out_channels}, true);
}

Tensor HypernetModel::generate_weights(const Tensor& z) const {
    const Shape expected{geom_.in_channels, geom_.in_rows, geom_.in_cols};
    if (z.shape() != expected)
        throw DimensionError("hypernet input shape " + shape_str(z.shape()) +
                             " does not match model geometry " + shape_str(expected));
    Tensor t = conv2d(z, stem_k_, stem_b_);
    for (size_t s = 0; s < 4; ++s) {
        if (factors_[s] > 1) t = upsample_nearest(t, factors_[s]);
        t = blocks_[s].forward(t);
    }
    return conv2d(t, head_k_, head_b_);
}

std::vector<Tensor> HypernetModel::parameters() const {
    std::vector<Tensor> params{stem_k_, stem_b_};
    for (const auto& block : blocks_)
        for (const auto& p : block.parameters()) params.push_back(p);
    params.push_back(head_k_);
    params.push_back(head_b_);
    return params;
}

std::vector<std::string> HypernetModel::parameter_names() const {
    std::vector<std::string> names{"hypernet.stem.kernel", "hypernet.stem.bias"};
    for (int s = 0; s < 4; ++s) {
        const std::string base = "hypernet.block" + std::to_string(s);
        names.push_back(base + ".kernel1");
        names.push_back(base + ".bias1");
        names.push_back(base + ".kernel2");
        names.push_back(base + ".bias2");
    }
    names.push_back("hypernet.head.kernel");
    names.push_back("hypernet.head.bias");
    return names;
}

size_t HypernetModel::parameter_count() const {
    size_t n = 0;
    for (const auto& p : parameters()) n += p.numel();
    return n;
}

ParamCounts count_parameters(const HypernetModel& model, const EmbeddingStore& store) {
    return {model.parameter_count(), store.parameter_count()};
}

} // namespace hyperfc

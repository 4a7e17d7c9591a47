#include <doctest.h>

#include <cmath>

#include "hyperfc/error.hpp"
#include "hyperfc/forecaster.hpp"
#include "hyperfc/hypernet.hpp"
#include "oracles.hpp"

using namespace hyperfc;

TEST_CASE("linear forecast with zero weights is zero") {
    Rng rng(1);
    Tensor w = Tensor::zeros({3, 8, 4});
    Tensor x = Tensor::randn({3, 8}, rng, 1.0);
    Tensor y = linear_forecast(w, x);
    for (double v : y.data()) CHECK(v == 0.0);
}

TEST_CASE("linear forecast selector reproduces a persistence forecast") {
    const int p = 2, l = 6, h = 4;
    Tensor w = Tensor::zeros({p, l, h});
    for (int j = 0; j < h; ++j)
        w.mutable_data()[static_cast<size_t>((0 * l + (l - 1)) * h + j)] = 1.0;
    Rng rng(2);
    Tensor x = Tensor::randn({p, l}, rng, 1.0);
    Tensor y = linear_forecast(w, x);
    for (int j = 0; j < h; ++j)
        CHECK(y[static_cast<size_t>(j)] == x.data()[static_cast<size_t>(l - 1)]);
}

TEST_CASE("linear forecast matches the brute-force oracle") {
    Rng rng(3);
    Tensor w = Tensor::randn({2, 4, 3}, rng, 1.0);
    Tensor x = Tensor::randn({2, 4}, rng, 1.0);
    auto expect = oracle::linear_forecast(w.data(), x.data(), 2, 4, 3);
    CHECK(oracle::max_abs_diff(linear_forecast(w, x).data(), expect) < 1e-12);
}

TEST_CASE("linear forecast is linear in the input") {
    Rng rng(4);
    Tensor w = Tensor::randn({3, 5, 4}, rng, 1.0);
    Tensor x1 = Tensor::randn({3, 5}, rng, 1.0);
    Tensor x2 = Tensor::randn({3, 5}, rng, 1.0);
    const double a = 1.7, b = -0.4;
    Tensor combo = add(mul_scalar(x1, a), mul_scalar(x2, b));
    Tensor lhs = linear_forecast(w, combo);
    Tensor rhs = add(mul_scalar(linear_forecast(w, x1), a),
                     mul_scalar(linear_forecast(w, x2), b));
    CHECK(oracle::max_abs_diff(lhs.data(), rhs.data()) < 1e-12);
}

TEST_CASE("linear forecast rejects mismatched shapes") {
    CHECK_THROWS_AS(linear_forecast(Tensor::zeros({2, 4, 3}), Tensor::zeros({2, 5})),
                    DimensionError);
}

TEST_CASE("global model with zero weights forecasts its bias") {
    GlobalLinearModel model(2, 6, 3, 4, 0, 7);
    auto params = model.parameters();
    for (auto& v : params[1].mutable_data()) v = 0.75;  // bias
    // Zero-mean consumption row keeps the reversible normalization out of
    // the picture.
    std::vector<double> input = {1.0, -1.0, 2.0, -2.0, 0.5, -0.5,
                                 0.3, 0.3,  0.3, 0.3,  0.3, 0.3};
    Tensor y = model.forecast(input, 0.0, 0);
    for (double v : y.data()) CHECK(v == 0.75);
}

TEST_CASE("global model forecasts are shift-equivariant in the consumption level") {
    const int p = 3, l = 8, h = 5;
    GlobalLinearModel model(p, l, h, 4, 2, 11);
    Rng rng(12);
    for (auto& v : model.parameters()[0].mutable_data()) v = 0.3 * rng.normal();
    for (auto& v : model.parameters()[1].mutable_data()) v = 0.1 * rng.normal();

    std::vector<double> input(static_cast<size_t>(p) * l);
    for (auto& v : input) v = rng.normal();
    double mean = 0.0;
    for (int t = 0; t < l; ++t) mean += input[static_cast<size_t>(t)];
    mean /= l;

    const double delta = 2.375;
    std::vector<double> shifted = input;
    for (int t = 0; t < l; ++t) shifted[static_cast<size_t>(t)] += delta;

    Tensor y0 = model.forecast(input, mean, 1);
    Tensor y1 = model.forecast(shifted, mean + delta, 1);
    for (size_t j = 0; j < y0.numel(); ++j)
        CHECK(y1[j] - y0[j] == doctest::Approx(delta).epsilon(1e-12));
}

TEST_CASE("id channels make equal inputs consumer-dependent") {
    const int p = 2, l = 6, h = 3;
    GlobalLinearModel model(p, l, h, 5, 3, 13);
    Rng rng(14);
    for (auto& v : model.parameters()[0].mutable_data()) v = rng.normal();
    std::vector<double> input(static_cast<size_t>(p) * l);
    for (auto& v : input) v = rng.normal();
    Tensor a = model.forecast(input, 0.1, 0);
    Tensor b = model.forecast(input, 0.1, 3);
    CHECK(oracle::max_abs_diff(a.data(), b.data()) > 1e-8);
}

TEST_CASE("individual bank keeps consumers fully separate") {
    IndividualLinearBank bank(3, 2, 6, 4);
    Rng rng(15);
    std::vector<double> input(12);
    for (auto& v : input) v = rng.normal();
    Tensor before = bank.forecast(1, input, 0.0);
    for (auto& v : bank.parameters_for(0)[0].mutable_data()) v = rng.normal();
    Tensor after = bank.forecast(1, input, 0.0);
    CHECK(before.data() == after.data());
}

TEST_CASE("individual persistence model repeats the last observation") {
    const int p = 1, l = 5, h = 3;
    IndividualLinearBank bank(2, p, l, h);
    Tensor w = bank.parameters_for(0)[0];
    for (int j = 0; j < h; ++j)
        w.mutable_data()[static_cast<size_t>(((l - 1) * h) + j)] = 1.0;
    std::vector<double> input = {0.4, 0.9, 1.4, 0.2, 1.1};
    double mean = (0.4 + 0.9 + 1.4 + 0.2 + 1.1) / 5.0;
    Tensor y = bank.forecast(0, input, mean);
    for (int j = 0; j < h; ++j)
        CHECK(y[static_cast<size_t>(j)] == doctest::Approx(1.1).epsilon(1e-12));
}

TEST_CASE("individual bank parameter count follows the closed form") {
    IndividualLinearBank bank(10, 5, 336, 168);
    CHECK(bank.parameter_count() == 2824080u);
    CHECK_THROWS_AS(bank.forecast(10, std::vector<double>(5 * 336, 0.0), 0.0), IndexError);
}

TEST_CASE("hypernet forecasts are nonlinear in the embedding input") {
    HypernetGeometry geom;
    geom.hidden = 4;
    geom.upscale = 2;
    HypernetModel model(geom, 17);
    // Randomize the zero head so outputs are nontrivial.
    {
        Rng rng(18);
        auto params = model.parameters();
        auto names = model.parameter_names();
        for (size_t i = 0; i < params.size(); ++i)
            if (names[i].rfind("hypernet.head", 0) == 0)
                for (auto& v : params[i].mutable_data()) v = 0.2 * rng.normal();
    }
    Rng rng(19);
    Tensor x = Tensor::randn({5, geom.output_rows()}, rng, 1.0);
    bool found_nonlinear = false;
    for (int trial = 0; trial < 5 && !found_nonlinear; ++trial) {
        Tensor z1 = Tensor::randn({5, 14, 7}, rng, 1.0);
        Tensor z2 = Tensor::randn({5, 14, 7}, rng, 1.0);
        Tensor f_sum = linear_forecast(model.generate_weights(add(z1, z2)), x);
        Tensor sum_f = add(linear_forecast(model.generate_weights(z1), x),
                           linear_forecast(model.generate_weights(z2), x));
        if (oracle::max_abs_diff(f_sum.data(), sum_f.data()) > 1e-6) found_nonlinear = true;
    }
    CHECK(found_nonlinear);
}

// Rough throughput probe for the decoder-style forward/backward path.
#include <chrono>
#include <cstdio>

#include "hyperfc/parallel.hpp"
#include "hyperfc/rng.hpp"
#include "hyperfc/tensor.hpp"

using namespace hyperfc;

int main(int argc, char** argv) {
    tune_allocator_for_tensors();
    int C = argc > 1 ? std::atoi(argv[1]) : 8;
    int reps = argc > 2 ? std::atoi(argv[2]) : 10;
    Rng rng(1);

    Tensor z = Tensor::randn({5, 14, 7}, rng, 1.0);
    Tensor ks = Tensor::randn({C, 5, 3, 3}, rng, 0.1, true);
    Tensor bs = Tensor::zeros({C}, true);
    Tensor k1 = Tensor::randn({C, C, 3, 3}, rng, 0.1, true);
    Tensor b1 = Tensor::zeros({C}, true);
    Tensor k2 = Tensor::randn({C, C, 3, 3}, rng, 0.1, true);
    Tensor b2 = Tensor::zeros({C}, true);
    Tensor kh = Tensor::randn({5, C, 3, 3}, rng, 0.1, true);
    Tensor bh = Tensor::zeros({5}, true);

    auto forward = [&]() {
        Tensor t = conv2d(z, ks, bs);
        int factors[4] = {2, 2, 2, 3};
        for (int s = 0; s < 4; ++s) {
            t = upsample_nearest(t, factors[s]);
            Tensor h = conv2d(relu(t), k1, b1);
            h = conv2d(relu(h), k2, b2);
            t = add(t, h);
        }
        return mean_all(conv2d(t, kh, bh));
    };

    // warmup
    backward(forward());

    auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < reps; ++i) backward(forward());
    auto t1 = std::chrono::steady_clock::now();
    double sec = std::chrono::duration<double>(t1 - t0).count() / reps;

    // flop estimate: convs only, forward = 2*px*cin*cout*9, backward ~ 2x
    double fwd = 0.0;
    double px_in = 14.0 * 7.0;
    fwd += 2.0 * px_in * 5 * C * 9;
    double px = px_in;
    int factors[4] = {2, 2, 2, 3};
    for (int s = 0; s < 4; ++s) {
        px *= factors[s] * factors[s];
        fwd += 2.0 * (2.0 * px * C * C * 9);
    }
    fwd += 2.0 * px * C * 5 * 9;
    double total = 3.0 * fwd;
    std::printf("C=%d fwd+bwd %.1f ms  est %.2f GFLOP/s (fwd %.0f Mflop)\n", C, sec * 1e3,
                total / sec / 1e9, fwd / 1e6);
    return 0;
}

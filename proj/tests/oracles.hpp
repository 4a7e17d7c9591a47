#ifndef HYPERFC_TESTS_ORACLES_HPP
#define HYPERFC_TESTS_ORACLES_HPP

// Brute-force reference implementations used to pin expected values.
// These stay independent of the library kernels they check: plain loops
// over plain vectors, no Tensor involvement.

#include <algorithm>
#include <cstddef>
#include <vector>

namespace oracle {

// [m x k] * [k x n], row major, triple loop.
inline std::vector<double> matmul(const std::vector<double>& a, const std::vector<double>& b,
                                  int m, int k, int n) {
    std::vector<double> c(static_cast<size_t>(m) * n, 0.0);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int kk = 0; kk < k; ++kk)
                acc += a[static_cast<size_t>(i) * k + kk] * b[static_cast<size_t>(kk) * n + j];
            c[static_cast<size_t>(i) * n + j] = acc;
        }
    return c;
}

// Sliding-window 3x3 cross-correlation, zero padding 1, same-size output.
// x: [ci x h x w], kernel: [co x ci x 3 x 3], bias: [co].
inline std::vector<double> conv2d(const std::vector<double>& x, const std::vector<double>& k,
                                  const std::vector<double>& bias, int ci_n, int h, int w,
                                  int co_n) {
    std::vector<double> y(static_cast<size_t>(co_n) * h * w, 0.0);
    for (int co = 0; co < co_n; ++co)
        for (int oy = 0; oy < h; ++oy)
            for (int ox = 0; ox < w; ++ox) {
                double acc = bias[co];
                for (int ci = 0; ci < ci_n; ++ci)
                    for (int ky = 0; ky < 3; ++ky)
                        for (int kx = 0; kx < 3; ++kx) {
                            const int iy = oy + ky - 1;
                            const int ix = ox + kx - 1;
                            if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                            acc += k[((static_cast<size_t>(co) * ci_n + ci) * 3 + ky) * 3 + kx] *
                                   x[(static_cast<size_t>(ci) * h + iy) * w + ix];
                        }
                y[(static_cast<size_t>(co) * h + oy) * w + ox] = acc;
            }
    return y;
}

// y[j] = sum_c sum_l W[c,l,j] * input[c,l];  W: [p x L x h], input: [p x L].
inline std::vector<double> linear_forecast(const std::vector<double>& w,
                                           const std::vector<double>& input, int p, int l,
                                           int h) {
    std::vector<double> y(static_cast<size_t>(h), 0.0);
    for (int j = 0; j < h; ++j) {
        double acc = 0.0;
        for (int c = 0; c < p; ++c)
            for (int ll = 0; ll < l; ++ll)
                acc += w[(static_cast<size_t>(c) * l + ll) * h + j] *
                       input[static_cast<size_t>(c) * l + ll];
        y[static_cast<size_t>(j)] = acc;
    }
    return y;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

} // namespace oracle

#endif

#include "hyperfc/grad_check.hpp"

#include <cmath>

#include "hyperfc/error.hpp"

namespace hyperfc {

double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double eps) {
    if (eps <= 0.0) throw ArgumentError("grad_check eps must be positive");

    Tensor probe = x.clone();
    probe.set_requires_grad(true);
    Tensor loss = f(probe);
    if (loss.numel() != 1)
        throw ArgumentError("grad_check requires a scalar-valued function");
    if (!std::isfinite(loss.value()))
        throw NumericError("grad_check: non-finite function value");
    backward(loss);
    std::vector<double> analytic = probe.grad();

    double max_err = 0.0;
    NoGradGuard no_grad;
    Tensor shifted = x.clone();
    std::vector<double>& v = shifted.mutable_data();
    for (size_t i = 0; i < v.size(); ++i) {
        const double orig = v[i];
        v[i] = orig + eps;
        const double up = f(shifted).value();
        v[i] = orig - eps;
        const double down = f(shifted).value();
        v[i] = orig;
        if (!std::isfinite(up) || !std::isfinite(down))
            throw NumericError("grad_check: non-finite function value during perturbation");
        const double numeric = (up - down) / (2.0 * eps);
        const double denom = std::max({1.0, std::fabs(analytic[i]), std::fabs(numeric)});
        max_err = std::max(max_err, std::fabs(analytic[i] - numeric) / denom);
    }
    return max_err;
}

} // namespace hyperfc

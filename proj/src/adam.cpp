#include "hyperfc/adam.hpp"

#include <cmath>

#include "hyperfc/error.hpp"

namespace hyperfc {

AdamOptimizer::AdamOptimizer(std::vector<Tensor> params, double lr)
    : params_(std::move(params)), lr_(lr) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto& p : params_) {
        m_.emplace_back(p.numel(), 0.0);
        v_.emplace_back(p.numel(), 0.0);
    }
}

void AdamOptimizer::step() {
    for (const auto& p : params_)
        if (!p.has_grad())
            throw StateError("adam step: parameter is missing its gradient");
    ++step_count_;
    const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(step_count_));
    for (size_t pi = 0; pi < params_.size(); ++pi) {
        double* w = params_[pi].mutable_data().data();
        const double* g = params_[pi].grad().data();
        double* m = m_[pi].data();
        double* v = v_[pi].data();
        const size_t n = params_[pi].numel();
        for (size_t i = 0; i < n; ++i) {
            m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * g[i];
            v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            w[i] -= lr_ * mhat / (std::sqrt(vhat) + kEps);
        }
    }
}

void AdamOptimizer::zero_grad() {
    for (auto& p : params_) p.zero_grad();
}

} // namespace hyperfc

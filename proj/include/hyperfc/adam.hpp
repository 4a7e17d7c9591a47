#ifndef HYPERFC_ADAM_HPP
#define HYPERFC_ADAM_HPP

#include <vector>

#include "hyperfc/tensor.hpp"

namespace hyperfc {

// Adam with bias correction (beta1 0.9, beta2 0.999, eps 1e-8).
// Moment state advances one step per call to step(); every parameter
// must carry a gradient buffer when step() runs.
class AdamOptimizer {
public:
    explicit AdamOptimizer(std::vector<Tensor> params, double lr = 1e-3);

    void step();
    void zero_grad();

    double learning_rate() const { return lr_; }
    void set_learning_rate(double lr) { lr_ = lr; }
    long step_count() const { return step_count_; }
    const std::vector<Tensor>& params() const { return params_; }

    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEps = 1e-8;

private:
    std::vector<Tensor> params_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    double lr_;
    long step_count_ = 0;
};

} // namespace hyperfc

#endif

#ifndef HYPERFC_GRAD_CHECK_HPP
#define HYPERFC_GRAD_CHECK_HPP

#include <functional>

#include "hyperfc/tensor.hpp"

namespace hyperfc {

// Central-difference gradient verification for a scalar-valued function.
//
// Runs f once with autodiff to collect the analytic gradient of x, then
// perturbs every coordinate of x by +/- eps and compares. Returns the
// maximum over coordinates of
//     |analytic - numeric| / max(1, |analytic|, |numeric|).
// f must be a pure function of x (it may close over other fixed tensors).
// Throws NumericError if any evaluation is non-finite.
double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                  double eps = 1e-5);

} // namespace hyperfc

#endif

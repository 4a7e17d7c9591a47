#ifndef HYPERFC_FORECASTER_HPP
#define HYPERFC_FORECASTER_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "hyperfc/tensor.hpp"

namespace hyperfc {

// y[j] = sum_c sum_l W[c, l, j] * input[c, l].
// weights: [p x L x h], input: [p x L] -> [h]. No bias term.
Tensor linear_forecast(const Tensor& weights, const Tensor& input);

// Shared linear model with reversible per-window normalization on the
// consumption channel: the window mean is removed from row 0 before the
// linear map and added back to the forecast, making forecasts
// shift-equivariant in the consumption level. Optionally learns a
// per-consumer ID embedding appended as constant-in-time channels.
class GlobalLinearModel {
public:
    GlobalLinearModel() = default;
    // id_embed_dim 0 disables the ID channels.
    GlobalLinearModel(int input_channels, int input_len, int horizon, int n_consumers,
                      int id_embed_dim, uint64_t seed);

    // input: row-major [input_channels x input_len] in dataset-normalized
    // units, consumption first. input_mean is the consumption-row mean.
    Tensor forecast(const std::vector<double>& input, double input_mean,
                    int consumer_id) const;

    int input_channels() const { return p_; }
    int id_embed_dim() const { return id_dim_; }
    int input_len() const { return input_len_; }
    int horizon() const { return horizon_; }

    std::vector<Tensor> parameters() const;
    std::vector<std::string> parameter_names() const;
    size_t parameter_count() const;

private:
    int p_ = 0;
    int id_dim_ = 0;
    int input_len_ = 0;
    int horizon_ = 0;
    Tensor weights_;   // [(p + id_dim) x L x h]
    Tensor bias_;      // [h]
    Tensor id_table_;  // [N x id_dim], absent when id_dim == 0
    Tensor ones_row_;  // [1 x L] constant used to tile ID embeddings over time
};

// One dedicated linear model per consumer (same reversible-normalization
// head as the global model, disjoint parameters per consumer).
class IndividualLinearBank {
public:
    IndividualLinearBank() = default;
    IndividualLinearBank(int n_consumers, int input_channels, int input_len, int horizon);

    Tensor forecast(int consumer_id, const std::vector<double>& input,
                    double input_mean) const;

    int consumers() const { return static_cast<int>(weights_.size()); }
    int input_channels() const { return p_; }
    int input_len() const { return input_len_; }
    int horizon() const { return horizon_; }

    // Parameters of one consumer's model (weights, bias).
    std::vector<Tensor> parameters_for(int consumer_id) const;
    // All parameters, consumer-major.
    std::vector<Tensor> parameters() const;
    std::vector<std::string> parameter_names() const;
    size_t parameter_count() const;

private:
    void check_consumer(int consumer_id) const;

    int p_ = 0;
    int input_len_ = 0;
    int horizon_ = 0;
    std::vector<Tensor> weights_;  // per consumer [p x L x h]
    std::vector<Tensor> biases_;   // per consumer [h]
};

// Centered copy of the input: consumption row minus its mean, other
// rows untouched.
std::vector<double> center_consumption_row(const std::vector<double>& input, int input_len,
                                           double input_mean);

} // namespace hyperfc

#endif

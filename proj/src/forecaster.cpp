#include "hyperfc/forecaster.hpp"

#include "hyperfc/error.hpp"
#include "hyperfc/rng.hpp"

namespace hyperfc {

Tensor linear_forecast(const Tensor& weights, const Tensor& input) {
    if (weights.rank() != 3 || input.rank() != 2 || weights.dim(0) != input.dim(0) ||
        weights.dim(1) != input.dim(1))
        throw DimensionError("linear_forecast shape mismatch: weights " +
                             shape_str(weights.shape()) + " vs input " +
                             shape_str(input.shape()));
    const int p = weights.dim(0), l = weights.dim(1), h = weights.dim(2);
    Tensor flat_w = reshape(weights, {p * l, h});
    Tensor flat_x = reshape(input, {1, p * l});
    return reshape(matmul(flat_x, flat_w), {h});
}

std::vector<double> center_consumption_row(const std::vector<double>& input, int input_len,
                                           double input_mean) {
    std::vector<double> centered = input;
    for (int t = 0; t < input_len; ++t) centered[static_cast<size_t>(t)] -= input_mean;
    return centered;
}

// ---- GlobalLinearModel -------------------------------------------------------

GlobalLinearModel::GlobalLinearModel(int input_channels, int input_len, int horizon,
                                     int n_consumers, int id_embed_dim, uint64_t seed)
    : p_(input_channels), id_dim_(id_embed_dim), input_len_(input_len), horizon_(horizon) {
    if (p_ < 1 || input_len_ < 1 || horizon_ < 1)
        throw ArgumentError("global linear model needs positive dimensions");
    weights_ = Tensor::zeros({p_ + id_dim_, input_len_, horizon_}, true);
    bias_ = Tensor::zeros({horizon_}, true);
    if (id_dim_ > 0) {
        Rng rng(derive_seed(seed, "global:id_table"));
        id_table_ = Tensor::randn({n_consumers, id_dim_}, rng, 0.02, true);
    }
    ones_row_ = Tensor::full({1, input_len_}, 1.0);
}

Tensor GlobalLinearModel::forecast(const std::vector<double>& input, double input_mean,
                                   int consumer_id) const {
    if (input.size() != static_cast<size_t>(p_) * static_cast<size_t>(input_len_))
        throw DimensionError("global forecast input has " + std::to_string(input.size()) +
                             " values, expected " + std::to_string(p_) + " x " +
                             std::to_string(input_len_));
    Tensor x = Tensor::from_data({p_, input_len_},
                                 center_consumption_row(input, input_len_, input_mean));
    if (id_dim_ > 0) {
        if (consumer_id < 0 || consumer_id >= id_table_.dim(0))
            throw IndexError("consumer id " + std::to_string(consumer_id) +
                             " out of range for the ID embedding table");
        Tensor e = reshape(slice(id_table_, consumer_id, 1), {id_dim_, 1});
        x = concat0({x, matmul(e, ones_row_)});
    }
    Tensor y = add(linear_forecast(weights_, x), bias_);
    return add_scalar(y, input_mean);
}

std::vector<Tensor> GlobalLinearModel::parameters() const {
    std::vector<Tensor> params{weights_, bias_};
    if (id_dim_ > 0) params.push_back(id_table_);
    return params;
}

std::vector<std::string> GlobalLinearModel::parameter_names() const {
    std::vector<std::string> names{"global.weights", "global.bias"};
    if (id_dim_ > 0) names.push_back("global.id_table");
    return names;
}

size_t GlobalLinearModel::parameter_count() const {
    size_t n = 0;
    for (const auto& p : parameters()) n += p.numel();
    return n;
}

// ---- IndividualLinearBank -----------------------------------------------------

IndividualLinearBank::IndividualLinearBank(int n_consumers, int input_channels, int input_len,
                                           int horizon)
    : p_(input_channels), input_len_(input_len), horizon_(horizon) {
    if (n_consumers < 1 || p_ < 1 || input_len_ < 1 || horizon_ < 1)
        throw ArgumentError("individual bank needs positive dimensions");
    weights_.reserve(static_cast<size_t>(n_consumers));
    biases_.reserve(static_cast<size_t>(n_consumers));
    for (int i = 0; i < n_consumers; ++i) {
        weights_.push_back(Tensor::zeros({p_, input_len_, horizon_}, true));
        biases_.push_back(Tensor::zeros({horizon_}, true));
    }
}

void IndividualLinearBank::check_consumer(int consumer_id) const {
    if (consumer_id < 0 || consumer_id >= consumers())
        throw IndexError("no individual model for consumer " + std::to_string(consumer_id) +
                         " (bank holds " + std::to_string(consumers()) + ")");
}

Tensor IndividualLinearBank::forecast(int consumer_id, const std::vector<double>& input,
                                      double input_mean) const {
    check_consumer(consumer_id);
    if (input.size() != static_cast<size_t>(p_) * static_cast<size_t>(input_len_))
        throw DimensionError("individual forecast input has " + std::to_string(input.size()) +
                             " values, expected " + std::to_string(p_) + " x " +
                             std::to_string(input_len_));
    Tensor x = Tensor::from_data({p_, input_len_},
                                 center_consumption_row(input, input_len_, input_mean));
    Tensor y = add(linear_forecast(weights_[static_cast<size_t>(consumer_id)], x),
                   biases_[static_cast<size_t>(consumer_id)]);
    return add_scalar(y, input_mean);
}

std::vector<Tensor> IndividualLinearBank::parameters_for(int consumer_id) const {
    check_consumer(consumer_id);
    return {weights_[static_cast<size_t>(consumer_id)],
            biases_[static_cast<size_t>(consumer_id)]};
}

std::vector<Tensor> IndividualLinearBank::parameters() const {
    std::vector<Tensor> params;
    params.reserve(weights_.size() * 2);
    for (size_t i = 0; i < weights_.size(); ++i) {
        params.push_back(weights_[i]);
        params.push_back(biases_[i]);
    }
    return params;
}

std::vector<std::string> IndividualLinearBank::parameter_names() const {
    std::vector<std::string> names;
    names.reserve(weights_.size() * 2);
    for (size_t i = 0; i < weights_.size(); ++i) {
        names.push_back("individual." + std::to_string(i) + ".weights");
        names.push_back("individual." + std::to_string(i) + ".bias");
    }
    return names;
}

size_t IndividualLinearBank::parameter_count() const {
    return static_cast<size_t>(consumers()) *
           (static_cast<size_t>(p_) * input_len_ * horizon_ + static_cast<size_t>(horizon_));
}

} // namespace hyperfc

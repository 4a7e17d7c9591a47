#ifndef HYPERFC_TRAINING_HPP
#define HYPERFC_TRAINING_HPP

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hyperfc/dataset.hpp"
#include "hyperfc/forecaster.hpp"
#include "hyperfc/hypernet.hpp"
#include "hyperfc/tensor.hpp"

namespace hyperfc {

enum class ModelKind { Hypernet, GlobalLinear, IndividualLinear };
enum class FactorsMode { None, IdOnly, All };

std::string model_kind_name(ModelKind kind);
ModelKind model_kind_from_name(const std::string& name);
std::string factors_mode_name(FactorsMode mode);
FactorsMode factors_mode_from_name(const std::string& name);

struct AblationFlags {
    bool drop_weather = false;
    bool drop_datetime = false;
    bool drop_events = false;
    bool drop_all_external = false;
};

struct TrainConfig {
    ModelKind model = ModelKind::Hypernet;
    FactorsMode factors = FactorsMode::All;
    AblationFlags ablation;

    double learning_rate = 1e-3;
    int batch_size = 128;
    int max_epochs = 30;
    int early_stop_patience = 3;
    uint64_t seed = 0;
    int repetitions = 3;

    int input_len = 336;  // L
    int horizon = 168;    // h
    int hidden = 64;      // hypernet conv width C
    int upscale = 24;     // u
    int id_embed_dim = 8;  // global baseline ID channels (0 disables)

    size_t stride = 24;       // train window stride
    size_t eval_stride = 24;  // test window stride
    size_t val_stride = 0;    // validation stride (0: same as eval_stride)
    size_t max_windows_per_epoch = 0;  // 0 = all (random subset per epoch otherwise)
    size_t max_val_windows = 0;        // 0 = all (fixed random subset otherwise)

    int adapt_steps = 200;
    int adapt_batch = 32;

    int workers = 0;  // 0 = hardware default
    SplitRatios ratios;

    // Effective factor selection after mode and ablation flags.
    FactorSelection selection() const;
    void validate() const;

    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j);
};

// ---- Metrics -------------------------------------------------------------------

struct SplitMetrics {
    double mse = 0.0;
    double mae = 0.0;
    size_t windows = 0;
    double mse_se = 0.0;  // standard error over window-level MSEs
};

struct MetricsReport {
    SplitMetrics train, val, test;
    std::map<int, SplitMetrics> per_consumer;  // test split
    std::vector<int> skipped_consumers;
    std::vector<double> train_mse_history;  // per-epoch averages
    std::vector<double> val_mse_history;
    double wall_seconds = 0.0;
    size_t model_params = 0;
    size_t embedding_params = 0;
    int epochs_run = 0;
    int best_epoch = -1;
    nlohmann::json config_echo;

    nlohmann::json to_json() const;
    std::string to_table() const;
};

// Mean +/- standard error over repeated runs; the error is only
// meaningful from two repetitions up.
struct RepetitionStats {
    int reps = 0;
    double mse_mean = 0.0, mae_mean = 0.0;
    std::optional<double> mse_se, mae_se;
};
RepetitionStats aggregate_runs(const std::vector<SplitMetrics>& runs);

// ---- Models ---------------------------------------------------------------------

// One materialized sample.
struct WindowBatchItem {
    ForecastWindow window;
    std::vector<double> input;  // p x L, dataset-normalized units
    double input_mean = 0.0;    // consumption-row mean
    std::vector<double> target;      // h
};

WindowBatchItem materialize_window(const DatasetFrame& frame, const ForecastWindow& w,
                                   int input_len, int horizon,
                                   const FactorSelection& selection);

class ForecastModel {
public:
    virtual ~ForecastModel() = default;
    // Differentiable forecast [h] for one sample.
    virtual Tensor forecast(const WindowBatchItem& item) const = 0;
    virtual std::vector<Tensor> parameters() const = 0;
    virtual std::vector<std::string> parameter_names() const = 0;
    virtual ModelKind kind() const = 0;
    virtual ParamCounts param_counts() const = 0;
    // Largest consumer id the model can serve (exclusive).
    virtual int consumer_capacity() const = 0;
    // Consumer count the model was built with.
    virtual int trained_consumers() const = 0;
};

// Embeddings -> hypernetwork -> generated weights -> linear forecast.
class HypernetForecaster : public ForecastModel {
public:
    HypernetForecaster(int n_consumers, const TrainConfig& cfg);

    Tensor forecast(const WindowBatchItem& item) const override;
    std::vector<Tensor> parameters() const override;
    std::vector<std::string> parameter_names() const override;
    ModelKind kind() const override { return ModelKind::Hypernet; }
    ParamCounts param_counts() const override;
    int consumer_capacity() const override { return store_.consumers(); }
    int trained_consumers() const override { return store_.consumers(); }

    // Split forecast for weight reuse across windows sharing a context.
    Tensor generated_weights(int consumer_id, const CategoricalContext& ctx) const;
    Tensor forecast_from(const Tensor& weights, const WindowBatchItem& item) const;
    // Forecast with an explicit consumer embedding (embedding adaptation).
    Tensor forecast_with_embedding(const Tensor& consumer_vec,
                                   const WindowBatchItem& item) const;

    EmbeddingStore& store() { return store_; }
    const EmbeddingStore& store() const { return store_; }
    HypernetModel& net() { return net_; }
    const HypernetModel& net() const { return net_; }
    const FactorSelection& selection() const { return selection_; }

private:
    EmbeddingStore store_;
    HypernetModel net_;
    FactorSelection selection_;
};

class GlobalLinearForecaster : public ForecastModel {
public:
    GlobalLinearForecaster(int n_consumers, const TrainConfig& cfg);

    Tensor forecast(const WindowBatchItem& item) const override;
    std::vector<Tensor> parameters() const override { return model_.parameters(); }
    std::vector<std::string> parameter_names() const override {
        return model_.parameter_names();
    }
    ModelKind kind() const override { return ModelKind::GlobalLinear; }
    ParamCounts param_counts() const override;
    int consumer_capacity() const override;
    int trained_consumers() const override { return n_consumers_; }

    GlobalLinearModel& model() { return model_; }
    const GlobalLinearModel& model() const { return model_; }

private:
    GlobalLinearModel model_;
    int n_consumers_ = 0;
};

class IndividualForecaster : public ForecastModel {
public:
    IndividualForecaster(int n_consumers, const TrainConfig& cfg);

    Tensor forecast(const WindowBatchItem& item) const override;
    std::vector<Tensor> parameters() const override { return bank_.parameters(); }
    std::vector<std::string> parameter_names() const override {
        return bank_.parameter_names();
    }
    ModelKind kind() const override { return ModelKind::IndividualLinear; }
    ParamCounts param_counts() const override { return {bank_.parameter_count(), 0}; }
    int consumer_capacity() const override { return bank_.consumers(); }
    int trained_consumers() const override { return bank_.consumers(); }

    IndividualLinearBank& bank() { return bank_; }
    const IndividualLinearBank& bank() const { return bank_; }

private:
    IndividualLinearBank bank_;
};

std::unique_ptr<ForecastModel> make_model(ModelKind kind, int n_consumers,
                                          const TrainConfig& cfg);

// ---- Training / evaluation --------------------------------------------------------

// Mini-batch Adam on the mean squared forecast error; keeps the
// parameters of the epoch with the best validation MSE and stops after
// `early_stop_patience` epochs without improvement. The individual bank
// trains each consumer on its own windows with a private optimizer.
MetricsReport train_model(ForecastModel& model, const DatasetFrame& norm_frame,
                          const std::vector<ForecastWindow>& train_windows,
                          const std::vector<ForecastWindow>& val_windows,
                          const TrainConfig& cfg);

SplitMetrics evaluate_split(const ForecastModel& model, const DatasetFrame& norm_frame,
                            const std::vector<ForecastWindow>& windows,
                            const TrainConfig& cfg,
                            std::map<int, SplitMetrics>* per_consumer = nullptr,
                            std::vector<int>* skipped = nullptr);

// Optimizes only the consumer-embedding rows of consumers appearing in
// `windows` (each consumer independently, in parallel); the decoder and
// all other tables stay frozen. Rows must already exist in the store
// (grow_consumers). Throws when a listed consumer has no windows.
void adapt_embeddings(HypernetForecaster& model, const DatasetFrame& norm_frame,
                      const std::vector<ForecastWindow>& windows,
                      const std::vector<int>& consumer_ids, const TrainConfig& cfg);

// ---- Experiment pipeline ------------------------------------------------------------

struct ExperimentResult {
    std::shared_ptr<ForecastModel> model;
    MetricsReport report;
    NormalizationSpec norm;
    Splits splits;
};

// Split chronologically, fit the normalizer on train, train the
// configured model and evaluate all three splits.
ExperimentResult run_experiment(const DatasetFrame& raw_frame, const TrainConfig& cfg);

// ---- Ablation ------------------------------------------------------------------------

struct AblationRow {
    std::string removed;  // "weather", "datetime", "events" or "none"
    RepetitionStats stats;
};

// Trains the hypernetwork with each factor group removed, repeated over
// `cfg.repetitions` derived seeds; row order: weather, datetime, events,
// none.
std::vector<AblationRow> run_ablation(const DatasetFrame& raw_frame, const TrainConfig& cfg);

// Ablation results reported on the original proprietary panel, kept for
// side-by-side context in ablation reports (not reproducible here).
struct ReferenceAblation {
    const char* removed;
    double mse;
    double mae;
};
constexpr ReferenceAblation kReferenceAblation[] = {
    {"weather", 0.1768, 0.1865},
    {"datetime", 0.1777, 0.1875},
    {"events", 0.1761, 0.1850},
    {"none", 0.1734, 0.1808},
};

std::string ablation_table(const std::vector<AblationRow>& rows, bool with_reference = false);

} // namespace hyperfc

#endif

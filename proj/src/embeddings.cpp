#include "hyperfc/embeddings.hpp"

#include "hyperfc/error.hpp"
#include "hyperfc/rng.hpp"

namespace hyperfc {

int factor_cardinality(CategoricalFactor factor) {
    switch (factor) {
        case CategoricalFactor::Hour: return kHourCardinality;
        case CategoricalFactor::DayOfWeek: return kDayOfWeekCardinality;
        case CategoricalFactor::DayOfMonth: return kDayOfMonthCardinality;
        case CategoricalFactor::Month: return kMonthCardinality;
        case CategoricalFactor::SchoolHoliday: return 2;
        case CategoricalFactor::PublicHoliday: return 2;
    }
    throw ArgumentError("unknown categorical factor");
}

const char* factor_name(CategoricalFactor factor) {
    switch (factor) {
        case CategoricalFactor::Hour: return "hour";
        case CategoricalFactor::DayOfWeek: return "day_of_week";
        case CategoricalFactor::DayOfMonth: return "day_of_month";
        case CategoricalFactor::Month: return "month";
        case CategoricalFactor::SchoolHoliday: return "school_holiday";
        case CategoricalFactor::PublicHoliday: return "public_holiday";
    }
    return "?";
}

namespace {

constexpr CategoricalFactor kAllFactors[6] = {
    CategoricalFactor::Hour,          CategoricalFactor::DayOfWeek,
    CategoricalFactor::DayOfMonth,    CategoricalFactor::Month,
    CategoricalFactor::SchoolHoliday, CategoricalFactor::PublicHoliday,
};

} // namespace

EmbeddingStore::EmbeddingStore(int n_consumers, uint64_t seed) {
    if (n_consumers < 1) throw ArgumentError("embedding store needs at least one consumer");
    {
        Rng rng(derive_seed(seed, "embed:consumer"));
        consumer_table_ =
            Tensor::randn({n_consumers, kConsumerEmbedDim}, rng, kInitStdDev, true);
    }
    for (size_t fi = 0; fi < 6; ++fi) {
        Rng rng(derive_seed(seed, std::string("embed:") + factor_name(kAllFactors[fi])));
        factor_tables_[fi] = Tensor::randn({factor_cardinality(kAllFactors[fi]),
                                            kFactorEmbedDim},
                                           rng, kInitStdDev, true);
    }
    {
        Rng rng(derive_seed(seed, "embed:team"));
        team_table_ = Tensor::randn({kNumTeams, kFactorEmbedDim}, rng, kInitStdDev, true);
    }
    {
        Rng rng(derive_seed(seed, "embed:no_event"));
        no_event_ = Tensor::randn({1, kFactorEmbedDim}, rng, kInitStdDev, true);
    }
    {
        Rng rng(derive_seed(seed, "embed:pad"));
        pad_block_ = Tensor::randn({1, kFactorEmbedDim}, rng, kInitStdDev, true);
    }
}

Tensor EmbeddingStore::lookup_consumer(int consumer_id) const {
    if (consumer_id < 0 || consumer_id >= consumers())
        throw IndexError("consumer id " + std::to_string(consumer_id) +
                         " out of range [0, " + std::to_string(consumers()) + ")");
    return reshape(slice(consumer_table_, consumer_id, 1), {kConsumerEmbedDim});
}

Tensor EmbeddingStore::lookup(CategoricalFactor factor, int code) const {
    const int card = factor_cardinality(factor);
    if (code < 0 || code >= card)
        throw IndexError(std::string(factor_name(factor)) + " code " + std::to_string(code) +
                         " out of range [0, " + std::to_string(card) + ")");
    const auto& table = factor_tables_[static_cast<size_t>(factor)];
    return reshape(slice(table, code, 1), {kFactorEmbedDim});
}

Tensor EmbeddingStore::event_embedding(const std::array<uint8_t, kNumTeams>& flags) const {
    std::vector<Tensor> active;
    for (int k = 0; k < kNumTeams; ++k)
        if (flags[static_cast<size_t>(k)])
            active.push_back(reshape(slice(team_table_, k, 1), {kFactorEmbedDim}));
    if (active.empty()) return reshape(no_event_, {kFactorEmbedDim});
    if (active.size() == 1) return active[0];
    return add_n(active);
}

Tensor EmbeddingStore::assemble_input(int consumer_id, const CategoricalContext& ctx,
                                      const FactorSelection& selection) const {
    if (selection.consumer_id)
        return assemble_with_consumer(lookup_consumer(consumer_id), ctx, selection);
    return assemble_with_consumer(Tensor(), ctx, selection);
}

Tensor EmbeddingStore::assemble_with_consumer(const Tensor& consumer_vec,
                                              const CategoricalContext& ctx,
                                              const FactorSelection& selection) const {
    const Shape block{2 * kBlockRows, kBlockCols};
    std::vector<Tensor> channels;
    if (selection.consumer_id) {
        if (!consumer_vec.defined() || consumer_vec.numel() != kConsumerEmbedDim)
            throw ArgumentError("consumer embedding vector must have " +
                                std::to_string(kConsumerEmbedDim) + " values");
        channels.push_back(reshape(consumer_vec, block));
    }
    if (selection.datetime) {
        channels.push_back(reshape(concat0({lookup(CategoricalFactor::Hour, ctx.hour),
                                            lookup(CategoricalFactor::DayOfWeek,
                                                   ctx.day_of_week)}),
                                   block));
        channels.push_back(
            reshape(concat0({lookup(CategoricalFactor::DayOfMonth, ctx.day_of_month),
                             lookup(CategoricalFactor::Month, ctx.month)}),
                    block));
        channels.push_back(
            reshape(concat0({lookup(CategoricalFactor::SchoolHoliday, ctx.school_holiday),
                             lookup(CategoricalFactor::PublicHoliday, ctx.public_holiday)}),
                    block));
    }
    if (selection.events)
        channels.push_back(reshape(
            concat0({event_embedding(ctx.teams), reshape(pad_block_, {kFactorEmbedDim})}),
            block));
    if (channels.empty())
        throw ArgumentError("factor selection leaves no embedding channels to assemble");
    return stack_channels(channels);
}

void EmbeddingStore::grow_consumers(int new_total, uint64_t seed) {
    const int old_total = consumers();
    if (new_total <= old_total)
        throw ArgumentError("grow_consumers: new total " + std::to_string(new_total) +
                            " must exceed current " + std::to_string(old_total));
    Rng rng(derive_seed(seed, "embed:grow", static_cast<uint64_t>(old_total)));
    std::vector<double> data = consumer_table_.data();
    data.resize(static_cast<size_t>(new_total) * kConsumerEmbedDim);
    for (size_t i = static_cast<size_t>(old_total) * kConsumerEmbedDim; i < data.size(); ++i)
        data[i] = rng.normal() * kInitStdDev;
    consumer_table_ =
        Tensor::from_data({new_total, kConsumerEmbedDim}, std::move(data), true);
}

std::vector<Tensor> EmbeddingStore::parameters() const {
    std::vector<Tensor> params;
    params.push_back(consumer_table_);
    for (const auto& t : factor_tables_) params.push_back(t);
    params.push_back(team_table_);
    params.push_back(no_event_);
    params.push_back(pad_block_);
    return params;
}

std::vector<std::string> EmbeddingStore::parameter_names() const {
    std::vector<std::string> names{"embeddings.consumer"};
    for (auto f : kAllFactors) names.push_back(std::string("embeddings.") + factor_name(f));
    names.push_back("embeddings.team");
    names.push_back("embeddings.no_event");
    names.push_back("embeddings.pad");
    return names;
}

size_t EmbeddingStore::parameter_count() const {
    size_t n = 0;
    for (const auto& p : parameters()) n += p.numel();
    return n;
}

} // namespace hyperfc

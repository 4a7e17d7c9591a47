#ifndef HYPERFC_EMBEDDINGS_HPP
#define HYPERFC_EMBEDDINGS_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "hyperfc/dataset.hpp"
#include "hyperfc/tensor.hpp"

namespace hyperfc {

// Embedding block geometry: every factor embedding reshapes to a 7x7
// block; consumers get two blocks (98 values -> 14x7).
constexpr int kBlockRows = 7;
constexpr int kBlockCols = 7;
constexpr int kFactorEmbedDim = kBlockRows * kBlockCols;   // 49
constexpr int kConsumerEmbedDim = 2 * kFactorEmbedDim;     // 98

enum class CategoricalFactor {
    Hour,
    DayOfWeek,
    DayOfMonth,
    Month,
    SchoolHoliday,
    PublicHoliday,
};

int factor_cardinality(CategoricalFactor factor);
const char* factor_name(CategoricalFactor factor);

// Learned embedding tables for consumers and every categorical factor,
// plus the no-event vector and a learned pad block that completes the
// odd factor count. Every row is trainable; lookups are differentiable
// slices so gradients land only in the rows a batch touched.
//
// Assembled channel layout (fixed):
//   0: consumer embedding (14x7)
//   1: [hour ; day_of_week]
//   2: [day_of_month ; month]
//   3: [school_holiday ; public_holiday]
//   4: [event ; pad]
// Channels gated off by the factor selection are omitted, shrinking the
// channel count, never reordered.
class EmbeddingStore {
public:
    EmbeddingStore(int n_consumers, uint64_t seed);

    int consumers() const { return consumer_table_.dim(0); }

    // Trainable row views; gradients flow into the tables.
    Tensor lookup_consumer(int consumer_id) const;
    Tensor lookup(CategoricalFactor factor, int code) const;

    // No team playing -> the dedicated no-event vector; otherwise the sum
    // of the flagged teams' embeddings.
    Tensor event_embedding(const std::array<uint8_t, kNumTeams>& team_flags) const;

    // [channels x 14 x 7] hypernetwork input for one window.
    Tensor assemble_input(int consumer_id, const CategoricalContext& ctx,
                          const FactorSelection& selection) const;

    // Same, with the consumer channel taken from an explicit [98] vector
    // instead of the table (embedding adaptation optimizes such a row
    // without touching the table). Requires selection.consumer_id.
    Tensor assemble_with_consumer(const Tensor& consumer_vec, const CategoricalContext& ctx,
                                  const FactorSelection& selection) const;

    // Allocates fresh Normal(0, 0.02) rows for consumers
    // [consumers(), new_total); existing rows are copied bit-for-bit.
    void grow_consumers(int new_total, uint64_t seed);

    // Fixed order: consumer table, hour, day_of_week, day_of_month,
    // month, school_holiday, public_holiday, team, no_event, pad.
    std::vector<Tensor> parameters() const;
    std::vector<std::string> parameter_names() const;

    // The consumer table alone (adaptation trains only this).
    Tensor consumer_table() const { return consumer_table_; }

    size_t parameter_count() const;

    static constexpr double kInitStdDev = 0.02;

private:
    Tensor consumer_table_;                      // [N x 98]
    std::array<Tensor, 6> factor_tables_;        // [cardinality x 49]
    Tensor team_table_;                          // [5 x 49]
    Tensor no_event_;                            // [1 x 49]
    Tensor pad_block_;                           // [1 x 49]
};

} // namespace hyperfc

#endif

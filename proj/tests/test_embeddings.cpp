#include <doctest.h>

#include "hyperfc/adam.hpp"
#include "hyperfc/embeddings.hpp"
#include "hyperfc/error.hpp"

using namespace hyperfc;

namespace {

CategoricalContext sample_context() {
    CategoricalContext ctx;
    ctx.hour = 7;
    ctx.day_of_week = 2;
    ctx.day_of_month = 14;
    ctx.month = 3;
    ctx.school_holiday = 0;
    ctx.public_holiday = 1;
    ctx.teams = {0, 1, 0, 0, 1};
    return ctx;
}

} // namespace

TEST_CASE("table shapes and row lookups") {
    EmbeddingStore store(12, 5);
    Tensor h0 = store.lookup(CategoricalFactor::Hour, 0);
    Tensor h23 = store.lookup(CategoricalFactor::Hour, 23);
    CHECK(h0.numel() == 49);
    CHECK(h23.numel() == 49);
    CHECK(h0.data() != h23.data());

    CHECK(store.lookup_consumer(0).numel() == 98);
    CHECK_THROWS_AS(store.lookup(CategoricalFactor::Hour, 24), IndexError);
    CHECK_THROWS_AS(store.lookup_consumer(12), IndexError);
}

TEST_CASE("consumer table matches the reported parameter scale") {
    EmbeddingStore store(6010, 1);
    // 6010 consumers x 98 values
    CHECK(store.parameters()[0].numel() == 588980);
}

TEST_CASE("one step with gradient on a single hour row leaves the others unchanged") {
    EmbeddingStore store(4, 9);
    Tensor hour_table = store.parameters()[1];  // consumer table first, then hour
    const std::vector<double> before = hour_table.data();
    AdamOptimizer opt({hour_table}, 0.05);
    opt.zero_grad();
    backward(sum_all(store.lookup(CategoricalFactor::Hour, 7)));
    opt.step();
    for (int code = 0; code < 24; ++code)
        for (int j = 0; j < 49; ++j) {
            const size_t idx = static_cast<size_t>(code) * 49 + static_cast<size_t>(j);
            if (code == 7)
                CHECK(hour_table.data()[idx] != before[idx]);
            else
                CHECK(hour_table.data()[idx] == before[idx]);
        }
}

TEST_CASE("event embedding follows the no-event / singleton / sum cases") {
    EmbeddingStore store(3, 11);
    Tensor no_event = store.event_embedding({0, 0, 0, 0, 0});
    Tensor stored_no_event = store.parameters()[8];  // no_event table
    CHECK(no_event.data() == stored_no_event.data());

    Tensor team3 = store.event_embedding({0, 0, 0, 1, 0});
    Tensor team_table = store.parameters()[7];
    for (int j = 0; j < 49; ++j)
        CHECK(team3[static_cast<size_t>(j)] == team_table.data()[3 * 49 + j]);

    Tensor both = store.event_embedding({0, 1, 0, 0, 1});
    for (int j = 0; j < 49; ++j)
        CHECK(both[static_cast<size_t>(j)] ==
              team_table.data()[1 * 49 + j] + team_table.data()[4 * 49 + j]);
}

TEST_CASE("event embedding is additive over disjoint nonempty flag sets") {
    EmbeddingStore store(3, 13);
    for (int a = 1; a < 32; ++a)
        for (int b = 1; b < 32; ++b) {
            if ((a & b) != 0) continue;
            std::array<uint8_t, 5> fa{}, fb{}, fu{};
            for (int k = 0; k < 5; ++k) {
                fa[static_cast<size_t>(k)] = (a >> k) & 1;
                fb[static_cast<size_t>(k)] = (b >> k) & 1;
                fu[static_cast<size_t>(k)] = ((a | b) >> k) & 1;
            }
            Tensor sum = add(store.event_embedding(fa), store.event_embedding(fb));
            Tensor joint = store.event_embedding(fu);
            for (size_t j = 0; j < 49; ++j)
                CHECK(joint[j] == doctest::Approx(sum[j]).epsilon(1e-12));
        }
}

TEST_CASE("assembled input has the documented layout") {
    EmbeddingStore store(5, 17);
    CategoricalContext ctx = sample_context();
    Tensor z = store.assemble_input(2, ctx, FactorSelection::all());
    CHECK(z.shape() == Shape{5, 14, 7});

    // Channel 0 is the row-major reshape of the consumer embedding.
    Tensor consumer = store.lookup_consumer(2);
    for (int r = 0; r < 14; ++r)
        for (int c = 0; c < 7; ++c)
            CHECK(z.at({0, r, c}) == consumer[static_cast<size_t>(r * 7 + c)]);

    // Channel 1 stacks hour over day_of_week.
    Tensor hour = store.lookup(CategoricalFactor::Hour, ctx.hour);
    Tensor dow = store.lookup(CategoricalFactor::DayOfWeek, ctx.day_of_week);
    for (int r = 0; r < 7; ++r)
        for (int c = 0; c < 7; ++c) {
            CHECK(z.at({1, r, c}) == hour[static_cast<size_t>(r * 7 + c)]);
            CHECK(z.at({1, r + 7, c}) == dow[static_cast<size_t>(r * 7 + c)]);
        }

    // id_only keeps just the consumer channel.
    Tensor z_id = store.assemble_input(2, ctx, FactorSelection::id_only());
    CHECK(z_id.shape() == Shape{1, 14, 7});
}

TEST_CASE("contexts differing only in consumer diverge only in channel 0") {
    EmbeddingStore store(5, 19);
    CategoricalContext ctx = sample_context();
    Tensor a = store.assemble_input(1, ctx, FactorSelection::all());
    Tensor b = store.assemble_input(3, ctx, FactorSelection::all());
    bool channel0_differs = false;
    for (int r = 0; r < 14; ++r)
        for (int c = 0; c < 7; ++c) {
            if (a.at({0, r, c}) != b.at({0, r, c})) channel0_differs = true;
            for (int ch = 1; ch < 5; ++ch) CHECK(a.at({ch, r, c}) == b.at({ch, r, c}));
        }
    CHECK(channel0_differs);
}

TEST_CASE("gradients reach only the table rows a sample used") {
    EmbeddingStore store(5, 23);
    CategoricalContext ctx = sample_context();
    for (auto& p : store.parameters()) p.zero_grad();
    backward(sum_all(store.assemble_input(2, ctx, FactorSelection::all())));

    Tensor consumer_table = store.consumer_table();
    for (int i = 0; i < 5; ++i) {
        double norm = 0.0;
        for (int j = 0; j < 98; ++j)
            norm += std::fabs(consumer_table.grad()[static_cast<size_t>(i * 98 + j)]);
        if (i == 2)
            CHECK(norm > 0.0);
        else
            CHECK(norm == 0.0);
    }
    Tensor hour_table = store.parameters()[1];
    for (int code = 0; code < 24; ++code) {
        double norm = 0.0;
        for (int j = 0; j < 49; ++j)
            norm += std::fabs(hour_table.grad()[static_cast<size_t>(code * 49 + j)]);
        if (code == ctx.hour)
            CHECK(norm > 0.0);
        else
            CHECK(norm == 0.0);
    }
    // Teams 1 and 4 are flagged: no_event must stay untouched.
    Tensor no_event = store.parameters()[8];
    double no_event_norm = 0.0;
    for (double g : no_event.grad()) no_event_norm += std::fabs(g);
    CHECK(no_event_norm == 0.0);
}

TEST_CASE("growing the store keeps existing rows bit-identical") {
    EmbeddingStore store(4, 29);
    const std::vector<double> before = store.consumer_table().data();
    store.grow_consumers(7, 31);
    CHECK(store.consumers() == 7);
    const auto& after = store.consumer_table().data();
    REQUIRE(after.size() == 7u * 98u);
    for (size_t i = 0; i < before.size(); ++i) CHECK(after[i] == before[i]);
    // New rows are initialized, not zero.
    double norm = 0.0;
    for (size_t i = before.size(); i < after.size(); ++i) norm += std::fabs(after[i]);
    CHECK(norm > 0.0);
}

TEST_CASE("assembled inputs are injective in the consumer id") {
    EmbeddingStore store(5, 37);
    CategoricalContext ctx = sample_context();
    std::vector<Tensor> inputs;
    for (int i = 0; i < 5; ++i)
        inputs.push_back(store.assemble_input(i, ctx, FactorSelection::all()));
    for (size_t a = 0; a < inputs.size(); ++a)
        for (size_t b = a + 1; b < inputs.size(); ++b)
            CHECK(inputs[a].data() != inputs[b].data());
}

#include <doctest.h>

#include <cmath>
#include <random>

#include "bico/objective.hpp"
#include "bico/reference.hpp"
#include "bico/trainer.hpp"
#include "oracles.hpp"

using namespace bico;

namespace {

Dataset small_data(std::uint64_t seed) {
    SynthConfig cfg;
    cfg.n_per_class = 3;
    cfg.dim = 8;
    cfg.sigma = 0.3;
    cfg.token_rows = 4;
    cfg.seed = seed;
    const SchemaSpec spec = oracle::small_schema();
    SynthData s = synth_generate(spec.facet_codes(), cfg);
    return Dataset::assemble(spec, std::move(s.samples), std::move(s.store));
}

void perturb(ModelParams& p, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 0.1);
    for (auto& g : p.groups()) {
        for (double& v : g.values) v += n(rng);
    }
}

Batch mixed_batch(const Dataset& d, Subtask task) {
    Batch b;
    for (std::size_t i = 0; i < d.samples.size(); i += 2) {
        const auto& s = d.samples[i];
        std::size_t f = 0;
        while (!s.related(f)) ++f;
        b.push_back({i, task == Subtask::Ideology ? f : 0});
    }
    return b;
}

}  // namespace

TEST_CASE("tape loss equals the straight-line reference") {
    const Dataset data = small_data(3);
    for (Subtask task : {Subtask::Relevance, Subtask::Ideology}) {
        for (bool adapter : {true, false}) {
            for (FlowOptions flow : {FlowOptions{2, true, true}, FlowOptions{3, false, true},
                                     FlowOptions{2, true, false}, FlowOptions{2, false, false}}) {
                CAPTURE(subtask_name(task));
                CAPTURE(adapter);
                CAPTURE(flow.iterations);
                ModelParams p = ModelParams::init(task, 8, data.facet_codes(), 12, flow, adapter, 5);
                perturb(p, 9);
                const LossConfig loss{task == Subtask::Relevance ? 0.5 : 0.1, 0.3};
                const Batch batch = mixed_batch(data, task);
                const double got = batch_loss(p, data.view(), batch, loss).total;
                const double want = static_cast<double>(reference_batch_loss(p, data.view(), batch, loss));
                CHECK(std::abs(got - want) <= 1e-12 * std::max(1.0, std::abs(want)));
            }
        }
    }
}

TEST_CASE("per-facet loss parts add up to the total") {
    const Dataset data = small_data(4);
    ModelParams p = ModelParams::init(Subtask::Ideology, 8, data.facet_codes(), 12, {2, true, true}, true, 1);
    const LossConfig loss{0.1, 0.3};
    // facet 1 absent from this batch
    Batch batch;
    for (std::size_t i = 0; i < data.samples.size(); ++i) {
        if (data.samples[i].related(0) || data.samples[i].related(2)) {
            batch.push_back({i, data.samples[i].related(0) ? 0u : 2u});
        }
    }
    const BatchLoss bl = batch_loss(p, data.view(), batch, loss);
    CHECK_FALSE(bl.ce[1]);
    CHECK_FALSE(bl.contrastive[1]);
    const std::vector<double> ce{*bl.ce[0], 0.0, *bl.ce[2]};
    const std::vector<double> cl{*bl.contrastive[0], 0.0, *bl.contrastive[2]};
    CHECK(bl.total == doctest::Approx(total_loss(ce, cl, 0.3, 3)).epsilon(1e-14));
}

TEST_CASE("gradients agree with central differences on the reference loss") {
    const Dataset data = small_data(5);
    for (Subtask task : {Subtask::Relevance, Subtask::Ideology}) {
        ModelParams p = ModelParams::init(task, 8, data.facet_codes(), 6, {2, true, true}, true, 2);
        perturb(p, 3);
        const LossConfig loss{task == Subtask::Relevance ? 0.5 : 0.1, 0.3};
        const Batch batch = mixed_batch(data, task);
        ModelParams grad = p.zeros_like();
        batch_loss(p, data.view(), batch, loss, &grad);
        std::vector<std::vector<double>> analytic;
        for (const auto& g : grad.groups()) analytic.emplace_back(g.values.begin(), g.values.end());
        const auto groups = p.groups();
        GradCheckOptions opt;
        opt.samples_per_group = 8;
        opt.exhaustive_limit = 0;
        const auto report = finite_diff_check(
            [&] { return reference_batch_loss(p, data.view(), batch, loss); }, groups, analytic, opt);
        CAPTURE(report.worst_group);
        CHECK(report.max_rel_error <= 1e-4);
    }
}

TEST_CASE("both flags off leaves the anchors at the initial states") {
    const Dataset data = small_data(6);
    ModelParams p = ModelParams::init(Subtask::Ideology, 8, data.facet_codes(), 6, {2, false, false}, false, 2);
    perturb(p, 4);
    const Predictor pred(p, data.concepts);
    for (std::size_t f = 0; f < data.concepts.facet_count(); ++f) {
        CHECK(pred.encoding().facets[f] == data.concepts.node(data.concepts.facet_node(f)).state);
        for (Stance s : kStances) {
            CHECK(pred.encoding().ideology(f, s) == data.concepts.node(data.concepts.ideology_node(f, s)).state);
        }
    }
}

TEST_CASE("predictor encoding matches bico_encode on adapted concepts") {
    const Dataset data = small_data(7);
    ModelParams p = ModelParams::init(Subtask::Relevance, 8, data.facet_codes(), 6, {4, true, true}, true, 2);
    perturb(p, 5);
    const Predictor pred(p, data.concepts);
    const ConceptEncoding enc = bico_encode(adapted_concepts(data.concepts, p.adapter), p.phases, p.attention, p.flow);
    CHECK(pred.encoding().facets == enc.facets);
    CHECK(pred.encoding().ideologies == enc.ideologies);

    const Matrix probs = pred.relevance_probabilities(data.samples[0], data.store);
    CHECK(probs.rows == 3);
    for (std::size_t f = 0; f < 3; ++f) CHECK(probs(f, 0) + probs(f, 1) == doctest::Approx(1.0));
}

TEST_CASE("objective argument checks") {
    const Dataset data = small_data(8);
    ModelParams p = ModelParams::init(Subtask::Ideology, 8, data.facet_codes(), 6, {2, true, true}, true, 2);
    const LossConfig loss{0.1, 0.3};
    CHECK_THROWS_AS(batch_loss(p, data.view(), Batch{}, loss), std::invalid_argument);
    ModelParams wrong = ModelParams::init(Subtask::Ideology, 8, {"AA"}, 6, {2, true, true}, true, 2);
    CHECK_THROWS_AS(batch_loss(wrong, data.view(), mixed_batch(data, Subtask::Ideology), loss),
                    std::invalid_argument);
    // facet 1 item whose sample is related to facet 0
    CHECK_THROWS_AS(batch_loss(p, data.view(), Batch{{0, 1}}, loss), DataError);
}

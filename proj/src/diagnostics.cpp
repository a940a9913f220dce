#include "bico/diagnostics.hpp"

#include <random>

#include "bico/objective.hpp"
#include "bico/reference.hpp"
#include "bico/trainer.hpp"

namespace bico {

GradCheckReport check_loss_gradients(const GradCheckProblem& problem, const GradCheckOptions& options) {
    const SchemaSpec schema = load_schema(default_schema_path());
    SynthConfig sc;
    sc.n_per_class = 2;
    sc.dim = problem.dim;
    sc.sigma = 0.3;
    sc.seed = problem.seed;
    sc.token_rows = 4;
    auto synth = synth_generate(schema.facet_codes(), sc);
    const Dataset data = Dataset::assemble(schema, std::move(synth.samples), std::move(synth.store));

    const TrainConfig defaults = TrainConfig::defaults(problem.subtask);
    ModelParams params = ModelParams::init(problem.subtask, problem.dim, data.facet_codes(), problem.hidden,
                                           defaults.flow, true, problem.seed);
    std::mt19937_64 rng(problem.seed ^ 0xabcdef);
    std::normal_distribution<double> noise(0.0, 0.1);
    for (auto& g : params.groups()) {
        for (double& v : g.values) v += noise(rng);
    }

    // Samples are grouped by facet then stance (n_per_class each); take the
    // first facet's samples and a few from the second so both the
    // contrastive terms and the absent-facet path are exercised.
    Batch batch;
    const std::size_t per_facet = 3 * sc.n_per_class;
    for (std::size_t i = 0; i < problem.batch; ++i) {
        const std::size_t sample = i < per_facet ? i : per_facet + 2 * (i - per_facet);
        if (sample >= data.samples.size()) break;
        const auto& s = data.samples[sample];
        std::size_t facet = 0;
        while (!s.ideology[facet]) ++facet;
        batch.push_back({sample, facet});
    }

    const auto loss_fn = [&] { return reference_batch_loss(params, data.view(), batch, defaults.loss); };
    ModelParams grad = params.zeros_like();
    batch_loss(params, data.view(), batch, defaults.loss, &grad);

    std::vector<std::vector<double>> analytic;
    for (const auto& g : grad.groups()) analytic.emplace_back(g.values.begin(), g.values.end());
    const auto groups = params.groups();
    return finite_diff_check(loss_fn, groups, analytic, options);
}

}  // namespace bico

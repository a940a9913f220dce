#include "bico/objective.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bico {

namespace {

struct ParamVarSet {
    flow::ParamVars flow;
    std::vector<graph::HeadVars> heads;
    graph::AdapterVars adapter;
    std::vector<ad::Var> ordered;  // same order as ModelParams::groups()
};

ParamVarSet register_params(ad::Tape& tape, const ModelParams& p) {
    ParamVarSet v;
    auto reg = [&](std::span<const double> data, std::size_t rows, std::size_t cols) {
        const ad::Var var = tape.parameter(data, rows, cols);
        v.ordered.push_back(var);
        return var;
    };
    for (std::size_t l = 0; l < 3; ++l) v.flow.phases[l] = reg(p.phases.theta[l], 1, p.phases.theta[l].size());
    for (std::size_t l = 0; l < 3; ++l) {
        v.flow.attention[l] = reg(p.attention.weights[l], 1, p.attention.weights[l].size());
    }
    for (const FacetHead& h : p.heads) {
        graph::HeadVars hv;
        hv.w1 = reg(h.w1.data, h.w1.rows, h.w1.cols);
        hv.b1 = reg(h.b1, 1, h.b1.size());
        hv.w2 = reg(h.w2.data, h.w2.rows, h.w2.cols);
        hv.b2 = reg(h.b2, 1, h.b2.size());
        v.heads.push_back(hv);
    }
    v.adapter.enabled = p.adapter.enabled;
    if (p.adapter.enabled) {
        v.adapter.w = reg(p.adapter.w.data, p.adapter.w.rows, p.adapter.w.cols);
        v.adapter.b = reg(p.adapter.b, 1, p.adapter.b.size());
    }
    return v;
}

// Initial node states on the tape, adapter applied to facet and ideology
// concepts, parents re-averaged.
std::vector<ad::Var> initial_states(ad::Tape& tape, const ConceptTree& tree, const graph::AdapterVars& adapter) {
    std::vector<ad::Var> states(tree.size());
    for (Level level : {Level::Ideology, Level::Facet}) {
        for (std::size_t id : tree.nodes_at(level)) {
            states[id] = graph::adapter(tape, adapter, tape.constant(tree.node(id).state));
        }
    }
    for (Level level : {Level::Domain, Level::Root}) {
        for (std::size_t id : tree.nodes_at(level)) {
            std::vector<ad::Var> children;
            for (std::size_t c : tree.node(id).children) children.push_back(states[c]);
            states[id] = tape.mean(children);
        }
    }
    return states;
}

// Mean over rows of -log softmax(row)[label].
ad::Var mean_cross_entropy(ad::Tape& tape, ad::Var logits, std::span<const std::size_t> labels) {
    const std::size_t classes = tape.cols(logits);
    std::vector<ad::Var> terms;
    terms.reserve(labels.size());
    for (std::size_t r = 0; r < labels.size(); ++r) {
        std::vector<std::size_t> row(classes);
        for (std::size_t c = 0; c < classes; ++c) row[c] = r * classes + c;
        terms.push_back(tape.sub(tape.logsumexp(tape.gather(logits, std::move(row))),
                                 tape.pick(logits, r * classes + labels[r])));
    }
    return tape.mean(terms);
}

void check_params(const ModelParams& p, const DataView& data) {
    if (p.dim != data.concepts.dim() || p.dim != data.store.dim()) {
        throw std::invalid_argument("objective: parameter, concept and embedding dimensions differ");
    }
    if (p.heads.size() != data.concepts.facet_count() || p.facet_codes != data.concepts.facet_codes()) {
        throw std::invalid_argument("objective: parameters were built for a different schema");
    }
}

}  // namespace

BatchLoss batch_loss(const ModelParams& params, const DataView& data, std::span<const BatchItem> batch,
                     const LossConfig& loss, ModelParams* gradient) {
    loss.validate();
    check_params(params, data);
    if (batch.empty()) throw std::invalid_argument("batch_loss: empty batch");

    ad::Tape tape;
    const ParamVarSet pv = register_params(tape, params);
    std::vector<ad::Var> states = initial_states(tape, data.concepts, pv.adapter);
    flow::encode(tape, data.concepts, states, pv.flow, params.flow);

    const ConceptTree& tree = data.concepts;
    const std::size_t nf = tree.facet_count();
    BatchLoss result;
    result.ce.assign(nf, std::nullopt);
    result.contrastive.assign(nf, std::nullopt);
    std::vector<ad::Var> terms;

    if (params.subtask == Subtask::Relevance) {
        std::vector<ad::Var> tokens;
        tokens.reserve(batch.size());
        for (const BatchItem& item : batch) {
            const Matrix& m = data.store.at(relevance_key(data.samples.at(item.sample).id));
            tokens.push_back(graph::adapter(tape, pv.adapter, tape.constant(m)));
        }
        for (std::size_t f = 0; f < nf; ++f) {
            const ad::Var query = states[tree.facet_node(f)];
            std::vector<ad::Var> matched;
            std::vector<std::size_t> labels;
            std::vector<int> classes;
            for (std::size_t i = 0; i < batch.size(); ++i) {
                matched.push_back(graph::attentive_match(tape, query, tokens[i]));
                const int label = data.samples[batch[i].sample].relevance.at(f);
                labels.push_back(static_cast<std::size_t>(label));
                classes.push_back(label);
            }
            const ad::Var t = tape.stack_rows(matched);
            const ad::Var ce = mean_cross_entropy(tape, graph::head_logits(tape, pv.heads[f], t), labels);
            result.ce[f] = tape.scalar(ce);
            terms.push_back(ce);
            if (loss.lambda > 0.0) {
                if (const auto cl = graph::cl_loss(tape, t, classes, loss.tau)) {
                    result.contrastive[f] = tape.scalar(*cl);
                    terms.push_back(tape.scale(*cl, loss.lambda));
                }
            }
        }
    } else {
        std::vector<std::vector<std::size_t>> by_facet(nf);
        for (std::size_t i = 0; i < batch.size(); ++i) by_facet.at(batch[i].facet).push_back(i);
        for (std::size_t f = 0; f < nf; ++f) {
            if (by_facet[f].empty()) continue;
            Matrix rows(by_facet[f].size(), params.dim);
            std::vector<std::size_t> labels;
            std::vector<Stance> stances;
            for (std::size_t r = 0; r < by_facet[f].size(); ++r) {
                const Sample& s = data.samples.at(batch[by_facet[f][r]].sample);
                const auto& stance = s.ideology.at(f);
                if (!stance) throw DataError("sample '" + s.id + "' has no ideology label for " + tree.facet_codes()[f]);
                const Matrix& v = data.store.at(ideology_key(s.id, tree.facet_codes()[f]));
                if (v.rows != 1) throw DataError("ideology embedding for '" + s.id + "' must have one row");
                std::copy(v.data.begin(), v.data.end(), rows.row(r).begin());
                labels.push_back(static_cast<std::size_t>(*stance));
                stances.push_back(*stance);
            }
            const ad::Var t = graph::adapter(tape, pv.adapter, tape.constant(rows));
            const ad::Var ce = mean_cross_entropy(tape, graph::head_logits(tape, pv.heads[f], t), labels);
            result.ce[f] = tape.scalar(ce);
            terms.push_back(ce);
            if (loss.lambda > 0.0) {
                const std::array<ad::Var, 3> anchors{states[tree.ideology_node(f, Stance::Left)],
                                                     states[tree.ideology_node(f, Stance::Center)],
                                                     states[tree.ideology_node(f, Stance::Right)]};
                if (const auto cg = graph::cgcl_loss(tape, anchors, t, stances, loss.tau)) {
                    result.contrastive[f] = tape.scalar(*cg);
                    terms.push_back(tape.scale(*cg, loss.lambda));
                }
            }
        }
    }

    const ad::Var total = tape.scale(tape.sum(terms), 1.0 / static_cast<double>(nf));
    result.total = tape.scalar(total);
    if (gradient) {
        tape.backward(total);
        auto groups = gradient->groups();
        if (groups.size() != pv.ordered.size()) {
            throw std::invalid_argument("batch_loss: gradient buffer does not match the parameters");
        }
        for (std::size_t i = 0; i < groups.size(); ++i) {
            const auto g = tape.grad(pv.ordered[i]);
            if (g.size() != groups[i].values.size()) {
                throw std::invalid_argument("batch_loss: gradient block '" + groups[i].name + "' has the wrong size");
            }
            std::copy(g.begin(), g.end(), groups[i].values.begin());
        }
    }
    return result;
}

ConceptTree adapted_concepts(const ConceptTree& concepts, const Adapter& adapter) {
    ConceptTree out = concepts;
    if (!adapter.enabled) return out;
    for (Level level : {Level::Ideology, Level::Facet}) {
        for (std::size_t id : out.nodes_at(level)) out.node(id).state = adapter_apply(adapter, concepts.node(id).state);
    }
    for (Level level : {Level::Domain, Level::Root}) {
        for (std::size_t id : out.nodes_at(level)) {
            auto& node = out.node(id);
            std::fill(node.state.begin(), node.state.end(), 0.0);
            for (std::size_t c : node.children) {
                const auto& child = out.node(c).state;
                for (std::size_t k = 0; k < node.state.size(); ++k) node.state[k] += child[k];
            }
            for (double& x : node.state) x /= static_cast<double>(node.children.size());
        }
    }
    return out;
}

Predictor::Predictor(const ModelParams& params, const ConceptTree& concepts)
    : params_(params),
      encoding_(bico_encode(adapted_concepts(concepts, params.adapter), params.phases, params.attention, params.flow)) {
    if (params.heads.size() != concepts.facet_count()) {
        throw std::invalid_argument("predictor: parameters were built for a different schema");
    }
}

Matrix Predictor::relevance_probabilities(const Sample& sample, const EmbeddingStore& store) const {
    const Matrix tokens = adapter_apply(params_.adapter, store.at(relevance_key(sample.id)));
    Matrix out(params_.heads.size(), 2);
    for (std::size_t f = 0; f < params_.heads.size(); ++f) {
        const auto t = attentive_match(encoding_.facets[f], tokens);
        const auto p = classify(t, params_.heads[f]);
        std::copy(p.begin(), p.end(), out.row(f).begin());
    }
    return out;
}

std::vector<double> Predictor::ideology_representation(const Sample& sample, std::size_t facet,
                                                       const EmbeddingStore& store) const {
    const Matrix& v = store.at(ideology_key(sample.id, params_.facet_codes.at(facet)));
    if (v.rows != 1) throw DataError("ideology embedding for '" + sample.id + "' must have one row");
    return adapter_apply(params_.adapter, v.row(0));
}

std::vector<double> Predictor::ideology_probabilities(const Sample& sample, std::size_t facet,
                                                      const EmbeddingStore& store) const {
    return classify(ideology_representation(sample, facet, store), params_.heads.at(facet));
}

std::size_t argmax(std::span<const double> v) {
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace bico

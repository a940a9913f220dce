#include "bico/concept_flow.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "bico/common.hpp"
#include "bico/kernels.hpp"

namespace bico {

ComplexVec::ComplexVec(std::vector<double> data) : data_(std::move(data)) {
    if (data_.size() % 2 != 0) {
        throw std::invalid_argument("ComplexVec: dimension must be even, got " + std::to_string(data_.size()));
    }
}

double ComplexVec::modulus(std::size_t k) const {
    return std::hypot(data_.at(k), data_.at(k + half()));
}

ComplexVec complex_product(const ComplexVec& a, const ComplexVec& b) {
    if (a.dim() != b.dim()) {
        throw std::invalid_argument("complex_product: dimension mismatch");
    }
    std::vector<double> out(a.dim());
    kernels::active().complex_mul(a.data().data(), b.data().data(), out.data(), a.half());
    return ComplexVec(std::move(out));
}

ComplexVec phases_to_rotation(std::span<const double> theta) {
    std::vector<double> out(theta.size() * 2);
    for (std::size_t k = 0; k < theta.size(); ++k) {
        out[k] = std::cos(theta[k]);
        out[k + theta.size()] = std::sin(theta[k]);
    }
    return ComplexVec(std::move(out));
}

EdgePhases EdgePhases::zeros(std::size_t half) {
    EdgePhases p;
    for (auto& t : p.theta) t.assign(half, 0.0);
    return p;
}

EdgePhases EdgePhases::random(std::size_t half, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-std::numbers::pi, std::numbers::pi);
    EdgePhases p;
    for (auto& t : p.theta) {
        t.resize(half);
        for (double& v : t) v = dist(rng);
    }
    return p;
}

AggParams AggParams::zeros(std::size_t dim) {
    AggParams a;
    for (auto& w : a.weights) w.assign(2 * dim, 0.0);
    return a;
}

AggParams AggParams::random(std::size_t dim, std::mt19937_64& rng) {
    // Glorot-uniform for a 2d -> 1 map.
    const double bound = std::sqrt(6.0 / static_cast<double>(2 * dim + 1));
    std::uniform_real_distribution<double> dist(-bound, bound);
    AggParams a;
    for (auto& w : a.weights) {
        w.resize(2 * dim);
        for (double& v : w) v = dist(rng);
    }
    return a;
}

namespace flow {

std::array<ad::Var, 3> rotations(ad::Tape& tape, const std::array<ad::Var, 3>& phases) {
    std::array<ad::Var, 3> out;
    for (std::size_t l = 0; l < 3; ++l) {
        out[l] = tape.concat(tape.cos(phases[l]), tape.sin(phases[l]));
    }
    return out;
}

void diffuse(ad::Tape& tape, const ConceptTree& topology, std::vector<ad::Var>& states,
             const std::array<ad::Var, 3>& rotations) {
    // prefix[n] is the rotated running sum h'_i at node n; nodes are stored
    // level by level so every parent precedes its children.
    std::vector<ad::Var> prefix(states.size());
    std::vector<ad::Var> updated(states);
    for (const ConceptNode& n : topology.nodes()) {
        if (!n.parent) {
            prefix[n.id] = states[n.id];
            continue;
        }
        const auto depth = static_cast<std::size_t>(n.level);
        const ad::Var carried = tape.complex_mul(prefix[*n.parent], rotations[depth - 1]);
        prefix[n.id] = tape.add(states[n.id], carried);
        updated[n.id] = tape.scale(prefix[n.id], 1.0 / static_cast<double>(depth + 1));
    }
    states = std::move(updated);
}

void aggregate(ad::Tape& tape, const ConceptTree& topology, std::vector<ad::Var>& states,
               const std::array<ad::Var, 3>& attention, AggregationTrace* trace) {
    for (Level level : {Level::Facet, Level::Domain, Level::Root}) {
        const auto l = static_cast<std::size_t>(level);
        for (std::size_t parent : topology.nodes_at(level)) {
            const ConceptNode& p = topology.node(parent);
            std::vector<std::size_t> members(p.children);
            members.push_back(parent);

            std::vector<ad::Var> scores;
            std::vector<ad::Var> rows;
            scores.reserve(members.size());
            rows.reserve(members.size());
            for (std::size_t m : members) {
                const ad::Var pair = tape.concat(states[parent], states[m]);
                scores.push_back(tape.leaky_relu(tape.dot(attention[l], pair), kAttentionNegativeSlope));
                rows.push_back(states[m]);
            }
            const ad::Var alpha = tape.softmax(tape.stack(scores));
            const ad::Var pooled = tape.vecmat(alpha, tape.stack_rows(rows));
            if (trace) {
                const auto a = tape.value(alpha);
                trace->push_back({parent, members, {a.begin(), a.end()}});
            }
            states[parent] = tape.elu(pooled);
        }
    }
}

void encode(ad::Tape& tape, const ConceptTree& topology, std::vector<ad::Var>& states,
            const ParamVars& params, const FlowOptions& options) {
    if (states.size() != topology.size()) {
        throw std::invalid_argument("flow: one state variable per tree node required");
    }
    if (options.is_identity()) {
        return;
    }
    std::array<ad::Var, 3> rot{};
    if (options.diffusion) {
        rot = rotations(tape, params.phases);
    }
    for (std::size_t it = 0; it < options.iterations; ++it) {
        if (options.diffusion) diffuse(tape, topology, states, rot);
        if (options.aggregation) aggregate(tape, topology, states, params.attention);
    }
}

}  // namespace flow

namespace {

void check_dims(const ConceptTree& tree) {
    if (tree.dim() % 2 != 0) {
        throw std::invalid_argument("concept flow: tree dimension must be even");
    }
}

std::vector<ad::Var> state_constants(ad::Tape& tape, const ConceptTree& tree) {
    std::vector<ad::Var> states;
    states.reserve(tree.size());
    for (const ConceptNode& n : tree.nodes()) {
        if (n.state.size() != tree.dim()) {
            throw std::invalid_argument("concept flow: node state dimension mismatch");
        }
        states.push_back(tape.constant(n.state));
    }
    return states;
}

void write_back(const ad::Tape& tape, const std::vector<ad::Var>& states, ConceptTree& tree) {
    for (std::size_t id = 0; id < tree.size(); ++id) {
        const auto v = tape.value(states[id]);
        tree.node(id).state.assign(v.begin(), v.end());
    }
}

std::array<ad::Var, 3> constants3(ad::Tape& tape, const std::array<std::vector<double>, 3>& blocks,
                                  std::size_t expected) {
    std::array<ad::Var, 3> out;
    for (std::size_t l = 0; l < 3; ++l) {
        if (blocks[l].size() != expected) {
            throw std::invalid_argument("concept flow: parameter block has the wrong length");
        }
        out[l] = tape.constant(blocks[l]);
    }
    return out;
}

}  // namespace

ConceptTree metapath_diffusion(ConceptTree tree, const EdgePhases& phases) {
    check_dims(tree);
    ad::Tape tape;
    auto states = state_constants(tape, tree);
    const auto rot = flow::rotations(tape, constants3(tape, phases.theta, tree.dim() / 2));
    flow::diffuse(tape, tree, states, rot);
    write_back(tape, states, tree);
    return tree;
}

ConceptTree hierarchy_aggregation(ConceptTree tree, const AggParams& agg, AggregationTrace* trace) {
    check_dims(tree);
    ad::Tape tape;
    auto states = state_constants(tape, tree);
    flow::aggregate(tape, tree, states, constants3(tape, agg.weights, 2 * tree.dim()), trace);
    write_back(tape, states, tree);
    return tree;
}

ConceptEncoding bico_encode(const ConceptTree& tree, const EdgePhases& phases, const AggParams& agg,
                            const FlowOptions& options) {
    check_dims(tree);
    ad::Tape tape;
    auto states = state_constants(tape, tree);
    const flow::ParamVars vars{constants3(tape, phases.theta, tree.dim() / 2),
                               constants3(tape, agg.weights, 2 * tree.dim())};
    flow::encode(tape, tree, states, vars, options);

    ConceptEncoding out;
    for (std::size_t f = 0; f < tree.facet_count(); ++f) {
        const auto v = tape.value(states[tree.facet_node(f)]);
        out.facets.emplace_back(v.begin(), v.end());
        for (Stance s : kStances) {
            const auto w = tape.value(states[tree.ideology_node(f, s)]);
            out.ideologies.emplace_back(w.begin(), w.end());
        }
    }
    return out;
}

}  // namespace bico

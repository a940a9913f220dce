#pragma once

// Bidirectional iterative concept flow over a ConceptTree.
//
// Root-to-leaf diffusion rotates each parent's running sum in complex space
// and adds it to the child (one shared rotation per level transition), then
// divides by path depth. Leaf-to-root aggregation replaces every parent with
// ELU of an attention-weighted average over itself and its own children, one
// attention vector per parent level. An iteration is diffusion followed by
// aggregation; states carry over between iterations.

#include <array>
#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "bico/autodiff.hpp"
#include "bico/schema_tree.hpp"

namespace bico {

inline constexpr double kAttentionNegativeSlope = 0.2;

/// Real vector of even length d read as d/2 complex numbers: element k is
/// data[k] + i * data[k + d/2].
class ComplexVec {
public:
    ComplexVec() = default;
    explicit ComplexVec(std::vector<double> data);
    static ComplexVec zeros(std::size_t dim) { return ComplexVec(std::vector<double>(dim, 0.0)); }

    std::size_t dim() const { return data_.size(); }
    std::size_t half() const { return data_.size() / 2; }
    std::span<const double> real() const { return {data_.data(), half()}; }
    std::span<const double> imag() const { return {data_.data() + half(), half()}; }
    double modulus(std::size_t k) const;
    const std::vector<double>& data() const { return data_; }

private:
    std::vector<double> data_;
};

ComplexVec complex_product(const ComplexVec& a, const ComplexVec& b);
/// Euler's formula per component: (cos theta | sin theta).
ComplexVec phases_to_rotation(std::span<const double> theta);

/// Phase vectors for the three level transitions (0->1, 1->2, 2->3).
struct EdgePhases {
    std::array<std::vector<double>, 3> theta;

    static EdgePhases zeros(std::size_t half);
    // Uniform in (-pi, pi).
    static EdgePhases random(std::size_t half, std::mt19937_64& rng);
    ComplexVec rotation(std::size_t level) const { return phases_to_rotation(theta.at(level)); }
};

/// Attention vectors (length 2d) scoring [h_parent | h_member], indexed by the
/// parent's level (0 = root, 1 = domain, 2 = facet).
struct AggParams {
    std::array<std::vector<double>, 3> weights;

    static AggParams zeros(std::size_t dim);
    static AggParams random(std::size_t dim, std::mt19937_64& rng);
};

struct FlowOptions {
    std::size_t iterations = 2;
    bool diffusion = true;
    bool aggregation = true;

    bool is_identity() const { return iterations == 0 || (!diffusion && !aggregation); }
};

/// Attention weights of one aggregation step; members are the parent's
/// children followed by the parent itself.
struct AggregationRecord {
    std::size_t parent = 0;
    std::vector<std::size_t> members;
    std::vector<double> alpha;
};
using AggregationTrace = std::vector<AggregationRecord>;

ConceptTree metapath_diffusion(ConceptTree tree, const EdgePhases& phases);
ConceptTree hierarchy_aggregation(ConceptTree tree, const AggParams& agg, AggregationTrace* trace = nullptr);

/// Final facet states (schema order) and ideology states (facet-major,
/// Left/Center/Right), each a real vector of length d.
struct ConceptEncoding {
    std::vector<std::vector<double>> facets;
    std::vector<std::vector<double>> ideologies;

    const std::vector<double>& ideology(std::size_t facet, Stance s) const {
        return ideologies.at(facet * 3 + static_cast<std::size_t>(s));
    }
};

ConceptEncoding bico_encode(const ConceptTree& tree, const EdgePhases& phases, const AggParams& agg,
                            const FlowOptions& options);

// Differentiable versions. `states` holds one 1 x d variable per tree node and
// is updated in place; only the tree topology is read.
namespace flow {

struct ParamVars {
    std::array<ad::Var, 3> phases;
    std::array<ad::Var, 3> attention;
};

std::array<ad::Var, 3> rotations(ad::Tape& tape, const std::array<ad::Var, 3>& phases);
void diffuse(ad::Tape& tape, const ConceptTree& topology, std::vector<ad::Var>& states,
             const std::array<ad::Var, 3>& rotations);
void aggregate(ad::Tape& tape, const ConceptTree& topology, std::vector<ad::Var>& states,
               const std::array<ad::Var, 3>& attention, AggregationTrace* trace = nullptr);
void encode(ad::Tape& tape, const ConceptTree& topology, std::vector<ad::Var>& states,
            const ParamVars& params, const FlowOptions& options);

}  // namespace flow

}  // namespace bico

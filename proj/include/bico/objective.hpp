#pragma once

// Batch losses (with gradients) and inference for both subtasks.

#include <optional>
#include <span>
#include <vector>

#include "bico/concept_flow.hpp"
#include "bico/data_io.hpp"
#include "bico/params.hpp"

namespace bico {

/// What the objective reads besides the parameters. `concepts` holds the
/// initial concept states (before the adapter and the flow).
struct DataView {
    const ConceptTree& concepts;
    const std::vector<Sample>& samples;
    const EmbeddingStore& store;
};

struct BatchLoss {
    double total = 0.0;
    // Per facet; absent when the batch has no eligible item for the facet
    // (ce) or no anchor with a positive (contrastive).
    std::vector<std::optional<double>> ce;
    std::vector<std::optional<double>> contrastive;
};

/// (1/n) sum over facets of CE + lambda * contrastive, n = facet count. The
/// contrastive term is the supervised contrastive loss for relevance and the
/// concept-anchored one for ideology. When `gradient` is given it must be
/// shaped like `params` (zeros_like) and receives d(total)/d(params).
BatchLoss batch_loss(const ModelParams& params, const DataView& data, std::span<const BatchItem> batch,
                     const LossConfig& loss, ModelParams* gradient = nullptr);

/// Initial states with the adapter applied to every facet and ideology
/// concept; domain and root states are re-averaged.
ConceptTree adapted_concepts(const ConceptTree& concepts, const Adapter& adapter);

/// Forward pass with fixed parameters.
class Predictor {
public:
    Predictor(const ModelParams& params, const ConceptTree& concepts);

    const ConceptEncoding& encoding() const { return encoding_; }

    /// Relevance: probabilities for every facet (rows = facets, cols = 2).
    Matrix relevance_probabilities(const Sample& sample, const EmbeddingStore& store) const;
    /// Ideology: the text representation t (adapted sentence vector).
    std::vector<double> ideology_representation(const Sample& sample, std::size_t facet,
                                                const EmbeddingStore& store) const;
    std::vector<double> ideology_probabilities(const Sample& sample, std::size_t facet,
                                               const EmbeddingStore& store) const;

private:
    const ModelParams& params_;
    ConceptEncoding encoding_;
};

std::size_t argmax(std::span<const double> v);

}  // namespace bico

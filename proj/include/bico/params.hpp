#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "bico/concept_flow.hpp"
#include "bico/gradcheck.hpp"
#include "bico/model.hpp"

namespace bico {

/// Everything trainable for one subtask, plus the architecture switches
/// needed to rebuild the forward pass.
struct ModelParams {
    Subtask subtask = Subtask::Ideology;
    std::size_t dim = 0;
    std::size_t hidden = kDefaultHiddenSize;
    FlowOptions flow;
    std::vector<std::string> facet_codes;

    EdgePhases phases;
    AggParams attention;
    std::vector<FacetHead> heads;  // schema facet order
    Adapter adapter;

    static ModelParams init(Subtask subtask, std::size_t dim, std::vector<std::string> facet_codes,
                            std::size_t hidden, FlowOptions flow, bool adapter, std::uint64_t seed);

    /// Mutable views of every trainable block, in a fixed order. The adapter
    /// blocks are listed only when it is enabled.
    std::vector<ParamGroup> groups();
    // Same order as groups(), read-only.
    std::vector<std::span<const double>> blocks() const;
    ModelParams zeros_like() const;
    std::size_t parameter_count();
};

void save_params(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_params(const std::filesystem::path& path);

}  // namespace bico

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "bico/data_io.hpp"
#include "bico/metrics.hpp"
#include "bico/objective.hpp"
#include "bico/optimizer.hpp"
#include "bico/params.hpp"

namespace bico {

struct TrainConfig {
    Subtask subtask = Subtask::Ideology;
    FlowOptions flow;
    LossConfig loss;
    AdamWConfig optim;
    std::size_t batch_size = 64;
    std::size_t epochs = 30;
    std::size_t hidden = kDefaultHiddenSize;
    bool adapter = true;
    std::uint64_t seed = 1;

    /// Relevance: k=4, tau=0.5. Ideology: k=2, tau=0.1. Both: lambda=0.3,
    /// B=64, lr=2e-5, 30 epochs.
    static TrainConfig defaults(Subtask subtask);
    void validate() const;
};

/// Schema, concept tree with initial states, samples and embeddings.
struct Dataset {
    SchemaSpec schema;
    ConceptTree concepts;
    std::vector<Sample> samples;
    EmbeddingStore store;

    // Builds the tree at the store's dimension and initializes concept states
    // from the store. DataError on missing concept records.
    static Dataset assemble(SchemaSpec schema, std::vector<Sample> samples, EmbeddingStore store);
    DataView view() const { return {concepts, samples, store}; }
    const std::vector<std::string>& facet_codes() const { return concepts.facet_codes(); }
};

struct EpochLog {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;  // mean over the epoch's batches
    std::optional<double> val_micro_f1;
};

struct TrainResult {
    ModelParams best;  // best validation Micro-F1 (last epoch if no validation set)
    ModelParams last;
    std::size_t best_epoch = 0;
    std::vector<EpochLog> log;
    // Loss over the whole training split, evaluated in a fixed order, before
    // the first update and after the last one.
    double initial_loss = 0.0;
    double final_loss = 0.0;
};

using EpochCallback = std::function<void(const EpochLog&)>;

TrainResult train(const Dataset& data, const Split& split, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

/// Mean batch loss over `indices` in sample order (no updates).
double dataset_loss(const ModelParams& params, const Dataset& data, const std::vector<std::size_t>& indices,
                    const LossConfig& loss, std::size_t batch_size);

MetricsReport evaluate(const ModelParams& params, const Dataset& data, const std::vector<std::size_t>& indices);

/// Ideology text representations of one facet plus its three anchors.
struct Representations {
    std::string facet;
    std::vector<std::string> ids;
    std::vector<Stance> labels;
    std::vector<std::vector<double>> texts;
    std::array<std::vector<double>, 3> anchors;  // Left, Center, Right
};

/// DataError on an unknown facet code; invalid_argument for relevance params.
Representations export_representations(const ModelParams& params, const Dataset& data,
                                        const std::vector<std::size_t>& indices, const std::string& facet_code);

/// `<prefix>.bin` (embedding format; keys "{id}@{facet}" and "{facet}:{stance}")
/// and `<prefix>.json` (ids, labels, anchor keys).
void write_representations(const Representations& reps, const std::filesystem::path& prefix);

}  // namespace bico

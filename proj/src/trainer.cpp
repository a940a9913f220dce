#include "bico/trainer.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "bico/parallel.hpp"
#include "json.hpp"

namespace bico {

TrainConfig TrainConfig::defaults(Subtask subtask) {
    TrainConfig c;
    c.subtask = subtask;
    c.flow.iterations = subtask == Subtask::Relevance ? 4 : 2;
    c.loss.tau = subtask == Subtask::Relevance ? 0.5 : 0.1;
    c.loss.lambda = 0.3;
    return c;
}

void TrainConfig::validate() const {
    loss.validate();
    optim.validate();
    if (batch_size == 0) throw std::invalid_argument("train config: batch size must be at least 1");
    if (hidden == 0) throw std::invalid_argument("train config: hidden size must be positive");
}

Dataset Dataset::assemble(SchemaSpec schema, std::vector<Sample> samples, EmbeddingStore store) {
    Dataset d;
    d.schema = std::move(schema);
    d.samples = std::move(samples);
    d.store = std::move(store);
    if (d.store.dim() == 0 || d.store.dim() % 2 != 0) {
        throw DataError("embedding dimension must be even and positive, got " + std::to_string(d.store.dim()));
    }
    d.concepts = init_node_states(build_tree(d.schema, d.store.dim()),
                                  d.store.concept_embeddings(d.schema.facet_codes()));
    return d;
}

double dataset_loss(const ModelParams& params, const Dataset& data, const std::vector<std::size_t>& indices,
                    const LossConfig& loss, std::size_t batch_size) {
    const auto items = eval_items(data.samples, indices, params.subtask);
    if (items.empty()) throw std::invalid_argument("dataset_loss: no items");
    double sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < items.size(); start += batch_size) {
        const std::size_t end = std::min(items.size(), start + batch_size);
        sum += batch_loss(params, data.view(), std::span(items).subspan(start, end - start), loss).total;
        ++batches;
    }
    return sum / static_cast<double>(batches);
}

TrainResult train(const Dataset& data, const Split& split, const TrainConfig& config, const EpochCallback& on_epoch) {
    config.validate();
    if (split.train.empty()) throw std::invalid_argument("train: empty training split");

    TrainResult result;
    ModelParams params = ModelParams::init(config.subtask, data.store.dim(), data.facet_codes(), config.hidden,
                                           config.flow, config.adapter, config.seed);
    ModelParams grad = params.zeros_like();
    OptimState state;
    const BatchIterator batches(data.samples, split.train, data.store, data.facet_codes(), config.batch_size,
                                config.seed, config.subtask);
    if (batches.item_count() == 0) throw DataError("train: the training split has no usable items");

    result.initial_loss = dataset_loss(params, data, split.train, config.loss, config.batch_size);
    std::optional<double> best_f1;
    std::size_t step = 0;
    for (std::size_t e = 0; e < config.epochs; ++e) {
        double sum = 0.0;
        const auto epoch = batches.epoch(e);
        for (const Batch& batch : epoch) {
            ++step;
            const BatchLoss bl = batch_loss(params, data.view(), batch, config.loss, &grad);
            if (!std::isfinite(bl.total)) {
                throw NumericError("train: non-finite loss at step " + std::to_string(step));
            }
            sum += bl.total;
            const auto pg = params.groups();
            const auto gg = grad.groups();
            adamw_step(pg, gg, state, config.optim);
        }
        EpochLog log;
        log.epoch = e + 1;
        log.train_loss = sum / static_cast<double>(epoch.size());
        if (!split.val.empty()) {
            log.val_micro_f1 = evaluate(params, data, split.val).micro_f1;
            if (log.val_micro_f1 && (!best_f1 || *log.val_micro_f1 > *best_f1)) {
                best_f1 = log.val_micro_f1;
                result.best = params;
                result.best_epoch = e + 1;
            }
        }
        result.log.push_back(log);
        if (on_epoch) on_epoch(log);
    }
    result.final_loss = dataset_loss(params, data, split.train, config.loss, config.batch_size);
    result.last = params;
    if (!best_f1) {
        result.best = params;
        result.best_epoch = config.epochs;
    }
    return result;
}

MetricsReport evaluate(const ModelParams& params, const Dataset& data, const std::vector<std::size_t>& indices) {
    const Predictor predictor(params, data.concepts);
    const std::size_t nf = data.concepts.facet_count();
    const std::size_t k = class_count(params.subtask);
    const auto items = eval_items(data.samples, indices, params.subtask);

    // One prediction slot per (item, facet); ideology items fill one slot.
    std::vector<std::vector<std::size_t>> preds(items.size());
    parallel_for(items.size(), [&](std::size_t i) {
        const Sample& s = data.samples[items[i].sample];
        if (params.subtask == Subtask::Relevance) {
            const Matrix p = predictor.relevance_probabilities(s, data.store);
            for (std::size_t f = 0; f < nf; ++f) preds[i].push_back(argmax(p.row(f)));
        } else {
            preds[i].push_back(argmax(predictor.ideology_probabilities(s, items[i].facet, data.store)));
        }
    });

    std::vector<Confusion> conf(nf, Confusion(k));
    for (std::size_t i = 0; i < items.size(); ++i) {
        const Sample& s = data.samples[items[i].sample];
        if (params.subtask == Subtask::Relevance) {
            for (std::size_t f = 0; f < nf; ++f) conf[f].add(static_cast<std::size_t>(s.relevance[f]), preds[i][f]);
        } else {
            const std::size_t f = items[i].facet;
            conf[f].add(static_cast<std::size_t>(*s.ideology[f]), preds[i][0]);
        }
    }
    return compute_metrics(params.subtask, data.facet_codes(), conf);
}

Representations export_representations(const ModelParams& params, const Dataset& data,
                                        const std::vector<std::size_t>& indices, const std::string& facet_code) {
    if (params.subtask != Subtask::Ideology) {
        throw std::invalid_argument("export_representations: ideology parameters required");
    }
    const auto pos = data.concepts.facet_position(facet_code);
    if (!pos) throw DataError("unknown facet code '" + facet_code + "'");
    const Predictor predictor(params, data.concepts);
    Representations r;
    r.facet = facet_code;
    for (Stance s : kStances) r.anchors[static_cast<std::size_t>(s)] = predictor.encoding().ideology(*pos, s);
    for (std::size_t i : indices) {
        const Sample& s = data.samples.at(i);
        if (!s.ideology.at(*pos)) continue;
        r.ids.push_back(s.id);
        r.labels.push_back(*s.ideology[*pos]);
        r.texts.push_back(predictor.ideology_representation(s, *pos, data.store));
    }
    return r;
}

void write_representations(const Representations& reps, const std::filesystem::path& prefix) {
    const std::size_t dim = reps.anchors[0].size();
    EmbeddingStore store(dim);
    nlohmann::ordered_json side;
    side["facet"] = reps.facet;
    side["texts"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < reps.ids.size(); ++i) {
        const std::string key = ideology_key(reps.ids[i], reps.facet);
        store.insert(key, Matrix(1, dim, reps.texts[i]));
        side["texts"].push_back({{"key", key}, {"id", reps.ids[i]}, {"label", std::string(stance_name(reps.labels[i]))}});
    }
    side["anchors"] = nlohmann::ordered_json::object();
    for (Stance s : kStances) {
        const std::string key = concept_key(reps.facet, s);
        store.insert(key, Matrix(1, dim, reps.anchors[static_cast<std::size_t>(s)]));
        side["anchors"][std::string(stance_name(s))] = key;
    }
    if (prefix.has_parent_path()) std::filesystem::create_directories(prefix.parent_path());
    auto bin = prefix;
    bin += ".bin";
    auto json = prefix;
    json += ".json";
    write_embeddings(bin, store);
    std::ofstream out(json);
    if (!out) throw DataError("cannot write " + json.string());
    out << side.dump(2) << '\n';
}

}  // namespace bico

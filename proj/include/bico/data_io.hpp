#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "bico/common.hpp"
#include "bico/model.hpp"
#include "bico/schema_tree.hpp"

namespace bico {

/// One labelled text. Label vectors are indexed by facet position (schema order).
struct Sample {
    std::string id;
    std::string text;
    std::string topic;
    std::vector<int> relevance;                    // kRelated / kUnrelated
    std::vector<std::optional<Stance>> ideology;   // set only on related facets

    bool related(std::size_t facet) const { return relevance.at(facet) == kRelated; }
};

/// Reads the JSON Lines manifest. Relevance must cover every code in
/// `facet_codes`; ideology labels are only allowed on related facets.
std::vector<Sample> read_manifest(const std::filesystem::path& path, const std::vector<std::string>& facet_codes);
std::vector<Sample> parse_manifest(std::istream& in, const std::vector<std::string>& facet_codes);
void write_manifest(const std::filesystem::path& path, const std::vector<Sample>& samples,
                    const std::vector<std::string>& facet_codes);

// Embedding record keys.
std::string relevance_key(const std::string& id);
std::string ideology_key(const std::string& id, const std::string& facet_code);

/// Key -> (rows x dim) matrix, insertion order kept for deterministic output.
class EmbeddingStore {
public:
    explicit EmbeddingStore(std::size_t dim = 0) : dim_(dim) {}

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return keys_.size(); }
    const std::vector<std::string>& keys() const { return keys_; }

    // DataError on duplicate key, wrong width or zero rows.
    void insert(std::string key, Matrix value);
    bool contains(const std::string& key) const { return index_.count(key) != 0; }
    const Matrix* find(const std::string& key) const;
    // DataError when missing.
    const Matrix& at(const std::string& key) const;

    /// The concept vectors for every facet and stance of the schema.
    ConceptEmbeddings concept_embeddings(const std::vector<std::string>& facet_codes) const;

private:
    std::size_t dim_;
    std::vector<std::string> keys_;
    std::vector<Matrix> values_;
    std::unordered_map<std::string, std::size_t> index_;
};

EmbeddingStore read_embeddings(const std::filesystem::path& path);
EmbeddingStore parse_embeddings(std::istream& in);
void write_embeddings(const std::filesystem::path& path, const EmbeddingStore& store);
void write_embeddings(std::ostream& out, const EmbeddingStore& store);

enum class SplitMode { Random, Topic };

struct SplitSpec {
    SplitMode mode = SplitMode::Random;
    // Random mode: train/val/test fractions (must sum to 1).
    std::array<double, 3> ratios{0.8, 0.1, 0.1};
    // Topic mode: every sample of these topics goes to test. A fraction
    // `val_ratio` of the remaining samples is held out for validation.
    std::vector<std::string> holdout;
    double val_ratio = 0.1;
    std::uint64_t seed = 0;
};

struct Split {
    std::vector<std::size_t> train, val, test;
};

Split split_dataset(const std::vector<Sample>& samples, const SplitSpec& spec);

struct SynthConfig {
    std::size_t n_per_class = 50;
    std::size_t dim = 32;
    double sigma = 0.05;
    std::uint64_t seed = 7;
    std::size_t token_rows = 8;
    std::size_t topics = 4;
};

struct SynthData {
    std::vector<Sample> samples;
    EmbeddingStore store;
    // Per facet: the three ideology centers (Left, Center, Right).
    std::vector<std::array<std::vector<double>, 3>> ideology_centers;
    // Per facet: the "related" token center; plus the shared unrelated one.
    std::vector<std::vector<double>> facet_centers;
    std::vector<double> background;
};

/// Every sample is related to exactly one facet. Topics are "T0".."T{topics-1}".
SynthData synth_generate(const std::vector<std::string>& facet_codes, const SynthConfig& config);

struct BatchItem {
    std::size_t sample = 0;
    std::size_t facet = 0;  // ideology only
};
using Batch = std::vector<BatchItem>;

/// Seeded per-epoch shuffling over a subset of samples. For ideology each
/// sample contributes one item per related facet that carries a label.
class BatchIterator {
public:
    // DataError when an embedding the items need is missing.
    BatchIterator(const std::vector<Sample>& samples, std::vector<std::size_t> indices, const EmbeddingStore& store,
                  const std::vector<std::string>& facet_codes, std::size_t batch_size, std::uint64_t seed,
                  Subtask subtask);

    std::size_t item_count() const { return items_.size(); }
    const std::vector<BatchItem>& items() const { return items_; }
    std::vector<Batch> epoch(std::size_t e) const;

private:
    std::vector<BatchItem> items_;
    std::size_t batch_size_;
    std::uint64_t seed_;
};

/// Items in sample order (no shuffling) for evaluation.
std::vector<BatchItem> eval_items(const std::vector<Sample>& samples, const std::vector<std::size_t>& indices,
                                  Subtask subtask);

}  // namespace bico

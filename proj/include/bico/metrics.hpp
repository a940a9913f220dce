#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "bico/model.hpp"

namespace bico {

class Confusion {
public:
    explicit Confusion(std::size_t classes = 0) : classes_(classes), counts_(classes * classes, 0) {}

    std::size_t classes() const { return classes_; }
    void add(std::size_t gold, std::size_t pred);
    void merge(const Confusion& other);
    std::size_t count(std::size_t gold, std::size_t pred) const { return counts_.at(gold * classes_ + pred); }
    std::size_t total() const;
    std::size_t correct() const;

    /// F1 of one class; nullopt when the class occurs in neither gold nor
    /// predictions (2TP + FP + FN = 0).
    std::optional<double> class_f1(std::size_t c) const;
    /// Mean class F1 over the classes that occur in gold or predictions.
    std::optional<double> macro_f1() const;
    std::optional<double> accuracy() const;

private:
    std::size_t classes_;
    std::vector<std::size_t> counts_;
};

struct FacetScore {
    std::optional<double> f1;   // absent when the facet has nothing to score
    std::optional<double> acc;  // ideology only
    std::size_t support = 0;
};

struct MetricsReport {
    Subtask subtask = Subtask::Ideology;
    std::vector<std::string> facets;
    std::vector<FacetScore> per_facet;
    std::optional<double> macro_f1, micro_f1, macro_acc, micro_acc;

    std::string to_json(int indent = 2) const;
};

/// Relevance: per-facet F1 of the Related class. Ideology: per-facet macro-F1
/// over Left/Center/Right plus accuracy. Macro = mean over facets that have a
/// score; Micro = the same measure on the confusion pooled over all facets.
MetricsReport compute_metrics(Subtask subtask, const std::vector<std::string>& facets,
                              const std::vector<Confusion>& per_facet);

}  // namespace bico

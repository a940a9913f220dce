#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "bico/autodiff.hpp"
#include "bico/common.hpp"
#include "bico/schema_tree.hpp"

namespace bico {

enum class Subtask { Relevance, Ideology };

std::string_view subtask_name(Subtask s);
std::optional<Subtask> parse_subtask(std::string_view name);
// 2 for relevance (Related, Unrelated), 3 for ideology (Left, Center, Right).
std::size_t class_count(Subtask s);

// Relevance class indices.
inline constexpr int kRelated = 0;
inline constexpr int kUnrelated = 1;

inline constexpr std::size_t kDefaultHiddenSize = 512;

/// Per-facet classifier: softmax(W2 tanh(W1 t + b1) + b2).
struct FacetHead {
    Matrix w1;
    std::vector<double> b1;
    Matrix w2;
    std::vector<double> b2;

    std::size_t input_dim() const { return w1.cols; }
    std::size_t classes() const { return w2.rows; }

    // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
    static FacetHead random(std::size_t dim, std::size_t hidden, std::size_t classes, std::mt19937_64& rng);
};

/// Shared affine map applied to text and concept vectors before use.
struct Adapter {
    bool enabled = false;
    Matrix w;
    std::vector<double> b;

    static Adapter identity(std::size_t dim, bool enabled);
};

struct LossConfig {
    double tau = 0.1;
    double lambda = 0.3;

    void validate() const;
};

/// softmax(c X^T / sqrt(d)) X. Writes the attention weights when requested.
std::vector<double> attentive_match(std::span<const double> query, const Matrix& tokens,
                                    std::vector<double>* weights = nullptr);
/// Class probabilities.
std::vector<double> classify(std::span<const double> t, const FacetHead& head);
std::vector<double> adapter_apply(const Adapter& adapter, std::span<const double> x);
Matrix adapter_apply(const Adapter& adapter, const Matrix& rows);

/// Concept-anchored contrastive loss for one facet. For every anchor with at
/// least one same-label text, -log(sum over positives / sum over all texts and
/// the other two anchors) of exp(cos / tau); averaged over those anchors.
double cgcl_loss(const std::array<std::vector<double>, 3>& anchors,
                 const std::vector<std::vector<double>>& texts, std::span<const Stance> labels, double tau);

/// Supervised contrastive loss with the texts as their own anchors. Anchors
/// without a same-label partner are skipped; 0 when none qualify.
double cl_loss(const std::vector<std::vector<double>>& texts, std::span<const int> labels, double tau);

/// (1/n) sum_i (ce_i + lambda * cl_i).
double total_loss(std::span<const double> ce, std::span<const double> cl, double lambda, std::size_t n);

namespace graph {

struct HeadVars {
    ad::Var w1, b1, w2, b2;
};

struct AdapterVars {
    bool enabled = false;
    ad::Var w, b;
};

ad::Var attentive_match(ad::Tape& tape, ad::Var query, ad::Var tokens);
ad::Var head_logits(ad::Tape& tape, const HeadVars& head, ad::Var t);
// -log softmax(logits)[label]
ad::Var cross_entropy(ad::Tape& tape, ad::Var logits, std::size_t label);
// Row-wise; identity when disabled.
ad::Var adapter(ad::Tape& tape, const AdapterVars& adapter, ad::Var x);

// nullopt when no anchor has a positive. `texts` is either one variable per
// text or a single (B x d) matrix.
std::optional<ad::Var> cgcl_loss(ad::Tape& tape, const std::array<ad::Var, 3>& anchors, ad::Var texts,
                                 std::span<const Stance> labels, double tau);
std::optional<ad::Var> cgcl_loss(ad::Tape& tape, const std::array<ad::Var, 3>& anchors,
                                 std::span<const ad::Var> texts, std::span<const Stance> labels, double tau);
std::optional<ad::Var> cl_loss(ad::Tape& tape, ad::Var texts, std::span<const int> labels, double tau);
std::optional<ad::Var> cl_loss(ad::Tape& tape, std::span<const ad::Var> texts, std::span<const int> labels,
                               double tau);

}  // namespace graph

}  // namespace bico

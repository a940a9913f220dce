#include "bico/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "bico/kernels.hpp"

namespace bico {

std::string_view subtask_name(Subtask s) {
    return s == Subtask::Relevance ? "relevance" : "ideology";
}

std::optional<Subtask> parse_subtask(std::string_view name) {
    if (name == "relevance") return Subtask::Relevance;
    if (name == "ideology") return Subtask::Ideology;
    return std::nullopt;
}

std::size_t class_count(Subtask s) { return s == Subtask::Relevance ? 2 : 3; }

FacetHead FacetHead::random(std::size_t dim, std::size_t hidden, std::size_t classes, std::mt19937_64& rng) {
    auto fill = [&rng](std::vector<double>& v, std::size_t fan_in) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (double& x : v) x = dist(rng);
    };
    FacetHead h;
    h.w1 = Matrix(hidden, dim);
    h.b1.assign(hidden, 0.0);
    h.w2 = Matrix(classes, hidden);
    h.b2.assign(classes, 0.0);
    fill(h.w1.data, dim);
    fill(h.b1, dim);
    fill(h.w2.data, hidden);
    fill(h.b2, hidden);
    return h;
}

Adapter Adapter::identity(std::size_t dim, bool enabled) {
    Adapter a;
    a.enabled = enabled;
    a.w = Matrix(dim, dim);
    for (std::size_t i = 0; i < dim; ++i) a.w(i, i) = 1.0;
    a.b.assign(dim, 0.0);
    return a;
}

void LossConfig::validate() const {
    if (!(tau > 0.0)) throw std::invalid_argument("loss config: tau must be positive");
    if (!(lambda >= 0.0)) throw std::invalid_argument("loss config: lambda must be non-negative");
}

std::vector<double> attentive_match(std::span<const double> query, const Matrix& tokens,
                                    std::vector<double>* weights) {
    if (tokens.rows == 0) {
        throw std::invalid_argument("attentive_match: empty token matrix");
    }
    if (query.size() != tokens.cols) {
        throw std::invalid_argument("attentive_match: query/token dimension mismatch");
    }
    const auto& k = kernels::active();
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(tokens.cols));
    std::vector<double> w(tokens.rows);
    k.gemv(tokens.data.data(), query.data(), nullptr, w.data(), tokens.rows, tokens.cols);
    double mx = -INFINITY;
    for (double& s : w) {
        s *= inv_sqrt_d;
        mx = std::max(mx, s);
    }
    double total = 0.0;
    for (double& s : w) {
        s = std::exp(s - mx);
        total += s;
    }
    for (double& s : w) s /= total;

    std::vector<double> out(tokens.cols, 0.0);
    k.gemv_t_acc(tokens.data.data(), w.data(), out.data(), tokens.rows, tokens.cols);
    if (weights) *weights = std::move(w);
    return out;
}

std::vector<double> classify(std::span<const double> t, const FacetHead& head) {
    if (t.size() != head.input_dim()) {
        throw std::invalid_argument("classify: input dimension does not match the head");
    }
    const auto& k = kernels::active();
    std::vector<double> hidden(head.w1.rows);
    k.gemv(head.w1.data.data(), t.data(), head.b1.data(), hidden.data(), head.w1.rows, head.w1.cols);
    for (double& h : hidden) h = std::tanh(h);
    std::vector<double> logits(head.classes());
    k.gemv(head.w2.data.data(), hidden.data(), head.b2.data(), logits.data(), head.w2.rows, head.w2.cols);
    const double mx = *std::max_element(logits.begin(), logits.end());
    double total = 0.0;
    for (double& z : logits) {
        z = std::exp(z - mx);
        total += z;
    }
    for (double& z : logits) z /= total;
    return logits;
}

std::vector<double> adapter_apply(const Adapter& adapter, std::span<const double> x) {
    if (!adapter.enabled) {
        return {x.begin(), x.end()};
    }
    if (x.size() != adapter.w.cols) {
        throw std::invalid_argument("adapter: dimension mismatch");
    }
    std::vector<double> y(adapter.w.rows);
    kernels::active().gemv(adapter.w.data.data(), x.data(), adapter.b.data(), y.data(), adapter.w.rows,
                           adapter.w.cols);
    return y;
}

Matrix adapter_apply(const Adapter& adapter, const Matrix& rows) {
    if (!adapter.enabled) return rows;
    Matrix out(rows.rows, adapter.w.rows);
    for (std::size_t r = 0; r < rows.rows; ++r) {
        const auto y = adapter_apply(adapter, rows.row(r));
        std::copy(y.begin(), y.end(), out.row(r).begin());
    }
    return out;
}

namespace graph {

ad::Var attentive_match(ad::Tape& tape, ad::Var query, ad::Var tokens) {
    if (tape.rows(tokens) == 0) {
        throw std::invalid_argument("attentive_match: empty token matrix");
    }
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(tape.cols(tokens)));
    const ad::Var scores = tape.scale(tape.matvec(tokens, query), inv_sqrt_d);
    return tape.vecmat(tape.softmax(scores), tokens);
}

ad::Var head_logits(ad::Tape& tape, const HeadVars& head, ad::Var t) {
    const ad::Var hidden = tape.tanh(tape.linear(t, head.w1, head.b1));
    return tape.linear(hidden, head.w2, head.b2);
}

ad::Var cross_entropy(ad::Tape& tape, ad::Var logits, std::size_t label) {
    return tape.sub(tape.logsumexp(logits), tape.pick(logits, label));
}

ad::Var adapter(ad::Tape& tape, const AdapterVars& adapter, ad::Var x) {
    if (!adapter.enabled) return x;
    return tape.linear(x, adapter.w, adapter.b);
}

std::optional<ad::Var> cgcl_loss(ad::Tape& tape, const std::array<ad::Var, 3>& anchors, ad::Var texts,
                                 std::span<const Stance> labels, double tau) {
    const std::size_t b = labels.size();
    if (b == 0) {
        throw std::invalid_argument("cgcl_loss: empty batch");
    }
    if (tape.rows(texts) != b) {
        throw std::invalid_argument("cgcl_loss: one label per text required");
    }
    if (!(tau > 0.0)) {
        throw std::invalid_argument("cgcl_loss: tau must be positive");
    }
    // Columns: texts 0..b-1, then the anchors b..b+2.
    const std::array<ad::Var, 4> pieces{texts, anchors[0], anchors[1], anchors[2]};
    const ad::Var sims = tape.scale(
        tape.cosine_matrix(tape.stack_rows(anchors), tape.stack_rows(pieces)), 1.0 / tau);
    const std::size_t width = b + 3;

    std::vector<ad::Var> per_anchor;
    for (Stance s : kStances) {
        const auto a = static_cast<std::size_t>(s);
        std::vector<std::size_t> positives;
        std::vector<std::size_t> all;
        for (std::size_t j = 0; j < b; ++j) {
            all.push_back(a * width + j);
            if (labels[j] == s) positives.push_back(a * width + j);
        }
        if (positives.empty()) continue;
        for (std::size_t other = 0; other < 3; ++other) {
            if (other != a) all.push_back(a * width + b + other);
        }
        per_anchor.push_back(tape.sub(tape.logsumexp(tape.gather(sims, std::move(all))),
                                      tape.logsumexp(tape.gather(sims, std::move(positives)))));
    }
    if (per_anchor.empty()) return std::nullopt;
    return tape.mean(per_anchor);
}

std::optional<ad::Var> cgcl_loss(ad::Tape& tape, const std::array<ad::Var, 3>& anchors,
                                 std::span<const ad::Var> texts, std::span<const Stance> labels, double tau) {
    if (texts.size() != labels.size()) {
        throw std::invalid_argument("cgcl_loss: one label per text required");
    }
    if (texts.empty()) {
        throw std::invalid_argument("cgcl_loss: empty batch");
    }
    return cgcl_loss(tape, anchors, tape.stack_rows(texts), labels, tau);
}

std::optional<ad::Var> cl_loss(ad::Tape& tape, ad::Var texts, std::span<const int> labels, double tau) {
    const std::size_t b = labels.size();
    if (tape.rows(texts) != b) {
        throw std::invalid_argument("cl_loss: one label per text required");
    }
    if (!(tau > 0.0)) {
        throw std::invalid_argument("cl_loss: tau must be positive");
    }
    if (b < 2) return std::nullopt;
    const ad::Var sims = tape.scale(tape.cosine_matrix(texts, texts), 1.0 / tau);

    std::vector<ad::Var> per_anchor;
    for (std::size_t i = 0; i < b; ++i) {
        std::vector<std::size_t> positives;
        std::vector<std::size_t> others;
        for (std::size_t k = 0; k < b; ++k) {
            if (k == i) continue;
            others.push_back(i * b + k);
            if (labels[k] == labels[i]) positives.push_back(i * b + k);
        }
        if (positives.empty()) continue;
        per_anchor.push_back(tape.sub(tape.logsumexp(tape.gather(sims, std::move(others))),
                                      tape.logsumexp(tape.gather(sims, std::move(positives)))));
    }
    if (per_anchor.empty()) return std::nullopt;
    return tape.mean(per_anchor);
}

std::optional<ad::Var> cl_loss(ad::Tape& tape, std::span<const ad::Var> texts, std::span<const int> labels,
                               double tau) {
    if (texts.size() != labels.size()) {
        throw std::invalid_argument("cl_loss: one label per text required");
    }
    if (texts.size() < 2) return std::nullopt;
    return cl_loss(tape, tape.stack_rows(texts), labels, tau);
}

}  // namespace graph

double cgcl_loss(const std::array<std::vector<double>, 3>& anchors,
                 const std::vector<std::vector<double>>& texts, std::span<const Stance> labels, double tau) {
    ad::Tape tape;
    std::array<ad::Var, 3> a{};
    for (std::size_t i = 0; i < 3; ++i) a[i] = tape.constant(anchors[i]);
    std::vector<ad::Var> t;
    for (const auto& v : texts) t.push_back(tape.constant(v));
    const auto loss = graph::cgcl_loss(tape, a, t, labels, tau);
    return loss ? tape.scalar(*loss) : 0.0;
}

double cl_loss(const std::vector<std::vector<double>>& texts, std::span<const int> labels, double tau) {
    if (texts.size() < 2) {
        throw std::invalid_argument("cl_loss: at least two texts required");
    }
    ad::Tape tape;
    std::vector<ad::Var> t;
    for (const auto& v : texts) t.push_back(tape.constant(v));
    const auto loss = graph::cl_loss(tape, t, labels, tau);
    return loss ? tape.scalar(*loss) : 0.0;
}

double total_loss(std::span<const double> ce, std::span<const double> cl, double lambda, std::size_t n) {
    if (ce.size() != cl.size()) {
        throw std::invalid_argument("total_loss: per-facet lists differ in length");
    }
    if (n == 0) {
        throw std::invalid_argument("total_loss: facet count must be positive");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < ce.size(); ++i) acc += ce[i] + lambda * cl[i];
    return acc / static_cast<double>(n);
}

}  // namespace bico

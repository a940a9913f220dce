#include "bico/reference.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace bico {

namespace {

using Real = long double;
using Vec = std::vector<Real>;

Vec widen(std::span<const double> v) { return Vec(v.begin(), v.end()); }

// y = W x + b, W stored row-major (rows x x.size()).
Vec affine(std::span<const double> w, std::span<const double> b, const Vec& x) {
    const std::size_t rows = b.size();
    const std::size_t cols = x.size();
    Vec y(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        Real acc = b[r];
        for (std::size_t c = 0; c < cols; ++c) acc += static_cast<Real>(w[r * cols + c]) * x[c];
        y[r] = acc;
    }
    return y;
}

Vec adapt(const Adapter& a, const Vec& x) { return a.enabled ? affine(a.w.data, a.b, x) : x; }

Real dot(const Vec& a, const Vec& b) {
    Real s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

Real cosine(const Vec& a, const Vec& b) { return dot(a, b) / (std::sqrt(dot(a, a)) * std::sqrt(dot(b, b))); }

Real logsumexp(const Vec& z) {
    const Real m = *std::max_element(z.begin(), z.end());
    Real s = 0;
    for (Real v : z) s += std::exp(v - m);
    return m + std::log(s);
}

Vec softmax(const Vec& z) {
    const Real m = *std::max_element(z.begin(), z.end());
    Vec p(z.size());
    Real s = 0;
    for (std::size_t i = 0; i < z.size(); ++i) s += (p[i] = std::exp(z[i] - m));
    for (Real& v : p) v /= s;
    return p;
}

Real cross_entropy(const FacetHead& h, const Vec& t, std::size_t label) {
    Vec hidden = affine(h.w1.data, h.b1, t);
    for (Real& v : hidden) v = std::tanh(v);
    const Vec z = affine(h.w2.data, h.b2, hidden);
    return logsumexp(z) - z[label];
}

std::vector<Vec> encode(const ModelParams& p, const ConceptTree& tree) {
    std::vector<Vec> s(tree.size());
    for (const ConceptNode& n : tree.nodes()) {
        if (n.level == Level::Facet || n.level == Level::Ideology) s[n.id] = adapt(p.adapter, widen(n.state));
    }
    for (Level level : {Level::Domain, Level::Root}) {
        for (std::size_t id : tree.nodes_at(level)) {
            Vec m(tree.dim(), 0);
            for (std::size_t c : tree.node(id).children) {
                for (std::size_t k = 0; k < m.size(); ++k) m[k] += s[c][k];
            }
            for (Real& v : m) v /= static_cast<Real>(tree.node(id).children.size());
            s[id] = m;
        }
    }
    if (p.flow.is_identity()) return s;

    const std::size_t half = tree.dim() / 2;
    for (std::size_t it = 0; it < p.flow.iterations; ++it) {
        if (p.flow.diffusion) {
            std::vector<Vec> prefix(s.size());
            std::vector<Vec> next = s;
            for (const ConceptNode& n : tree.nodes()) {
                if (!n.parent) {
                    prefix[n.id] = s[n.id];
                    continue;
                }
                const auto depth = static_cast<std::size_t>(n.level);
                const auto& theta = p.phases.theta[depth - 1];
                const Vec& q = prefix[*n.parent];
                Vec h = s[n.id];
                for (std::size_t k = 0; k < half; ++k) {
                    const Real c = std::cos(static_cast<Real>(theta[k]));
                    const Real sn = std::sin(static_cast<Real>(theta[k]));
                    h[k] += q[k] * c - q[k + half] * sn;
                    h[k + half] += q[k] * sn + q[k + half] * c;
                }
                prefix[n.id] = h;
                for (Real& v : h) v /= static_cast<Real>(depth + 1);
                next[n.id] = h;
            }
            s = std::move(next);
        }
        if (p.flow.aggregation) {
            for (Level level : {Level::Facet, Level::Domain, Level::Root}) {
                const auto& a = p.attention.weights[static_cast<std::size_t>(level)];
                for (std::size_t parent : tree.nodes_at(level)) {
                    std::vector<std::size_t> members = tree.node(parent).children;
                    members.push_back(parent);
                    Vec scores;
                    for (std::size_t m : members) {
                        Real e = 0;
                        for (std::size_t k = 0; k < tree.dim(); ++k) {
                            e += static_cast<Real>(a[k]) * s[parent][k] +
                                 static_cast<Real>(a[k + tree.dim()]) * s[m][k];
                        }
                        scores.push_back(e > 0 ? e : static_cast<Real>(kAttentionNegativeSlope) * e);
                    }
                    const Vec alpha = softmax(scores);
                    Vec pooled(tree.dim(), 0);
                    for (std::size_t j = 0; j < members.size(); ++j) {
                        for (std::size_t k = 0; k < pooled.size(); ++k) pooled[k] += alpha[j] * s[members[j]][k];
                    }
                    for (Real& v : pooled) v = v > 0 ? v : std::expm1(v);
                    s[parent] = pooled;
                }
            }
        }
    }
    return s;
}

// Supervised contrastive term over `texts`; `present` is false when no text
// has a same-label partner.
Real contrastive(const std::vector<Vec>& texts, const std::vector<int>& labels, Real tau, bool& present) {
    present = false;
    Real sum = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        Vec all, pos;
        for (std::size_t k = 0; k < texts.size(); ++k) {
            if (k == i) continue;
            const Real v = cosine(texts[i], texts[k]) / tau;
            all.push_back(v);
            if (labels[k] == labels[i]) pos.push_back(v);
        }
        if (pos.empty()) continue;
        sum += logsumexp(all) - logsumexp(pos);
        ++n;
    }
    if (n == 0) return 0;
    present = true;
    return sum / static_cast<Real>(n);
}

Real anchored(const std::array<Vec, 3>& anchors, const std::vector<Vec>& texts, const std::vector<int>& labels,
              Real tau, bool& present) {
    present = false;
    Real sum = 0;
    std::size_t n = 0;
    for (std::size_t a = 0; a < 3; ++a) {
        Vec all, pos;
        for (std::size_t j = 0; j < texts.size(); ++j) {
            const Real v = cosine(anchors[a], texts[j]) / tau;
            all.push_back(v);
            if (labels[j] == static_cast<int>(a)) pos.push_back(v);
        }
        if (pos.empty()) continue;
        for (std::size_t o = 0; o < 3; ++o) {
            if (o != a) all.push_back(cosine(anchors[a], anchors[o]) / tau);
        }
        sum += logsumexp(all) - logsumexp(pos);
        ++n;
    }
    if (n == 0) return 0;
    present = true;
    return sum / static_cast<Real>(n);
}

}  // namespace

long double reference_batch_loss(const ModelParams& p, const DataView& data, std::span<const BatchItem> batch,
                                 const LossConfig& loss) {
    const ConceptTree& tree = data.concepts;
    const std::size_t nf = tree.facet_count();
    if (batch.empty()) throw std::invalid_argument("reference loss: empty batch");
    const std::vector<Vec> s = encode(p, tree);
    const Real tau = loss.tau;
    const Real lambda = loss.lambda;
    Real total = 0;

    if (p.subtask == Subtask::Relevance) {
        std::vector<std::vector<Vec>> tokens;
        for (const BatchItem& item : batch) {
            const Matrix& m = data.store.at(relevance_key(data.samples.at(item.sample).id));
            std::vector<Vec> rows;
            for (std::size_t r = 0; r < m.rows; ++r) rows.push_back(adapt(p.adapter, widen(m.row(r))));
            tokens.push_back(std::move(rows));
        }
        const Real scale = 1 / std::sqrt(static_cast<Real>(tree.dim()));
        for (std::size_t f = 0; f < nf; ++f) {
            const Vec& c = s[tree.facet_node(f)];
            std::vector<Vec> texts;
            std::vector<int> labels;
            Real ce = 0;
            for (std::size_t i = 0; i < batch.size(); ++i) {
                Vec scores;
                for (const Vec& x : tokens[i]) scores.push_back(dot(x, c) * scale);
                const Vec w = softmax(scores);
                Vec t(tree.dim(), 0);
                for (std::size_t r = 0; r < w.size(); ++r) {
                    for (std::size_t k = 0; k < t.size(); ++k) t[k] += w[r] * tokens[i][r][k];
                }
                const int label = data.samples[batch[i].sample].relevance.at(f);
                ce += cross_entropy(p.heads[f], t, static_cast<std::size_t>(label));
                texts.push_back(std::move(t));
                labels.push_back(label);
            }
            total += ce / static_cast<Real>(batch.size());
            bool present = false;
            const Real cl = lambda > 0 ? contrastive(texts, labels, tau, present) : 0;
            if (present) total += lambda * cl;
        }
    } else {
        for (std::size_t f = 0; f < nf; ++f) {
            std::vector<Vec> texts;
            std::vector<int> labels;
            Real ce = 0;
            for (const BatchItem& item : batch) {
                if (item.facet != f) continue;
                const Sample& smp = data.samples.at(item.sample);
                const Matrix& v = data.store.at(ideology_key(smp.id, tree.facet_codes()[f]));
                Vec t = adapt(p.adapter, widen(v.row(0)));
                const auto label = static_cast<std::size_t>(*smp.ideology.at(f));
                ce += cross_entropy(p.heads[f], t, label);
                texts.push_back(std::move(t));
                labels.push_back(static_cast<int>(label));
            }
            if (texts.empty()) continue;
            total += ce / static_cast<Real>(texts.size());
            if (lambda > 0) {
                const std::array<Vec, 3> anchors{s[tree.ideology_node(f, Stance::Left)],
                                                 s[tree.ideology_node(f, Stance::Center)],
                                                 s[tree.ideology_node(f, Stance::Right)]};
                bool present = false;
                const Real cg = anchored(anchors, texts, labels, tau, present);
                if (present) total += lambda * cg;
            }
        }
    }
    return total / static_cast<Real>(nf);
}

}  // namespace bico

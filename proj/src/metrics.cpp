#include "bico/metrics.hpp"

#include <stdexcept>

#include "json.hpp"

namespace bico {

void Confusion::add(std::size_t gold, std::size_t pred) {
    if (gold >= classes_ || pred >= classes_) throw std::out_of_range("confusion: class index out of range");
    ++counts_[gold * classes_ + pred];
}

void Confusion::merge(const Confusion& other) {
    if (other.classes_ != classes_) throw std::invalid_argument("confusion: class counts differ");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

std::size_t Confusion::total() const {
    std::size_t n = 0;
    for (std::size_t c : counts_) n += c;
    return n;
}

std::size_t Confusion::correct() const {
    std::size_t n = 0;
    for (std::size_t c = 0; c < classes_; ++c) n += count(c, c);
    return n;
}

std::optional<double> Confusion::class_f1(std::size_t c) const {
    const std::size_t tp = count(c, c);
    std::size_t fp = 0, fn = 0;
    for (std::size_t o = 0; o < classes_; ++o) {
        if (o == c) continue;
        fp += count(o, c);
        fn += count(c, o);
    }
    const std::size_t denom = 2 * tp + fp + fn;
    if (denom == 0) return std::nullopt;
    return 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

std::optional<double> Confusion::macro_f1() const {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t c = 0; c < classes_; ++c) {
        if (const auto f = class_f1(c)) {
            sum += *f;
            ++n;
        }
    }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
}

std::optional<double> Confusion::accuracy() const {
    const std::size_t n = total();
    if (n == 0) return std::nullopt;
    return static_cast<double>(correct()) / static_cast<double>(n);
}

namespace {

std::optional<double> facet_f1(Subtask subtask, const Confusion& c) {
    if (c.total() == 0) return std::nullopt;
    return subtask == Subtask::Relevance ? c.class_f1(kRelated) : c.macro_f1();
}

std::optional<double> mean_of(const std::vector<std::optional<double>>& values) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& v : values) {
        if (v) {
            sum += *v;
            ++n;
        }
    }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
}

nlohmann::json opt(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

}  // namespace

MetricsReport compute_metrics(Subtask subtask, const std::vector<std::string>& facets,
                              const std::vector<Confusion>& per_facet) {
    if (facets.size() != per_facet.size()) throw std::invalid_argument("metrics: one confusion per facet required");
    const std::size_t k = class_count(subtask);
    MetricsReport r;
    r.subtask = subtask;
    r.facets = facets;
    Confusion pooled(k);
    std::vector<std::optional<double>> f1s, accs;
    for (const Confusion& c : per_facet) {
        if (c.classes() != k) throw std::invalid_argument("metrics: confusion has the wrong class count");
        pooled.merge(c);
        FacetScore s;
        s.support = c.total();
        s.f1 = facet_f1(subtask, c);
        if (subtask == Subtask::Ideology) s.acc = c.accuracy();
        f1s.push_back(s.f1);
        accs.push_back(s.acc);
        r.per_facet.push_back(s);
    }
    r.macro_f1 = mean_of(f1s);
    r.micro_f1 = facet_f1(subtask, pooled);
    if (subtask == Subtask::Ideology) {
        r.macro_acc = mean_of(accs);
        r.micro_acc = pooled.accuracy();
    }
    return r;
}

std::string MetricsReport::to_json(int indent) const {
    nlohmann::ordered_json j;
    j["subtask"] = std::string(subtask_name(subtask));
    j["macro_f1"] = opt(macro_f1);
    j["micro_f1"] = opt(micro_f1);
    if (subtask == Subtask::Ideology) {
        j["macro_acc"] = opt(macro_acc);
        j["micro_acc"] = opt(micro_acc);
    }
    j["facets"] = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < facets.size(); ++i) {
        nlohmann::ordered_json f;
        f["f1"] = opt(per_facet[i].f1);
        if (subtask == Subtask::Ideology) f["acc"] = opt(per_facet[i].acc);
        f["support"] = per_facet[i].support;
        j["facets"][facets[i]] = f;
    }
    return j.dump(indent);
}

}  // namespace bico

#include "bico/params.hpp"

#include <fstream>
#include <random>
#include <stdexcept>

#include "bico/common.hpp"
#include "json.hpp"

namespace bico {

ModelParams ModelParams::init(Subtask subtask, std::size_t dim, std::vector<std::string> facet_codes,
                              std::size_t hidden, FlowOptions flow, bool adapter, std::uint64_t seed) {
    if (dim == 0 || dim % 2 != 0) {
        throw std::invalid_argument("model: dimension must be even and positive");
    }
    std::mt19937_64 rng(seed);
    ModelParams p;
    p.subtask = subtask;
    p.dim = dim;
    p.hidden = hidden;
    p.flow = flow;
    p.facet_codes = std::move(facet_codes);
    p.phases = EdgePhases::random(dim / 2, rng);
    p.attention = AggParams::random(dim, rng);
    for (std::size_t f = 0; f < p.facet_codes.size(); ++f) {
        p.heads.push_back(FacetHead::random(dim, hidden, class_count(subtask), rng));
    }
    p.adapter = Adapter::identity(dim, adapter);
    return p;
}

std::vector<ParamGroup> ModelParams::groups() {
    std::vector<ParamGroup> g;
    for (std::size_t l = 0; l < 3; ++l) {
        g.push_back({"phase" + std::to_string(l), phases.theta[l]});
    }
    for (std::size_t l = 0; l < 3; ++l) {
        g.push_back({"attention" + std::to_string(l), attention.weights[l]});
    }
    for (std::size_t f = 0; f < heads.size(); ++f) {
        const std::string prefix = "head[" + facet_codes.at(f) + "].";
        g.push_back({prefix + "w1", heads[f].w1.data});
        g.push_back({prefix + "b1", heads[f].b1});
        g.push_back({prefix + "w2", heads[f].w2.data});
        g.push_back({prefix + "b2", heads[f].b2});
    }
    if (adapter.enabled) {
        g.push_back({"adapter.w", adapter.w.data});
        g.push_back({"adapter.b", adapter.b});
    }
    return g;
}

std::vector<std::span<const double>> ModelParams::blocks() const {
    std::vector<std::span<const double>> out;
    for (const auto& g : const_cast<ModelParams&>(*this).groups()) out.emplace_back(g.values);
    return out;
}

ModelParams ModelParams::zeros_like() const {
    ModelParams z = *this;
    for (auto& group : z.groups()) {
        std::fill(group.values.begin(), group.values.end(), 0.0);
    }
    return z;
}

std::size_t ModelParams::parameter_count() {
    std::size_t n = 0;
    for (const auto& group : groups()) n += group.values.size();
    return n;
}

namespace {

constexpr const char* kFormat = "bico-params-1";

std::vector<double> doubles(const nlohmann::json& j, const char* what, std::size_t expected) {
    auto v = j.get<std::vector<double>>();
    if (v.size() != expected) {
        throw DataError(std::string("params: block '") + what + "' has the wrong length");
    }
    return v;
}

}  // namespace

void save_params(const ModelParams& p, const std::filesystem::path& path) {
    nlohmann::json j;
    j["format"] = kFormat;
    j["subtask"] = std::string(subtask_name(p.subtask));
    j["dim"] = p.dim;
    j["hidden"] = p.hidden;
    j["flow"] = {{"iterations", p.flow.iterations},
                 {"diffusion", p.flow.diffusion},
                 {"aggregation", p.flow.aggregation}};
    j["facets"] = p.facet_codes;
    j["phases"] = p.phases.theta;
    j["attention"] = p.attention.weights;
    j["heads"] = nlohmann::json::array();
    for (const auto& h : p.heads) {
        j["heads"].push_back({{"w1", h.w1.data}, {"b1", h.b1}, {"w2", h.w2.data}, {"b2", h.b2}});
    }
    j["adapter"] = {{"enabled", p.adapter.enabled}, {"w", p.adapter.w.data}, {"b", p.adapter.b}};

    std::ofstream out(path);
    if (!out) {
        throw DataError("params: cannot write " + path.string());
    }
    out << j.dump() << '\n';
}

ModelParams load_params(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("params: cannot open " + path.string());
    }
    try {
        const auto j = nlohmann::json::parse(in);
        if (j.value("format", "") != kFormat) {
            throw DataError("params: unrecognized format in " + path.string());
        }
        ModelParams p;
        const auto subtask = parse_subtask(j.at("subtask").get<std::string>());
        if (!subtask) throw DataError("params: unknown subtask");
        p.subtask = *subtask;
        p.dim = j.at("dim").get<std::size_t>();
        p.hidden = j.at("hidden").get<std::size_t>();
        p.flow.iterations = j.at("flow").at("iterations").get<std::size_t>();
        p.flow.diffusion = j.at("flow").at("diffusion").get<bool>();
        p.flow.aggregation = j.at("flow").at("aggregation").get<bool>();
        p.facet_codes = j.at("facets").get<std::vector<std::string>>();
        for (std::size_t l = 0; l < 3; ++l) {
            p.phases.theta[l] = doubles(j.at("phases").at(l), "phases", p.dim / 2);
            p.attention.weights[l] = doubles(j.at("attention").at(l), "attention", 2 * p.dim);
        }
        const std::size_t classes = class_count(p.subtask);
        const auto& heads = j.at("heads");
        if (heads.size() != p.facet_codes.size()) {
            throw DataError("params: one head per facet required");
        }
        for (const auto& jh : heads) {
            FacetHead h;
            h.w1 = Matrix(p.hidden, p.dim, doubles(jh.at("w1"), "w1", p.hidden * p.dim));
            h.b1 = doubles(jh.at("b1"), "b1", p.hidden);
            h.w2 = Matrix(classes, p.hidden, doubles(jh.at("w2"), "w2", classes * p.hidden));
            h.b2 = doubles(jh.at("b2"), "b2", classes);
            p.heads.push_back(std::move(h));
        }
        const auto& ja = j.at("adapter");
        p.adapter.enabled = ja.at("enabled").get<bool>();
        p.adapter.w = Matrix(p.dim, p.dim, doubles(ja.at("w"), "adapter.w", p.dim * p.dim));
        p.adapter.b = doubles(ja.at("b"), "adapter.b", p.dim);
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("params: malformed file " + path.string() + ": " + e.what());
    }
}

}  // namespace bico

#include "bico/schema_tree.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "bico/common.hpp"
#include "json.hpp"

namespace bico {

std::string_view stance_name(Stance s) {
    switch (s) {
        case Stance::Left: return "Left";
        case Stance::Center: return "Center";
        case Stance::Right: return "Right";
    }
    return "?";
}

std::optional<Stance> parse_stance(std::string_view name) {
    if (name == "Left") return Stance::Left;
    if (name == "Center") return Stance::Center;
    if (name == "Right") return Stance::Right;
    return std::nullopt;
}

const std::string& FacetSpec::stance_concept(Stance s) const {
    switch (s) {
        case Stance::Left: return left;
        case Stance::Center: return center;
        case Stance::Right: return right;
    }
    return left;
}

std::size_t SchemaSpec::facet_count() const {
    std::size_t n = 0;
    for (const auto& d : domains) n += d.facets.size();
    return n;
}

std::vector<std::string> SchemaSpec::facet_codes() const {
    std::vector<std::string> codes;
    for (const auto& d : domains) {
        for (const auto& f : d.facets) codes.push_back(f.code);
    }
    return codes;
}

const FacetSpec& SchemaSpec::facet(std::string_view code) const {
    for (const auto& d : domains) {
        for (const auto& f : d.facets) {
            if (f.code == code) return f;
        }
    }
    throw DataError("schema: unknown facet code '" + std::string(code) + "'");
}

namespace {

std::string required_text(const nlohmann::json& obj, const char* field, const std::string& where) {
    auto it = obj.find(field);
    if (it == obj.end() || !it->is_string()) {
        throw DataError("schema: " + where + " is missing string field '" + field + "'");
    }
    std::string s = it->get<std::string>();
    if (s.empty()) {
        throw DataError("schema: " + where + " has an empty '" + field + "'");
    }
    return s;
}

}  // namespace

SchemaSpec parse_schema(std::string_view json_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(std::string("schema: parse error: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("domains") || !doc["domains"].is_array()) {
        throw DataError("schema: top level must be an object with a \"domains\" array");
    }
    SchemaSpec spec;
    std::set<std::string> seen;
    for (const auto& jd : doc["domains"]) {
        if (!jd.is_object()) throw DataError("schema: domain entries must be objects");
        DomainSpec domain;
        domain.name = required_text(jd, "name", "domain");
        if (!jd.contains("facets") || !jd["facets"].is_array() || jd["facets"].empty()) {
            throw DataError("schema: domain '" + domain.name + "' needs a non-empty \"facets\" array");
        }
        for (const auto& jf : jd["facets"]) {
            if (!jf.is_object()) throw DataError("schema: facet entries must be objects");
            FacetSpec f;
            f.code = required_text(jf, "code", "facet in domain '" + domain.name + "'");
            const std::string where = "facet '" + f.code + "'";
            f.name = required_text(jf, "name", where);
            f.facet_concept = required_text(jf, "facet_concept", where);
            f.left = required_text(jf, "left", where);
            f.center = required_text(jf, "center", where);
            f.right = required_text(jf, "right", where);
            if (!seen.insert(f.code).second) {
                throw DataError("schema: duplicate facet code '" + f.code + "'");
            }
            domain.facets.push_back(std::move(f));
        }
        spec.domains.push_back(std::move(domain));
    }
    if (spec.domains.empty()) {
        throw DataError("schema: no domains");
    }
    return spec;
}

SchemaSpec load_schema(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("schema: cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_schema(ss.str());
}

std::filesystem::path default_schema_path() {
    return BICO_DEFAULT_SCHEMA;
}

std::string concept_key(std::string_view facet_code) { return std::string(facet_code); }

std::string concept_key(std::string_view facet_code, Stance stance) {
    std::string key(facet_code);
    key += ':';
    key += stance_name(stance);
    return key;
}

std::optional<std::size_t> ConceptTree::facet_position(std::string_view code) const {
    for (std::size_t i = 0; i < facet_codes_.size(); ++i) {
        if (facet_codes_[i] == code) return i;
    }
    return std::nullopt;
}

std::size_t ConceptTree::facet_node(std::string_view code) const {
    auto pos = facet_position(code);
    if (!pos) throw DataError("tree: unknown facet code '" + std::string(code) + "'");
    return facet_nodes_[*pos];
}

std::size_t ConceptTree::ideology_node(std::string_view code, Stance stance) const {
    auto pos = facet_position(code);
    if (!pos) throw DataError("tree: unknown facet code '" + std::string(code) + "'");
    return ideology_node(*pos, stance);
}

std::size_t ConceptTree::ideology_node(std::size_t position, Stance stance) const {
    return ideology_nodes_.at(position)[static_cast<std::size_t>(stance)];
}

std::vector<std::size_t> ConceptTree::nodes_at(Level level) const {
    std::vector<std::size_t> ids;
    for (const auto& n : nodes_) {
        if (n.level == level) ids.push_back(n.id);
    }
    return ids;
}

ConceptTree build_tree(const SchemaSpec& spec, std::size_t dim) {
    if (dim == 0 || dim % 2 != 0) {
        throw std::invalid_argument("tree: embedding dimension must be even and positive, got " +
                                    std::to_string(dim));
    }
    ConceptTree tree;
    tree.dim_ = dim;
    auto add = [&](Level level, std::optional<std::size_t> parent) {
        ConceptNode n;
        n.id = tree.nodes_.size();
        n.level = level;
        n.parent = parent;
        n.state.assign(dim, 0.0);
        if (parent) tree.nodes_[*parent].children.push_back(n.id);
        tree.nodes_.push_back(std::move(n));
        return tree.nodes_.back().id;
    };

    const std::size_t root = add(Level::Root, std::nullopt);
    std::vector<std::size_t> domain_ids;
    for (std::size_t d = 0; d < spec.domains.size(); ++d) {
        domain_ids.push_back(add(Level::Domain, root));
    }
    for (std::size_t d = 0; d < spec.domains.size(); ++d) {
        for (const auto& f : spec.domains[d].facets) {
            tree.facet_codes_.push_back(f.code);
            tree.facet_nodes_.push_back(add(Level::Facet, domain_ids[d]));
        }
    }
    for (std::size_t fpos = 0; fpos < tree.facet_nodes_.size(); ++fpos) {
        std::array<std::size_t, 3> leaves{};
        for (Stance s : kStances) {
            leaves[static_cast<std::size_t>(s)] = add(Level::Ideology, tree.facet_nodes_[fpos]);
        }
        tree.ideology_nodes_.push_back(leaves);
    }
    return tree;
}

ConceptTree init_node_states(ConceptTree tree, const ConceptEmbeddings& embeddings) {
    const std::size_t d = tree.dim();
    auto fetch = [&](const std::string& key) -> const std::vector<double>& {
        auto it = embeddings.find(key);
        if (it == embeddings.end()) {
            throw DataError("tree: missing concept embedding '" + key + "'");
        }
        if (it->second.size() != d) {
            throw DataError("tree: concept embedding '" + key + "' has dimension " +
                            std::to_string(it->second.size()) + ", expected " + std::to_string(d));
        }
        return it->second;
    };

    for (std::size_t fpos = 0; fpos < tree.facet_count(); ++fpos) {
        const std::string& code = tree.facet_codes()[fpos];
        tree.node(tree.facet_node(fpos)).state = fetch(concept_key(code));
        for (Stance s : kStances) {
            tree.node(tree.ideology_node(fpos, s)).state = fetch(concept_key(code, s));
        }
    }
    auto average_children = [&](std::size_t id) {
        ConceptNode& n = tree.node(id);
        std::vector<double> acc(d, 0.0);
        for (std::size_t c : n.children) {
            const auto& cs = tree.node(c).state;
            for (std::size_t k = 0; k < d; ++k) acc[k] += cs[k];
        }
        const double inv = 1.0 / static_cast<double>(n.children.size());
        for (double& v : acc) v *= inv;
        n.state = std::move(acc);
    };
    for (std::size_t id : tree.nodes_at(Level::Domain)) average_children(id);
    average_children(tree.root());
    return tree;
}

std::vector<std::array<std::size_t, 4>> enumerate_metapaths(const ConceptTree& tree) {
    std::vector<std::array<std::size_t, 4>> paths;
    for (std::size_t leaf : tree.nodes_at(Level::Ideology)) {
        const std::size_t facet = *tree.node(leaf).parent;
        const std::size_t domain = *tree.node(facet).parent;
        const std::size_t root = *tree.node(domain).parent;
        paths.push_back({root, domain, facet, leaf});
    }
    return paths;
}

}  // namespace bico

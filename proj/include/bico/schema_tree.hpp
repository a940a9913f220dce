#pragma once

// Concept hierarchy: Root -> Domain -> Facet -> Ideology (Left/Center/Right).

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace bico {

enum class Level : std::uint8_t { Root = 0, Domain = 1, Facet = 2, Ideology = 3 };

enum class Stance : std::uint8_t { Left = 0, Center = 1, Right = 2 };

inline constexpr std::array<Stance, 3> kStances{Stance::Left, Stance::Center, Stance::Right};

std::string_view stance_name(Stance s);
std::optional<Stance> parse_stance(std::string_view name);

struct FacetSpec {
    std::string code;
    std::string name;
    std::string facet_concept;
    std::string left;
    std::string center;
    std::string right;

    const std::string& stance_concept(Stance s) const;
};

struct DomainSpec {
    std::string name;
    std::vector<FacetSpec> facets;
};

struct SchemaSpec {
    std::vector<DomainSpec> domains;

    std::size_t facet_count() const;
    // Facet codes in file order.
    std::vector<std::string> facet_codes() const;
    const FacetSpec& facet(std::string_view code) const;
};

SchemaSpec parse_schema(std::string_view json_text);
SchemaSpec load_schema(const std::filesystem::path& path);
// The schema shipped with the repository (path fixed at build time).
std::filesystem::path default_schema_path();

// Join keys between the schema and the embedding store.
std::string concept_key(std::string_view facet_code);
std::string concept_key(std::string_view facet_code, Stance stance);

struct ConceptNode {
    std::size_t id = 0;
    Level level = Level::Root;
    std::optional<std::size_t> parent;
    std::vector<std::size_t> children;
    std::vector<double> state;
};

using ConceptEmbeddings = std::unordered_map<std::string, std::vector<double>>;

/// Node ids are assigned level by level in schema order: the root is 0, then
/// every domain, every facet, and finally the ideology leaves (facet-major,
/// Left/Center/Right).
class ConceptTree {
public:
    std::size_t dim() const { return dim_; }
    std::size_t size() const { return nodes_.size(); }

    const ConceptNode& node(std::size_t id) const { return nodes_.at(id); }
    ConceptNode& node(std::size_t id) { return nodes_.at(id); }
    const std::vector<ConceptNode>& nodes() const { return nodes_; }
    std::size_t root() const { return 0; }

    std::size_t facet_count() const { return facet_codes_.size(); }
    const std::vector<std::string>& facet_codes() const { return facet_codes_; }
    std::optional<std::size_t> facet_position(std::string_view code) const;

    std::size_t facet_node(std::string_view code) const;
    std::size_t ideology_node(std::string_view code, Stance stance) const;
    // By facet position (0-based, schema order).
    std::size_t facet_node(std::size_t position) const { return facet_nodes_.at(position); }
    std::size_t ideology_node(std::size_t position, Stance stance) const;

    std::vector<std::size_t> nodes_at(Level level) const;

private:
    friend ConceptTree build_tree(const SchemaSpec& spec, std::size_t dim);

    std::size_t dim_ = 0;
    std::vector<ConceptNode> nodes_;
    std::vector<std::string> facet_codes_;
    std::vector<std::size_t> facet_nodes_;
    std::vector<std::array<std::size_t, 3>> ideology_nodes_;
};

/// Builds the tree with all states zeroed. dim must be even and positive.
ConceptTree build_tree(const SchemaSpec& spec, std::size_t dim);

/// Facet and Ideology states are set from their concept embeddings; each
/// Domain is the mean of its facets and the Root the mean of its domains.
ConceptTree init_node_states(ConceptTree tree, const ConceptEmbeddings& embeddings);

/// One (Root, Domain, Facet, Ideology) node-id path per leaf, in leaf order.
std::vector<std::array<std::size_t, 4>> enumerate_metapaths(const ConceptTree& tree);

}  // namespace bico

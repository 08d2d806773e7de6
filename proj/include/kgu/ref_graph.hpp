#pragma once

// Immutable reference knowledge graph: interned entity/relation labels, a
// deduplicated canonical triple list, and k-hop neighborhood queries.
//
// Interning is lexicographic: after a load, id order equals label order, so
// anything iterated in id order is already in canonical label order. This is
// what makes downstream artifacts reproducible without per-call sorting.

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace kgu {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;

struct Triple {
    EntityId subject;
    RelationId relation;
    EntityId object;
    auto operator<=>(const Triple&) const = default;
};

enum class EdgeSense { Undirected, DirectedOnly };

class ReferenceGraph {
public:
    // TSV records: subject<TAB>relation<TAB>object. '#' lines and blank lines
    // are skipped; CRLF tolerated. Duplicates collapse. Throws ParseError with
    // a line number for malformed records, and for empty input.
    static ReferenceGraph parse_triples(std::istream& in);
    static ReferenceGraph parse_triples(std::string_view text);

    // Programmatic construction (tests, generators). Same dedup and interning.
    static ReferenceGraph from_records(const std::vector<std::array<std::string, 3>>& records);

    std::size_t entity_count() const { return entity_labels_.size(); }
    std::size_t relation_count() const { return relation_labels_.size(); }
    std::size_t triple_count() const { return triples_.size(); }

    // Label lookups throw LookupError; find_* return nullopt instead.
    EntityId entity(std::string_view label) const;
    RelationId relation(std::string_view label) const;
    std::optional<EntityId> find_entity(std::string_view label) const;
    std::optional<RelationId> find_relation(std::string_view label) const;

    const std::string& entity_label(EntityId id) const;
    const std::string& relation_label(RelationId id) const;

    const std::vector<Triple>& triples() const { return triples_; }
    bool has_triple(EntityId s, RelationId r, EntityId o) const;

    // Relation labels in lexicographic order (== id order).
    const std::vector<std::string>& relation_catalogue() const { return relation_labels_; }

    // Entities whose hop distance from center is in [1, k]; center excluded.
    // Sorted ascending (== canonical label order). k >= 1 or DomainError.
    std::vector<EntityId> k_hop_neighbors(EntityId center, int k,
                                          EdgeSense sense = EdgeSense::Undirected) const;

    // Round-trips through parse_triples to an identical graph.
    void serialize(std::ostream& out) const;
    std::string serialize() const;

private:
    ReferenceGraph() = default;
    void build(std::vector<std::array<std::string, 3>> records);
    void check_entity(EntityId id) const;

    std::vector<std::string> entity_labels_;    // sorted
    std::vector<std::string> relation_labels_;  // sorted
    std::unordered_map<std::string_view, EntityId> entity_index_;
    std::unordered_map<std::string_view, RelationId> relation_index_;
    std::vector<Triple> triples_;  // sorted, unique

    // CSR neighbor lists per entity, deduplicated.
    std::vector<std::uint32_t> out_offset_, in_offset_;
    std::vector<EntityId> out_neighbors_, in_neighbors_;
};

}  // namespace kgu

#include "kgu/ref_graph.hpp"

#include <algorithm>
#include <array>
#include <queue>
#include <sstream>

#include "kgu/error.hpp"
#include "kgu/util.hpp"

namespace kgu {

ReferenceGraph ReferenceGraph::parse_triples(std::istream& in) {
    std::vector<std::array<std::string, 3>> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') continue;
        auto fields = split(line, '\t');
        if (fields.size() != 3)
            throw ParseError("line " + std::to_string(line_no) + ": expected 3 tab-separated fields, got " +
                             std::to_string(fields.size()));
        for (auto f : fields)
            if (trim(f).empty())
                throw ParseError("line " + std::to_string(line_no) + ": empty field");
        records.push_back({std::string(fields[0]), std::string(fields[1]), std::string(fields[2])});
    }
    if (records.empty()) throw ParseError("no triples in input");
    ReferenceGraph g;
    g.build(std::move(records));
    return g;
}

ReferenceGraph ReferenceGraph::parse_triples(std::string_view text) {
    std::istringstream in{std::string(text)};
    return parse_triples(in);
}

ReferenceGraph ReferenceGraph::from_records(const std::vector<std::array<std::string, 3>>& records) {
    if (records.empty()) throw ParseError("no triples in input");
    ReferenceGraph g;
    g.build(records);
    return g;
}

void ReferenceGraph::build(std::vector<std::array<std::string, 3>> records) {
    for (const auto& rec : records) {
        entity_labels_.push_back(rec[0]);
        entity_labels_.push_back(rec[2]);
        relation_labels_.push_back(rec[1]);
    }
    auto sort_unique = [](std::vector<std::string>& v) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    };
    sort_unique(entity_labels_);
    sort_unique(relation_labels_);
    entity_index_.reserve(entity_labels_.size());
    for (std::uint32_t i = 0; i < entity_labels_.size(); ++i)
        entity_index_.emplace(entity_labels_[i], i);
    relation_index_.reserve(relation_labels_.size());
    for (std::uint32_t i = 0; i < relation_labels_.size(); ++i)
        relation_index_.emplace(relation_labels_[i], i);

    triples_.reserve(records.size());
    for (const auto& rec : records)
        triples_.push_back({entity_index_.at(rec[0]), relation_index_.at(rec[1]), entity_index_.at(rec[2])});
    std::sort(triples_.begin(), triples_.end());
    triples_.erase(std::unique(triples_.begin(), triples_.end()), triples_.end());

    // CSR neighbor lists.
    std::vector<std::vector<EntityId>> outs(entity_labels_.size()), ins(entity_labels_.size());
    for (const Triple& t : triples_) {
        outs[t.subject].push_back(t.object);
        ins[t.object].push_back(t.subject);
    }
    auto pack = [&](std::vector<std::vector<EntityId>>& lists, std::vector<std::uint32_t>& offset,
                    std::vector<EntityId>& flat) {
        offset.assign(lists.size() + 1, 0);
        for (std::size_t i = 0; i < lists.size(); ++i) {
            auto& l = lists[i];
            std::sort(l.begin(), l.end());
            l.erase(std::unique(l.begin(), l.end()), l.end());
            offset[i + 1] = offset[i] + static_cast<std::uint32_t>(l.size());
        }
        flat.reserve(offset.back());
        for (auto& l : lists) flat.insert(flat.end(), l.begin(), l.end());
    };
    pack(outs, out_offset_, out_neighbors_);
    pack(ins, in_offset_, in_neighbors_);
}

EntityId ReferenceGraph::entity(std::string_view label) const {
    auto it = entity_index_.find(label);
    if (it == entity_index_.end()) throw LookupError("unknown entity: " + std::string(label));
    return it->second;
}

RelationId ReferenceGraph::relation(std::string_view label) const {
    auto it = relation_index_.find(label);
    if (it == relation_index_.end()) throw LookupError("unknown relation: " + std::string(label));
    return it->second;
}

std::optional<EntityId> ReferenceGraph::find_entity(std::string_view label) const {
    auto it = entity_index_.find(label);
    if (it == entity_index_.end()) return std::nullopt;
    return it->second;
}

std::optional<RelationId> ReferenceGraph::find_relation(std::string_view label) const {
    auto it = relation_index_.find(label);
    if (it == relation_index_.end()) return std::nullopt;
    return it->second;
}

void ReferenceGraph::check_entity(EntityId id) const {
    if (id >= entity_labels_.size())
        throw LookupError("entity id out of range: " + std::to_string(id));
}

const std::string& ReferenceGraph::entity_label(EntityId id) const {
    check_entity(id);
    return entity_labels_[id];
}

const std::string& ReferenceGraph::relation_label(RelationId id) const {
    if (id >= relation_labels_.size())
        throw LookupError("relation id out of range: " + std::to_string(id));
    return relation_labels_[id];
}

bool ReferenceGraph::has_triple(EntityId s, RelationId r, EntityId o) const {
    return std::binary_search(triples_.begin(), triples_.end(), Triple{s, r, o});
}

std::vector<EntityId> ReferenceGraph::k_hop_neighbors(EntityId center, int k, EdgeSense sense) const {
    check_entity(center);
    if (k < 1) throw DomainError("k_hop_neighbors: k must be >= 1");

    std::vector<int> dist(entity_labels_.size(), -1);
    dist[center] = 0;
    std::queue<EntityId> frontier;
    frontier.push(center);
    std::vector<EntityId> out;
    auto visit = [&](EntityId from, EntityId to) {
        if (dist[to] == -1) {
            dist[to] = dist[from] + 1;
            out.push_back(to);
            if (dist[to] < k) frontier.push(to);
        }
    };
    while (!frontier.empty()) {
        EntityId v = frontier.front();
        frontier.pop();
        for (std::uint32_t i = out_offset_[v]; i < out_offset_[v + 1]; ++i) visit(v, out_neighbors_[i]);
        if (sense == EdgeSense::Undirected)
            for (std::uint32_t i = in_offset_[v]; i < in_offset_[v + 1]; ++i) visit(v, in_neighbors_[i]);
    }
    std::sort(out.begin(), out.end());
    return out;
}

void ReferenceGraph::serialize(std::ostream& out) const {
    for (const Triple& t : triples_)
        out << entity_labels_[t.subject] << '\t' << relation_labels_[t.relation] << '\t'
            << entity_labels_[t.object] << '\n';
}

std::string ReferenceGraph::serialize() const {
    std::ostringstream ss;
    serialize(ss);
    return ss.str();
}

}  // namespace kgu

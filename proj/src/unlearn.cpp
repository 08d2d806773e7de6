#include "kgu/unlearn.hpp"

#include <algorithm>
#include <charconv>
#include <set>
#include <unordered_set>

#include "kgu/error.hpp"
#include "kgu/util.hpp"

namespace kgu {

std::string_view to_string(OperatorKind k) {
    switch (k) {
        case OperatorKind::InstanceErase: return "instance_erase";
        case OperatorKind::CorrelatedDamage: return "correlated_damage";
        case OperatorKind::UtilityNoise: return "utility_noise";
    }
    return "instance_erase";
}

void UnlearnOperatorSpec::validate() const {
    if (!(strength >= 0.0 && strength <= 1.0)) throw DomainError("operator strength must be in [0, 1]");
    if (!(fraction >= 0.0 && fraction <= 1.0)) throw DomainError("operator fraction must be in [0, 1]");
    if (radius < 1) throw DomainError("operator radius must be >= 1");
}

namespace {

OperatorKind kind_from_name(std::string_view name) {
    if (name == "instance_erase") return OperatorKind::InstanceErase;
    if (name == "correlated_damage") return OperatorKind::CorrelatedDamage;
    if (name == "utility_noise") return OperatorKind::UtilityNoise;
    throw ConfigError("unknown unlearning operator: " + std::string(name));
}

double parse_real(std::string_view v, std::string_view key) {
    const std::string buf(v);
    char* end = nullptr;
    const double x = std::strtod(buf.c_str(), &end);
    if (end != buf.c_str() + buf.size() || buf.empty())
        throw ConfigError("operator parameter " + std::string(key) + " is not a number: " + buf);
    return x;
}

}  // namespace

std::vector<UnlearnOperatorSpec> parse_operator_pipeline(std::string_view text) {
    std::vector<UnlearnOperatorSpec> ops;
    for (std::string_view entry : split(text, ';')) {
        entry = trim(entry);
        if (entry.empty()) continue;

        UnlearnOperatorSpec op;
        const std::size_t open = entry.find('(');
        if (open == std::string_view::npos) {
            op.kind = kind_from_name(trim(entry));
        } else {
            if (entry.back() != ')')
                throw ConfigError("operator entry missing closing parenthesis: " + std::string(entry));
            op.kind = kind_from_name(trim(entry.substr(0, open)));
            const std::string_view args = entry.substr(open + 1, entry.size() - open - 2);
            for (std::string_view kv : split(args, ',')) {
                kv = trim(kv);
                if (kv.empty()) continue;
                const std::size_t eq = kv.find('=');
                if (eq == std::string_view::npos)
                    throw ConfigError("operator parameter is not key=value: " + std::string(kv));
                const std::string_view key = trim(kv.substr(0, eq));
                const std::string_view value = trim(kv.substr(eq + 1));
                if (key == "strength") {
                    op.strength = parse_real(value, key);
                } else if (key == "fraction") {
                    op.fraction = parse_real(value, key);
                } else if (key == "radius") {
                    const double r = parse_real(value, key);
                    op.radius = static_cast<int>(r);
                    if (static_cast<double>(op.radius) != r)
                        throw ConfigError("operator radius must be an integer");
                } else if (key == "seed") {
                    std::uint64_t s = 0;
                    auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), s);
                    if (ec != std::errc{} || p != value.data() + value.size())
                        throw ConfigError("operator seed is not an unsigned integer: " + std::string(value));
                    op.seed = s;
                } else if (key == "destination") {
                    if (value == "unknown") op.destination = MassDestination::Unknown;
                    else if (value == "no") op.destination = MassDestination::No;
                    else throw ConfigError("operator destination must be 'unknown' or 'no'");
                } else {
                    throw ConfigError("unknown operator parameter: " + std::string(key));
                }
            }
        }
        try {
            op.validate();
        } catch (const DomainError& e) {
            throw ConfigError(e.what());
        }
        ops.push_back(op);
    }
    return ops;
}

std::string format_operator(const UnlearnOperatorSpec& op) {
    std::string out(to_string(op.kind));
    out += "(strength=" + fmt_fixed(op.strength, 3);
    if (op.kind == OperatorKind::CorrelatedDamage) out += ", radius=" + std::to_string(op.radius);
    if (op.kind != OperatorKind::InstanceErase) out += ", fraction=" + fmt_fixed(op.fraction, 3);
    out += ", seed=" + std::to_string(op.seed);
    if (op.destination == MassDestination::No) out += ", destination=no";
    out += ")";
    return out;
}

std::vector<LabelTriple> ForgetSet::labels(const ReferenceGraph& ref) const {
    std::vector<LabelTriple> out;
    out.reserve(targets.size());
    for (Triple t : targets)
        out.push_back({ref.entity_label(t.subject), ref.relation_label(t.relation),
                       ref.entity_label(t.object)});
    return out;
}

ForgetSet sample_forget_set(const BeliefOracle& oracle, const ReferenceGraph& ref, std::size_t n,
                            double bound, std::uint64_t seed) {
    if (n < 1) throw DomainError("forget-set size must be >= 1");

    std::vector<Triple> qualifying;
    for (Triple t : ref.triples()) {
        const LabelTriple q{ref.entity_label(t.subject), ref.relation_label(t.relation),
                            ref.entity_label(t.object)};
        if (admit(oracle.probe(q), bound)) qualifying.push_back(t);
    }
    if (qualifying.size() < n)
        throw SamplingError("forget set needs " + std::to_string(n) + " admitted triples but only " +
                            std::to_string(qualifying.size()) + " qualify");

    // Partial Fisher-Yates: the first n slots are a uniform sample without
    // replacement; qualifying starts canonically sorted, so this is seeded
    // and platform-stable.
    DetRng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.next_below(qualifying.size() - i));
        std::swap(qualifying[i], qualifying[j]);
    }
    ForgetSet fs;
    fs.targets.assign(qualifying.begin(), qualifying.begin() + static_cast<std::ptrdiff_t>(n));
    std::sort(fs.targets.begin(), fs.targets.end());
    fs.bound = bound;
    return fs;
}

namespace {

AnswerDistribution drain_yes(AnswerDistribution d, double strength, MassDestination destination) {
    const double delta = d.yes * strength;
    d.yes -= delta;
    if (destination == MassDestination::Unknown)
        d.unknown += delta;
    else
        d.no += delta;
    return d;
}

AnswerDistribution to_other(AnswerDistribution d, double strength) {
    const double delta = (d.yes + d.no + d.unknown) * strength;
    d.yes *= 1.0 - strength;
    d.no *= 1.0 - strength;
    d.unknown *= 1.0 - strength;
    d.other += delta;
    return d;
}

bool seeded_coin(const LabelTriple& t, std::uint64_t seed, double fraction) {
    std::uint64_t h = fnv1a64(t.subject);
    h = fnv1a64("\t", h);
    h = fnv1a64(t.relation, h);
    h = fnv1a64("\t", h);
    h = fnv1a64(t.object, h);
    DetRng rng(fnv1a64_u64(seed, h));
    return rng.next_double() < fraction;
}

// Entities within `radius` undirected hops of any forget-target endpoint,
// endpoints included.
std::unordered_set<EntityId> damage_zone(const ReferenceGraph& ref, const ForgetSet& forget,
                                         int radius) {
    std::unordered_set<EntityId> zone;
    auto absorb = [&](EntityId center) {
        zone.insert(center);
        for (EntityId v : ref.k_hop_neighbors(center, radius, EdgeSense::Undirected)) zone.insert(v);
    };
    for (Triple t : forget.targets) {
        absorb(t.subject);
        absorb(t.object);
    }
    return zone;
}

}  // namespace

SyntheticBeliefModel apply_operator(const SyntheticBeliefModel& base, const UnlearnOperatorSpec& op,
                                    const ForgetSet& forget, const ReferenceGraph& ref) {
    op.validate();
    if (op.strength == 0.0) return base;

    SyntheticBeliefModel out = base;
    const std::vector<LabelTriple> target_labels = forget.labels(ref);
    const std::set<LabelTriple> target_set(target_labels.begin(), target_labels.end());

    switch (op.kind) {
        case OperatorKind::InstanceErase: {
            for (const LabelTriple& t : target_labels) {
                const auto it = base.facts().find(t);
                const AnswerDistribution d = it != base.facts().end() ? it->second : base.default_absent();
                out.set_fact(t, drain_yes(d, op.strength, op.destination));
            }
            break;
        }
        case OperatorKind::CorrelatedDamage: {
            const std::unordered_set<EntityId> zone = damage_zone(ref, forget, op.radius);
            for (const auto& [t, d] : base.facts()) {
                if (target_set.contains(t)) continue;
                const auto s_id = ref.find_entity(t.subject);
                const auto o_id = ref.find_entity(t.object);
                if (!s_id || !o_id || !zone.contains(*s_id) || !zone.contains(*o_id)) continue;
                if (!seeded_coin(t, op.seed, op.fraction)) continue;
                out.set_fact(t, drain_yes(d, op.strength, op.destination));
            }
            break;
        }
        case OperatorKind::UtilityNoise: {
            for (const auto& [t, d] : base.facts()) {
                if (target_set.contains(t)) continue;
                if (!seeded_coin(t, op.seed, op.fraction)) continue;
                out.set_fact(t, to_other(d, op.strength));
            }
            break;
        }
    }
    return out;
}

SyntheticBeliefModel apply_pipeline(const SyntheticBeliefModel& base,
                                    const std::vector<UnlearnOperatorSpec>& ops,
                                    const ForgetSet& forget, const ReferenceGraph& ref) {
    SyntheticBeliefModel current = base;
    for (const UnlearnOperatorSpec& op : ops) current = apply_operator(current, op, forget, ref);
    return current;
}

}  // namespace kgu

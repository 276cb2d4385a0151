#pragma once

#include "rbc/errors.hpp"
#include "rbc/protocol.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <map>
#include <string>

namespace rbc {

inline nlohmann::ordered_json transcript_to_json(const Transcript& t) {
    nlohmann::ordered_json j;
    j["protocol"] = to_string(t.kind);
    j["k"] = t.k;
    j["q"] = t.field.q();
    j["n_stations"] = t.n_stations;
    auto nodes = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < t.nodes.size(); ++i) {
        const NodeRecord& r = t.nodes[i];
        nlohmann::ordered_json n;
        n["node"] = t.node_id(static_cast<int>(i)).str();
        n["b"] = r.challenge.value();
        if (r.response) {
            n["y"] = r.response->value();
        } else {
            n["y"] = "bot";
        }
        n["round"] = r.round;
        n["color"] = r.color;
        nodes.push_back(std::move(n));
    }
    j["nodes"] = std::move(nodes);
    auto reveals = nlohmann::ordered_json::array();
    for (const auto& r : t.reveals) {
        nlohmann::ordered_json n;
        n["node"] = t.leaf_id(r).str();
        if (r.claim) {
            n["d"] = r.claim->bit;
            n["claim"] = r.claim->share.value();
        } else {
            n["d"] = "bot";
            n["claim"] = "bot";
        }
        n["round"] = r.round;
        n["color"] = r.color;
        reveals.push_back(std::move(n));
    }
    j["reveals"] = std::move(reveals);
    j["aborted"] = t.aborted;
    j["abort_round"] = t.abort_round;
    j["abort_reason"] = t.abort_reason;
    return j;
}

namespace detail {

template <class J>
const J& require(const J& j, const std::string& path, const char* key) {
    if (!j.is_object() || !j.contains(key)) throw config_error(path + key, "missing field");
    return j.at(key);
}

template <class J>
std::uint64_t require_uint(const J& j, const std::string& path, const char* key) {
    const J& v = require(j, path, key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.template get<long long>() >= 0)) {
        throw config_error(path + key, "expected a non-negative integer");
    }
    return v.template get<std::uint64_t>();
}

}  // namespace detail

/// Parses a transcript produced by transcript_to_json. Node records may appear
/// in any order as long as every parent is present.
template <class J>
Transcript transcript_from_json(const J& j) {
    using detail::require;
    using detail::require_uint;
    Transcript t;
    const J& proto = require(j, "", "protocol");
    if (!proto.is_string()) throw config_error("protocol", "expected a string");
    t.kind = parse_protocol(proto.template get<std::string>());
    t.k = static_cast<int>(require_uint(j, "", "k"));
    try {
        t.field = FieldSpec(require_uint(j, "", "q"));
    } catch (const std::domain_error& e) {
        throw config_error("q", e.what());
    }
    t.n_stations = static_cast<int>(require_uint(j, "", "n_stations"));
    if (t.k < 1) throw config_error("k", "need at least one round");
    const int arity = t.arity();
    if (arity < 1 || arity > 10) throw config_error("n_stations", "unsupported station count");

    struct Pending {
        NodeId id;
        const J* src;
        std::string path;
    };
    std::vector<Pending> pending;
    const J& nodes = require(j, "", "nodes");
    if (!nodes.is_array()) throw config_error("nodes", "expected an array");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const std::string path = "nodes[" + std::to_string(i) + "].";
        const J& n = nodes[i];
        const J& name = require(n, path, "node");
        if (!name.is_string()) throw config_error(path + "node", "expected a string");
        try {
            pending.push_back(Pending{NodeId::parse(name.template get<std::string>(), arity), &n, path});
        } catch (const std::domain_error& e) {
            throw config_error(path + "node", e.what());
        }
    }
    std::stable_sort(pending.begin(), pending.end(),
                     [](const Pending& a, const Pending& b) { return a.id.depth() < b.id.depth(); });

    std::map<NodeId, int> index;
    for (const auto& p : pending) {
        const J& n = *p.src;
        NodeRecord rec;
        rec.depth = p.id.depth();
        if (rec.depth >= t.k) throw config_error(p.path + "node", "node is not internal");
        if (index.count(p.id)) throw config_error(p.path + "node", "duplicate node");
        if (!p.id.is_root()) {
            auto it = index.find(p.id.prefix(rec.depth - 1));
            if (it == index.end()) throw config_error(p.path + "node", "parent missing from transcript");
            rec.parent = it->second;
            rec.letter = p.id.last();
            const NodeRecord& par = t.nodes[static_cast<std::size_t>(rec.parent)];
            rec.key = child_key(par.key, rec.letter);
            rec.heap = par.heap == kNoHeapIndex ? kNoHeapIndex
                                                : par.heap * static_cast<std::uint64_t>(arity) + rec.letter + 1;
        }
        const std::uint64_t b = require_uint(n, p.path, "b");
        if (b >= t.field.q()) throw config_error(p.path + "b", "challenge out of range");
        rec.challenge = t.field.element(b);
        const J& y = require(n, p.path, "y");
        if (y.is_string()) {
            if (y.template get<std::string>() != "bot") throw config_error(p.path + "y", "expected a number or \"bot\"");
        } else {
            const std::uint64_t yv = require_uint(n, p.path, "y");
            if (yv >= t.field.q()) throw config_error(p.path + "y", "response out of range");
            rec.response = t.field.element(yv);
        }
        rec.round = static_cast<int>(require_uint(n, p.path, "round"));
        rec.color = static_cast<int>(require_uint(n, p.path, "color"));
        index.emplace(p.id, static_cast<int>(t.nodes.size()));
        t.nodes.push_back(rec);
    }

    const J& reveals = require(j, "", "reveals");
    if (!reveals.is_array()) throw config_error("reveals", "expected an array");
    for (std::size_t i = 0; i < reveals.size(); ++i) {
        const std::string path = "reveals[" + std::to_string(i) + "].";
        const J& n = reveals[i];
        const J& name = require(n, path, "node");
        if (!name.is_string()) throw config_error(path + "node", "expected a string");
        NodeId id;
        try {
            id = NodeId::parse(name.template get<std::string>(), arity);
        } catch (const std::domain_error& e) {
            throw config_error(path + "node", e.what());
        }
        if (id.depth() != t.k) throw config_error(path + "node", "reveal must come from a leaf");
        auto it = index.find(id.prefix(t.k - 1));
        if (it == index.end()) throw config_error(path + "node", "parent missing from transcript");
        RevealRecord rr;
        rr.parent = it->second;
        rr.letter = id.last();
        const J& claim = require(n, path, "claim");
        if (!claim.is_string()) {
            const std::uint64_t d = require_uint(n, path, "d");
            const std::uint64_t a = require_uint(n, path, "claim");
            if (a >= t.field.q()) throw config_error(path + "claim", "share out of range");
            rr.claim = Claim{static_cast<int>(std::min<std::uint64_t>(d, 2)), t.field.element(a)};
        } else if (claim.template get<std::string>() != "bot") {
            throw config_error(path + "claim", "expected a number or \"bot\"");
        }
        rr.round = static_cast<int>(require_uint(n, path, "round"));
        rr.color = static_cast<int>(require_uint(n, path, "color"));
        t.reveals.push_back(rr);
    }
    const J& ab = require(j, "", "aborted");
    if (!ab.is_boolean()) throw config_error("aborted", "expected a boolean");
    t.aborted = ab.template get<bool>();
    if (j.contains("abort_round")) t.abort_round = static_cast<int>(require_uint(j, "", "abort_round"));
    if (j.contains("abort_reason")) {
        if (!j.at("abort_reason").is_string()) throw config_error("abort_reason", "expected a string");
        t.abort_reason = j.at("abort_reason").template get<std::string>();
    }
    return t;
}

}  // namespace rbc

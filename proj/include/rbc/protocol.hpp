#pragma once

#include "rbc/errors.hpp"
#include "rbc/finite_field.hpp"
#include "rbc/random.hpp"
#include "rbc/tree_topology.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rbc {

/// The three commitment schemes. `single` and `fq` run on a unary tree (a
/// chain) alternating between two stations; `tree` runs on the complete
/// (n_stations - 1)-ary tree.
enum class ProtocolKind { single, fq, tree };

inline std::string to_string(ProtocolKind k) {
    switch (k) {
        case ProtocolKind::single: return "single";
        case ProtocolKind::fq: return "fq";
        case ProtocolKind::tree: return "tree";
    }
    return "?";
}

inline ProtocolKind parse_protocol(std::string_view s) {
    if (s == "single" || s == "single_round") return ProtocolKind::single;
    if (s == "fq" || s == "FQ") return ProtocolKind::fq;
    if (s == "tree") return ProtocolKind::tree;
    throw config_error("protocol", "unknown protocol '" + std::string(s) + "' (expected single, fq or tree)");
}

inline int arity_for(ProtocolKind kind, int n_stations) {
    return kind == ProtocolKind::tree ? n_stations - 1 : 1;
}

struct Commitment {
    int d = 0;

    Commitment() = default;
    explicit Commitment(int bit) : d(bit) {
        if (bit != 0 && bit != 1) throw std::domain_error("committed bit must be 0 or 1");
    }
};

inline constexpr std::uint64_t kNoHeapIndex = std::numeric_limits<std::uint64_t>::max();
inline constexpr std::uint64_t kRootKey = 0x243f6a8885a308d3ULL;

/// 64-bit path hash used to key per-node random streams.
constexpr std::uint64_t child_key(std::uint64_t parent_key, int t) noexcept {
    return SplitMix64::mix(parent_key + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(t + 1));
}

inline std::uint64_t node_key(const NodeId& v) {
    std::uint64_t k = kRootKey;
    for (auto t : v.path()) k = child_key(k, t);
    return k;
}

/// Lightweight handle on a node during a run.
struct NodeRef {
    int record = -1;  ///< transcript index; -1 for leaves
    int depth = 0;
    int letter = 0;
    int round = 0;
    int color = 0;
    std::uint64_t key = kRootKey;
    std::uint64_t heap = 0;  ///< BFS index, or kNoHeapIndex for trees too deep to index
};

/// Alice's shared randomness a_v, one element per internal node.
class ShareTable {
public:
    /// Dense table of n_k uniform shares for a tree small enough to enumerate.
    static ShareTable sample(const TreeShape& shape, const FieldSpec& spec, std::uint64_t seed) {
        SplitMix64 rng(seed);
        std::vector<FieldElement> values;
        values.reserve(checked_size(shape));
        for (std::uint64_t i = 0; i < shape.internal_count(); ++i) values.push_back(fe_sample(spec, rng));
        return ShareTable(spec, std::move(values));
    }

    static ShareTable from_values(const TreeShape& shape, const FieldSpec& spec, std::vector<FieldElement> values) {
        if (values.size() != checked_size(shape)) {
            throw std::invalid_argument("share table needs " + std::to_string(shape.internal_count()) + " entries");
        }
        for (const auto& v : values) {
            if (v.modulus() != spec.q()) throw usage_error("share from a different field");
        }
        return ShareTable(spec, std::move(values));
    }

    /// Shares drawn lazily from a per-node stream. Used for deep trees where n_k
    /// entries cannot be stored; each share is still a fixed function of the seed.
    static ShareTable derived(const FieldSpec& spec, std::uint64_t seed) {
        ShareTable t(spec, {});
        t.seed_ = seed;
        t.derived_ = true;
        return t;
    }

    FieldElement at(const NodeRef& v) const {
        if (derived_) {
            SplitMix64 rng(SplitMix64::mix(seed_ ^ v.key));
            return fe_sample(spec_, rng);
        }
        if (v.heap >= values_.size()) throw config_error("shares", "no share for node with index " + std::to_string(v.heap));
        return values_[v.heap];
    }

    FieldElement at(const TreeShape& shape, const NodeId& v) const {
        NodeRef ref;
        ref.key = node_key(v);
        ref.heap = shape.index_of(v);
        ref.depth = v.depth();
        return at(ref);
    }

    bool dense() const noexcept { return !derived_; }
    std::size_t size() const noexcept { return values_.size(); }
    const FieldSpec& field() const noexcept { return spec_; }

private:
    ShareTable(const FieldSpec& spec, std::vector<FieldElement> values) : spec_(spec), values_(std::move(values)) {}

    static std::size_t checked_size(const TreeShape& shape) {
        if (shape.internal_count() > (std::uint64_t{1} << 24)) {
            throw resource_guard_error("dense share table limited to 2^24 entries; use ShareTable::derived");
        }
        return static_cast<std::size_t>(shape.internal_count());
    }

    FieldSpec spec_;
    std::vector<FieldElement> values_;
    std::uint64_t seed_ = 0;
    bool derived_ = false;
};

/// A leaf's opening: the revealed bit and the claimed share of its parent.
struct Claim {
    int bit = 0;
    FieldElement share;

    friend bool operator==(const Claim&, const Claim&) = default;
};

/// One challenge/response round at an internal node.
struct NodeRecord {
    int parent = -1;
    int letter = 0;
    int depth = 0;
    int round = 0;
    int color = 0;
    std::uint64_t key = kRootKey;
    std::uint64_t heap = 0;
    FieldElement challenge;
    std::optional<FieldElement> response;  ///< nullopt is the dead-node answer

    NodeRef ref(int index) const { return NodeRef{index, depth, letter, round, color, key, heap}; }
};

/// A queried leaf. `claim` is empty when the leaf stayed silent.
struct RevealRecord {
    int parent = -1;
    int letter = 0;
    int round = 0;
    int color = 0;
    std::optional<Claim> claim;
};

/// Everything Bob observes in one run.
struct Transcript {
    ProtocolKind kind = ProtocolKind::tree;
    int k = 1;
    FieldSpec field;
    int n_stations = 3;
    std::vector<NodeRecord> nodes;
    std::vector<RevealRecord> reveals;
    bool aborted = false;
    int abort_round = 0;
    std::string abort_reason;

    int arity() const { return arity_for(kind, n_stations); }
    TreeShape shape() const { return TreeShape(k, arity()); }

    NodeId node_id(int record) const {
        std::vector<std::uint8_t> rev;
        for (int i = record; i >= 0 && nodes[static_cast<std::size_t>(i)].parent >= 0;
             i = nodes[static_cast<std::size_t>(i)].parent) {
            rev.push_back(static_cast<std::uint8_t>(nodes[static_cast<std::size_t>(i)].letter));
        }
        return NodeId(arity(), std::vector<std::uint8_t>(rev.rbegin(), rev.rend()));
    }

    NodeId leaf_id(const RevealRecord& r) const {
        return node_id(r.parent).child_unchecked(static_cast<std::uint8_t>(r.letter));
    }

    std::optional<int> find(const NodeId& v) const {
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            if (nodes[i].depth == v.depth() && node_id(static_cast<int>(i)) == v) return static_cast<int>(i);
        }
        return std::nullopt;
    }
};

/// Bob's decision at the end of a run.
struct Verdict {
    enum class Outcome { accept, reject, abort };

    Outcome outcome = Outcome::reject;
    int bit = -1;  ///< revealed bit when accepted
    std::string reason;

    static Verdict accept(int d) { return Verdict{Outcome::accept, d, {}}; }
    static Verdict reject(std::string why) { return Verdict{Outcome::reject, -1, std::move(why)}; }
    static Verdict abort(std::string why) { return Verdict{Outcome::abort, -1, std::move(why)}; }

    bool accepted() const noexcept { return outcome == Outcome::accept; }
    bool accepted(int d) const noexcept { return outcome == Outcome::accept && bit == d; }

    friend bool operator==(const Verdict&, const Verdict&) = default;
};

inline std::string to_string(Verdict::Outcome o) {
    switch (o) {
        case Verdict::Outcome::accept: return "accept";
        case Verdict::Outcome::reject: return "reject";
        case Verdict::Outcome::abort: return "abort";
    }
    return "?";
}

/// Honest answer at a node: root y = a + d*b, otherwise y = a_v + b_v * a_parent.
inline FieldElement honest_response(const FieldElement& share, const std::optional<FieldElement>& parent_share,
                                    const FieldElement& challenge, const Commitment& comm) {
    if (parent_share) return share + challenge * *parent_share;
    return share + challenge * share.same_field(static_cast<std::uint64_t>(comm.d));
}

inline FieldElement honest_response(const TreeShape& shape, const NodeId& v, const FieldElement& challenge,
                                    const ShareTable& shares, const Commitment& comm) {
    if (v.depth() >= shape.depth) throw std::domain_error("leaves are not challenged");
    const FieldElement own = shares.at(shape, v);
    if (v.is_root()) return honest_response(own, std::nullopt, challenge, comm);
    return honest_response(own, shares.at(shape, v.prefix(v.depth() - 1)), challenge, comm);
}

/// Verification chain along a root path of records:
/// alpha_root = y - b*d, alpha_vi = y_vi - b_vi * alpha_parent. Returns the last value.
inline FieldElement alpha_chain_records(const Transcript& t, std::span<const int> path, int d) {
    if (path.empty()) throw precondition_violation("alpha chain needs a non-empty path");
    std::optional<FieldElement> alpha;
    for (int idx : path) {
        const NodeRecord& rec = t.nodes.at(static_cast<std::size_t>(idx));
        if (!rec.response) throw precondition_violation("dead node on the verification path at depth " +
                                                        std::to_string(rec.depth));
        const FieldElement prev = alpha ? *alpha : t.field.element(static_cast<std::uint64_t>(d));
        alpha = *rec.response - rec.challenge * prev;
    }
    return *alpha;
}

inline FieldElement alpha_chain(std::span<const NodeId> path, const Transcript& t, int d) {
    std::vector<int> idx;
    idx.reserve(path.size());
    for (std::size_t i = 0; i < path.size(); ++i) {
        if (path[i].depth() != static_cast<int>(i)) throw precondition_violation("path must run root-downward");
        auto r = t.find(path[i]);
        if (!r) throw precondition_violation("no record for node '" + path[i].str() + "'");
        idx.push_back(*r);
    }
    return alpha_chain_records(t, idx, d);
}

/// Multi-round chain check: alpha_0 = d, alpha_{i+1} = y_{i+1} - b_{i+1} alpha_i,
/// accept iff alpha_k equals the revealed share.
inline Verdict verify_fq(const Transcript& t, int revealed_d, const FieldElement& revealed_share) {
    std::vector<const NodeRecord*> by_depth(static_cast<std::size_t>(t.k), nullptr);
    for (const auto& rec : t.nodes) {
        if (rec.depth >= 0 && rec.depth < t.k) by_depth[static_cast<std::size_t>(rec.depth)] = &rec;
    }
    FieldElement alpha = t.field.element(static_cast<std::uint64_t>(revealed_d));
    for (int i = 0; i < t.k; ++i) {
        const NodeRecord* rec = by_depth[static_cast<std::size_t>(i)];
        if (rec == nullptr) return Verdict::abort("missing round " + std::to_string(i + 1));
        if (!rec->response) return Verdict::abort("no response at round " + std::to_string(i + 1));
        alpha = *rec->response - rec->challenge * alpha;
    }
    if (alpha == revealed_share) return Verdict::accept(revealed_d);
    return Verdict::reject("chain value does not match the revealed share");
}

/// Records the transcript entries a verifier looked at.
struct VerifyAudit {
    std::set<int> value_reads;   ///< node records whose challenge/response were used
    std::set<int> liveness_reads;  ///< node records whose status was inspected
    std::set<int> reveal_reads;  ///< reveal records whose claim was inspected
};

namespace detail {

/// Child lists of node records and reveal records, built once per verification.
struct ChildIndex {
    std::vector<int> first_child, next_sibling, first_reveal, next_reveal;

    explicit ChildIndex(const Transcript& t)
        : first_child(t.nodes.size(), -1),
          next_sibling(t.nodes.size(), -1),
          first_reveal(t.nodes.size(), -1),
          next_reveal(t.reveals.size(), -1) {
        for (int i = static_cast<int>(t.nodes.size()) - 1; i >= 0; --i) {
            const int p = t.nodes[static_cast<std::size_t>(i)].parent;
            if (p >= 0) {
                next_sibling[static_cast<std::size_t>(i)] = first_child[static_cast<std::size_t>(p)];
                first_child[static_cast<std::size_t>(p)] = i;
            }
        }
        for (int i = static_cast<int>(t.reveals.size()) - 1; i >= 0; --i) {
            const int p = t.reveals[static_cast<std::size_t>(i)].parent;
            if (p >= 0 && p < static_cast<int>(t.nodes.size())) {
                next_reveal[static_cast<std::size_t>(i)] = first_reveal[static_cast<std::size_t>(p)];
                first_reveal[static_cast<std::size_t>(p)] = i;
            }
        }
    }
};

template <class NodeAlive, class LeafAlive, class ColorOk>
Verdict verify_tree_impl(const Transcript& t, NodeAlive node_alive, LeafAlive leaf_alive, ColorOk color_ok,
                         VerifyAudit* audit) {
    if (t.aborted) return Verdict::abort(t.abort_reason);
    if (t.nodes.empty() || t.nodes[0].parent != -1 || t.nodes[0].depth != 0) {
        return Verdict::abort("no commit round recorded");
    }
    if (audit) audit->liveness_reads.insert(0);
    if (!node_alive(0)) return Verdict::abort("root did not answer");

    const ChildIndex index(t);
    std::vector<int> path{0};
    int current = 0;
    for (int j = 0; j + 1 < t.k; ++j) {
        int best = -1;
        for (int c = index.first_child[static_cast<std::size_t>(current)]; c >= 0;
             c = index.next_sibling[static_cast<std::size_t>(c)]) {
            if (audit) audit->liveness_reads.insert(c);
            if (node_alive(c) && (best < 0 || t.nodes[static_cast<std::size_t>(c)].letter <
                                                   t.nodes[static_cast<std::size_t>(best)].letter)) {
                best = c;
            }
        }
        if (best < 0) {
            return Verdict::reject("leftmost alive node at depth " + std::to_string(j) + " has no live child");
        }
        path.push_back(best);
        current = best;
    }

    int leaf = -1;
    for (int r = index.first_reveal[static_cast<std::size_t>(current)]; r >= 0;
         r = index.next_reveal[static_cast<std::size_t>(r)]) {
        if (leaf_alive(r) && (leaf < 0 || t.reveals[static_cast<std::size_t>(r)].letter <
                                              t.reveals[static_cast<std::size_t>(leaf)].letter)) {
            leaf = r;
        }
    }
    if (leaf < 0) {
        return Verdict::reject("leftmost alive node at depth " + std::to_string(t.k - 1) + " has no live leaf");
    }
    const Claim claim = *t.reveals[static_cast<std::size_t>(leaf)].claim;
    for (int r = index.first_reveal[static_cast<std::size_t>(current)]; r >= 0;
         r = index.next_reveal[static_cast<std::size_t>(r)]) {
        if (audit) audit->reveal_reads.insert(r);
        if (r != leaf && leaf_alive(r) && !(*t.reveals[static_cast<std::size_t>(r)].claim == claim)) {
            return Verdict::reject("sibling leaves reveal contradictory claims");
        }
    }
    for (int idx : path) {
        if (!color_ok(idx)) return Verdict::reject("round served by the wrong station");
        if (audit) audit->value_reads.insert(idx);
    }
    if (claim.bit != 0 && claim.bit != 1) return Verdict::reject("revealed value is not a bit");
    if (claim.share.modulus() != t.field.q()) return Verdict::reject("claimed share from a different field");
    const FieldElement alpha = alpha_chain_records(t, path, claim.bit);
    if (alpha == claim.share) return Verdict::accept(claim.bit);
    return Verdict::reject("claimed share does not match the verification chain");
}

}  // namespace detail

/// Tree reveal check. Follows the leftmost alive path; requires every node on
/// it to have a live child (a revealing leaf at the last level), rejects
/// contradictory sibling reveals, and accepts iff the leftmost revealing
/// leaf's share equals alpha at the deepest internal node of the path.
inline Verdict verify_tree(const Transcript& t, VerifyAudit* audit = nullptr) {
    return detail::verify_tree_impl(
        t, [&](int i) { return t.nodes[static_cast<std::size_t>(i)].response.has_value(); },
        [&](int r) { return t.reveals[static_cast<std::size_t>(r)].claim.has_value(); }, [](int) { return true; },
        audit);
}

/// Same check with liveness taken from `live` and stations checked against `coloring`.
inline Verdict verify_tree(const Transcript& t, const LivenessMap& live, const Coloring& coloring,
                           VerifyAudit* audit = nullptr) {
    bool inconsistent = false;
    auto node_alive = [&](int i) {
        const bool a = live.alive(t.node_id(i));
        if (a && !t.nodes[static_cast<std::size_t>(i)].response) inconsistent = true;
        return a && t.nodes[static_cast<std::size_t>(i)].response.has_value();
    };
    auto leaf_alive = [&](int r) {
        const auto& rr = t.reveals[static_cast<std::size_t>(r)];
        return rr.claim.has_value() && live.get(t.leaf_id(rr)) != NodeStatus::dead;
    };
    auto color_ok = [&](int i) { return coloring.color(t.node_id(i)) == t.nodes[static_cast<std::size_t>(i)].color; };
    Verdict v = detail::verify_tree_impl(t, node_alive, leaf_alive, color_ok, audit);
    if (inconsistent && v.accepted()) return Verdict::reject("liveness map disagrees with the transcript");
    return v;
}

/// Liveness of every recorded node. Leaves count as alive when they revealed.
inline LivenessMap liveness_from(const Transcript& t) {
    LivenessMap live(t.arity());
    for (std::size_t i = 0; i < t.nodes.size(); ++i) {
        live.set(t.node_id(static_cast<int>(i)), t.nodes[i].response ? NodeStatus::alive : NodeStatus::dead);
    }
    for (const auto& r : t.reveals) live.set(t.leaf_id(r), r.claim ? NodeStatus::alive : NodeStatus::dead);
    return live;
}

/// Bob's verdict for any transcript, dispatching on the protocol kind.
inline Verdict verify_transcript(const Transcript& t) {
    if (t.aborted) return Verdict::abort(t.abort_reason);
    if (t.kind == ProtocolKind::tree) return verify_tree(t);
    const RevealRecord* opened = nullptr;
    for (const auto& r : t.reveals) {
        if (r.claim) opened = &r;
    }
    if (opened == nullptr) return Verdict::reject("no opening received");
    if (opened->claim->bit != 0 && opened->claim->bit != 1) return Verdict::reject("revealed value is not a bit");
    return verify_fq(t, opened->claim->bit, opened->claim->share);
}

class HistoryView;

/// What an Alice agent sees when asked to act at a node.
struct NodeContext {
    const Transcript* transcript = nullptr;
    const HistoryView* view = nullptr;
    NodeRef node;
    std::optional<NodeRef> parent;
    bool leaf = false;
    FieldElement challenge;  ///< meaningless for leaves

    NodeId id() const {
        if (leaf) return transcript->node_id(parent->record).child_unchecked(static_cast<std::uint8_t>(node.letter));
        return transcript->node_id(node.record);
    }
};

/// Read access to earlier challenges, restricted to the acting agent's past
/// light cone. Reads outside it throw causality_violation.
class HistoryView {
public:
    virtual ~HistoryView() = default;
    /// Challenge sent at w; empty if Bob never queried w.
    virtual std::optional<FieldElement> challenge(const NodeId& w) const = 0;
};

class AliceAgent {
public:
    virtual ~AliceAgent() = default;
    /// Answer at an internal node; nullopt means staying silent.
    virtual std::optional<FieldElement> respond(const NodeContext& ctx) = 0;
    /// Opening at a leaf; nullopt means staying silent.
    virtual std::optional<Claim> reveal(const NodeContext& ctx) = 0;
};

class HonestAlice final : public AliceAgent {
public:
    HonestAlice(Commitment comm, ShareTable shares) : comm_(comm), shares_(std::move(shares)) {}

    std::optional<FieldElement> respond(const NodeContext& ctx) override {
        const FieldElement own = shares_.at(ctx.node);
        if (!ctx.parent) return honest_response(own, std::nullopt, ctx.challenge, comm_);
        return honest_response(own, shares_.at(*ctx.parent), ctx.challenge, comm_);
    }

    std::optional<Claim> reveal(const NodeContext& ctx) override { return Claim{comm_.d, shares_.at(*ctx.parent)}; }

    const Commitment& commitment() const noexcept { return comm_; }

private:
    Commitment comm_;
    ShareTable shares_;
};

}  // namespace rbc

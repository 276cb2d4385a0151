#pragma once

#include "rbc/errors.hpp"

#include <algorithm>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace rbc {

/// A node of a complete `arity`-ary tree, addressed by its path from the root.
/// Binary paths print as strings over {l, r}; other arities use digits. The
/// root is the empty path.
class NodeId {
public:
    NodeId() = default;
    explicit NodeId(int arity, std::vector<std::uint8_t> path = {}) : arity_(arity), path_(std::move(path)) {
        for (auto t : path_) {
            if (t >= arity_) throw std::domain_error("path letter out of range for arity " + std::to_string(arity_));
        }
    }

    static NodeId root(int arity = 2) { return NodeId(arity); }

    static NodeId parse(std::string_view text, int arity = 2) {
        std::vector<std::uint8_t> path;
        path.reserve(text.size());
        for (char c : text) {
            if (arity == 2 && (c == 'l' || c == 'r')) {
                path.push_back(c == 'l' ? 0 : 1);
            } else if (c >= '0' && c <= '9' && (c - '0') < arity && arity != 2) {
                path.push_back(static_cast<std::uint8_t>(c - '0'));
            } else {
                throw std::domain_error("invalid node path '" + std::string(text) + "' for arity " +
                                        std::to_string(arity));
            }
        }
        return NodeId(arity, std::move(path));
    }

    int arity() const noexcept { return arity_; }
    int depth() const noexcept { return static_cast<int>(path_.size()); }
    bool is_root() const noexcept { return path_.empty(); }
    const std::vector<std::uint8_t>& path() const noexcept { return path_; }
    std::uint8_t last() const { return path_.back(); }

    NodeId prefix(int depth) const {
        return NodeId(arity_, std::vector<std::uint8_t>(path_.begin(), path_.begin() + depth));
    }

    NodeId child_unchecked(std::uint8_t t) const {
        NodeId c = *this;
        c.path_.push_back(t);
        return c;
    }

    bool is_ancestor_or_self_of(const NodeId& other) const {
        return depth() <= other.depth() && std::equal(path_.begin(), path_.end(), other.path_.begin());
    }

    std::string str() const {
        std::string s;
        s.reserve(path_.size());
        for (auto t : path_) s.push_back(arity_ == 2 ? (t == 0 ? 'l' : 'r') : static_cast<char>('0' + t));
        return s;
    }

    friend bool operator==(const NodeId&, const NodeId&) = default;
    friend auto operator<=>(const NodeId& a, const NodeId& b) {
        if (auto c = a.arity_ <=> b.arity_; c != 0) return c;
        return a.path_ <=> b.path_;
    }

private:
    int arity_ = 2;
    std::vector<std::uint8_t> path_;
};

/// Shape of a complete tree: depth k (leaves at depth k) and arity.
struct TreeShape {
    int depth = 1;
    int arity = 2;

    TreeShape() = default;
    TreeShape(int k, int n) : depth(k), arity(n) {
        if (k < 1) throw std::domain_error("tree depth must be >= 1");
        if (n < 1 || n > 10) throw std::domain_error("tree arity must be in [1, 10]");
    }

    int stations() const noexcept { return arity + 1; }

    /// Number of nodes at depth j.
    std::uint64_t width(int j) const {
        std::uint64_t w = 1;
        for (int i = 0; i < j; ++i) w *= static_cast<std::uint64_t>(arity);
        return w;
    }

    /// Internal nodes (depth < k): 2^k - 1 for the binary tree.
    std::uint64_t internal_count() const {
        std::uint64_t total = 0;
        for (int j = 0; j < depth; ++j) total += width(j);
        return total;
    }

    std::uint64_t node_count() const { return internal_count() + width(depth); }

    /// Breadth-first index: root 0, child t of index i is i*arity + t + 1.
    std::uint64_t index_of(const NodeId& v) const {
        std::uint64_t i = 0;
        for (auto t : v.path()) i = i * static_cast<std::uint64_t>(arity) + t + 1;
        return i;
    }

    NodeId at_index(std::uint64_t i) const {
        std::vector<std::uint8_t> rev;
        while (i > 0) {
            const std::uint64_t t = (i - 1) % static_cast<std::uint64_t>(arity);
            rev.push_back(static_cast<std::uint8_t>(t));
            i = (i - 1) / static_cast<std::uint64_t>(arity);
        }
        std::reverse(rev.begin(), rev.end());
        return NodeId(arity, std::move(rev));
    }

    /// All nodes of depth j in left-to-right order.
    std::vector<NodeId> level(int j) const {
        std::vector<NodeId> out;
        const std::uint64_t first = [&] {
            std::uint64_t f = 0;
            for (int i = 0; i < j; ++i) f += width(i);
            return f;
        }();
        const std::uint64_t w = width(j);
        out.reserve(w);
        for (std::uint64_t i = 0; i < w; ++i) out.push_back(at_index(first + i));
        return out;
    }

    bool contains(const NodeId& v) const { return v.arity() == arity && v.depth() <= depth; }
};

enum class NavRel { parent, brother, child };

/// Tree navigation. `t` is the child letter for NavRel::child.
inline NodeId node_nav(const TreeShape& shape, const NodeId& v, NavRel rel, int t = 0) {
    if (!shape.contains(v)) throw std::domain_error("node '" + v.str() + "' is not in the tree");
    switch (rel) {
        case NavRel::parent:
            if (v.is_root()) throw std::domain_error("the root has no parent");
            return v.prefix(v.depth() - 1);
        case NavRel::brother: {
            if (v.is_root()) throw std::domain_error("the root has no brother");
            if (shape.arity != 2) throw std::domain_error("brother is only defined in binary trees");
            NodeId b = v.prefix(v.depth() - 1);
            return b.child_unchecked(static_cast<std::uint8_t>(1 - v.last()));
        }
        case NavRel::child:
            if (v.depth() >= shape.depth) throw std::domain_error("leaf '" + v.str() + "' has no children");
            if (t < 0 || t >= shape.arity) throw std::domain_error("child letter out of range");
            return v.child_unchecked(static_cast<std::uint8_t>(t));
    }
    throw usage_error("unknown navigation");
}

/// Station colouring of the tree: every internal node and its children use
/// pairwise distinct colours in {1, ..., arity + 1}.
///
/// The canonical colouring gives the root colour 1 and hands each node's
/// children the remaining colours in increasing order, left to right. It is
/// computed on demand so it also serves trees far too deep to tabulate.
class Coloring {
public:
    static Coloring canonical(const TreeShape& shape) { return Coloring(shape); }

    /// Explicit colouring for small trees; validated exhaustively.
    static Coloring from_assignment(const TreeShape& shape, const std::map<NodeId, int>& colors) {
        Coloring c(shape);
        if (shape.node_count() > (std::uint64_t{1} << 22)) {
            throw resource_guard_error("explicit colouring limited to 2^22 nodes");
        }
        c.table_.assign(shape.node_count(), 0);
        for (std::uint64_t i = 0; i < shape.node_count(); ++i) {
            auto it = colors.find(shape.at_index(i));
            if (it == colors.end()) throw std::invalid_argument("colouring misses node '" + shape.at_index(i).str() + "'");
            c.table_[i] = it->second;
        }
        if (auto bad = c.first_violation()) {
            throw std::invalid_argument("colouring constraint violated at node '" + bad->str() + "'");
        }
        return c;
    }

    const TreeShape& shape() const noexcept { return shape_; }
    int colors() const noexcept { return shape_.arity + 1; }
    bool is_canonical() const noexcept { return table_.empty(); }

    static int canonical_child_color(int parent_color, int t) {
        // t-th smallest colour different from parent_color.
        return t + 1 < parent_color ? t + 1 : t + 2;
    }

    int color(const NodeId& v) const {
        if (!table_.empty()) return table_.at(shape_.index_of(v));
        int c = 1;
        for (auto t : v.path()) c = canonical_child_color(c, t);
        return c;
    }

    /// Colour of child t of a node with colour `parent_color` and BFS index
    /// `parent_index` (the index is only consulted for explicit colourings).
    int child_color(int parent_color, std::uint64_t parent_index, int t) const {
        if (table_.empty()) return canonical_child_color(parent_color, t);
        return table_.at(parent_index * static_cast<std::uint64_t>(shape_.arity) + static_cast<std::uint64_t>(t) + 1);
    }

    /// First internal node whose family repeats a colour, if any.
    std::optional<NodeId> first_violation() const {
        for (std::uint64_t i = 0; i < shape_.internal_count(); ++i) {
            const NodeId v = shape_.at_index(i);
            std::set<int> seen{color(v)};
            if (color(v) < 1 || color(v) > colors()) return v;
            for (int t = 0; t < shape_.arity; ++t) {
                const int ct = color(v.child_unchecked(static_cast<std::uint8_t>(t)));
                if (ct < 1 || ct > colors() || !seen.insert(ct).second) return v;
            }
        }
        return std::nullopt;
    }

    bool valid() const { return !first_violation().has_value(); }

private:
    explicit Coloring(const TreeShape& shape) : shape_(shape) {}

    TreeShape shape_;
    std::vector<int> table_;
};

enum class NodeStatus { alive, dead, unqueried };

/// Status of every node Bob has dealt with. Absent nodes are `unqueried`.
class LivenessMap {
public:
    LivenessMap() = default;
    explicit LivenessMap(int arity) : arity_(arity) {}

    void set(const NodeId& v, NodeStatus s) { status_[v] = s; }

    NodeStatus get(const NodeId& v) const {
        auto it = status_.find(v);
        return it == status_.end() ? NodeStatus::unqueried : it->second;
    }

    bool alive(const NodeId& v) const { return get(v) == NodeStatus::alive; }
    bool root_dead() const { return get(NodeId::root(arity_)) != NodeStatus::alive; }
    int arity() const noexcept { return arity_; }
    const std::map<NodeId, NodeStatus>& entries() const noexcept { return status_; }

    /// Every ancestor-inclusive prefix of v is alive.
    bool alive_path(const NodeId& v) const {
        for (int j = 0; j <= v.depth(); ++j) {
            if (!alive(v.prefix(j))) return false;
        }
        return true;
    }

private:
    int arity_ = 2;
    std::map<NodeId, NodeStatus> status_;
};

/// Leftmost node of depth j whose whole root path is alive.
inline std::optional<NodeId> leftmost_alive(int depth_j, const LivenessMap& live) {
    // Map order is lexicographic on paths, so the first match at depth j is leftmost.
    for (const auto& [node, status] : live.entries()) {
        if (node.depth() == depth_j && status == NodeStatus::alive && live.alive_path(node)) return node;
    }
    return std::nullopt;
}

/// Nodes whose challenges are known to the agent answering at v: everything at
/// least `acc_delay` levels above v, plus same-colour nodes strictly above v.
/// The committed bit is always known and not listed.
inline std::set<NodeId> accessible_set(const NodeId& v, const Coloring& coloring, int acc_delay = 2) {
    if (acc_delay < 2) throw std::domain_error("acc_delay below 2 would expose the parent challenge");
    const TreeShape& shape = coloring.shape();
    if (!shape.contains(v)) throw std::domain_error("node '" + v.str() + "' is not in the tree");
    const int cv = coloring.color(v);
    std::set<NodeId> acc;
    for (int j = 0; j < v.depth(); ++j) {
        for (const NodeId& w : shape.level(j)) {
            if (j <= v.depth() - acc_delay || coloring.color(w) == cv) acc.insert(w);
        }
    }
    return acc;
}

}  // namespace rbc

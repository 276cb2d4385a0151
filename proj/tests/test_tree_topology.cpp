#include "rbc/tree_topology.hpp"

#include <gtest/gtest.h>

#include <vector>

using namespace rbc;

namespace {

NodeId id(const char* s, int arity = 2) { return NodeId::parse(s, arity); }

std::set<NodeId> ids(std::initializer_list<const char*> names) {
    std::set<NodeId> out;
    for (const char* n : names) out.insert(id(n));
    return out;
}

}  // namespace

TEST(NodeId, ParseAndPrint) {
    EXPECT_TRUE(id("").is_root());
    EXPECT_EQ(id("lr").str(), "lr");
    EXPECT_EQ(id("lr").depth(), 2);
    EXPECT_EQ(id("021", 3).str(), "021");
    EXPECT_THROW(id("lx"), std::domain_error);
    EXPECT_THROW(id("3", 3), std::domain_error);
    EXPECT_LT(id("l"), id("lr"));
    EXPECT_LT(id("lr"), id("r"));
}

TEST(NodeNav, SpecExamples) {
    TreeShape s(3, 2);
    EXPECT_EQ(node_nav(s, id("lr"), NavRel::parent), id("l"));
    EXPECT_EQ(node_nav(s, id("lr"), NavRel::brother), id("ll"));
    EXPECT_EQ(node_nav(s, id(""), NavRel::child, 1), id("r"));
    EXPECT_THROW(node_nav(s, id(""), NavRel::parent), std::domain_error);
    EXPECT_THROW(node_nav(s, id(""), NavRel::brother), std::domain_error);
    EXPECT_THROW(node_nav(s, id("lll"), NavRel::child, 0), std::domain_error);
    EXPECT_THROW(node_nav(s, id("llll"), NavRel::parent), std::domain_error);
}

TEST(TreeShape, CountsAndIndexing) {
    TreeShape s(4, 2);
    EXPECT_EQ(s.internal_count(), 15U);
    EXPECT_EQ(s.node_count(), 31U);
    for (std::uint64_t i = 0; i < s.node_count(); ++i) EXPECT_EQ(s.index_of(s.at_index(i)), i);
    TreeShape t(3, 3);
    EXPECT_EQ(t.internal_count(), 13U);
    EXPECT_EQ(t.level(2).size(), 9U);
    EXPECT_EQ(t.level(2).front(), id("00", 3));
    EXPECT_EQ(t.level(2).back(), id("22", 3));
}

TEST(Coloring, CanonicalSpecExamples) {
    const Coloring c1 = Coloring::canonical(TreeShape(1, 2));
    EXPECT_EQ(c1.color(id("")), 1);
    EXPECT_EQ(c1.color(id("l")), 2);
    EXPECT_EQ(c1.color(id("r")), 3);
    const Coloring c2 = Coloring::canonical(TreeShape(2, 2));
    EXPECT_EQ(c2.color(id("ll")), 1);
    EXPECT_EQ(c2.color(id("lr")), 3);
    EXPECT_EQ(c2.color(id("rl")), 1);
    EXPECT_EQ(c2.color(id("rr")), 2);
}

TEST(Coloring, CanonicalValidUpToDepth12) {
    for (int k = 1; k <= 12; ++k) EXPECT_TRUE(Coloring::canonical(TreeShape(k, 2)).valid()) << k;
    for (int a = 3; a <= 5; ++a) EXPECT_TRUE(Coloring::canonical(TreeShape(4, a)).valid()) << a;
}

TEST(Coloring, ValidatorRejectsRepeatedChildColour) {
    TreeShape s(2, 2);
    const Coloring canon = Coloring::canonical(s);
    std::map<NodeId, int> colors;
    for (std::uint64_t i = 0; i < s.node_count(); ++i) colors[s.at_index(i)] = canon.color(s.at_index(i));
    EXPECT_NO_THROW(Coloring::from_assignment(s, colors));
    colors[id("ll")] = colors[id("l")];
    EXPECT_THROW(Coloring::from_assignment(s, colors), std::invalid_argument);

    // A relabelled, non-canonical but valid colouring is accepted.
    std::map<NodeId, int> swapped;
    for (auto [v, c] : colors) swapped[v] = c;
    swapped[id("ll")] = 3;
    swapped[id("lr")] = 1;
    EXPECT_TRUE(Coloring::from_assignment(s, swapped).valid());
}

TEST(LeftmostAlive, SpecExamples) {
    TreeShape s(3, 2);
    LivenessMap all(2);
    for (std::uint64_t i = 0; i < s.node_count(); ++i) all.set(s.at_index(i), NodeStatus::alive);
    EXPECT_EQ(leftmost_alive(3, all), id("lll"));

    LivenessMap live(2);
    live.set(id(""), NodeStatus::alive);
    live.set(id("l"), NodeStatus::dead);
    live.set(id("r"), NodeStatus::alive);
    live.set(id("rl"), NodeStatus::dead);
    live.set(id("rr"), NodeStatus::alive);
    EXPECT_EQ(leftmost_alive(2, live), id("rr"));
    EXPECT_EQ(leftmost_alive(1, live), id("r"));

    LivenessMap dead_root(2);
    dead_root.set(id(""), NodeStatus::dead);
    dead_root.set(id("l"), NodeStatus::alive);
    EXPECT_FALSE(leftmost_alive(0, dead_root).has_value());
    EXPECT_FALSE(leftmost_alive(1, dead_root).has_value());
}

TEST(LeftmostAlive, StableUnderDeeperExtensions) {
    LivenessMap live(2);
    live.set(id(""), NodeStatus::alive);
    live.set(id("l"), NodeStatus::dead);
    live.set(id("r"), NodeStatus::alive);
    const auto v = leftmost_alive(1, live);
    live.set(id("rl"), NodeStatus::dead);
    live.set(id("rr"), NodeStatus::alive);
    live.set(id("lr"), NodeStatus::alive);  // under a dead node: still not on an alive path
    EXPECT_EQ(leftmost_alive(1, live), v);
    EXPECT_EQ(leftmost_alive(2, live), id("rr"));
}

TEST(AccessibleSet, SpecExamples) {
    const Coloring c = Coloring::canonical(TreeShape(3, 2));
    EXPECT_TRUE(accessible_set(id("l"), c).empty());
    EXPECT_TRUE(accessible_set(id(""), c).empty());
    ASSERT_EQ(c.color(id("lr")), 3);
    EXPECT_EQ(accessible_set(id("lr"), c), ids({"", "r"}));
    // depth 3: everything at depth <= 1, plus same-colour depth-2 nodes.
    ASSERT_EQ(c.color(id("lll")), 2);
    EXPECT_EQ(accessible_set(id("lll"), c), ids({"", "l", "r", "rr"}));
}

TEST(AccessibleSet, ExcludesParentAndBrotherEverywhere) {
    for (int a = 2; a <= 3; ++a) {
        TreeShape s(4, a);
        const Coloring c = Coloring::canonical(s);
        for (std::uint64_t i = 1; i < s.node_count(); ++i) {
            const NodeId v = s.at_index(i);
            const auto acc = accessible_set(v, c);
            const NodeId parent = v.prefix(v.depth() - 1);
            EXPECT_FALSE(acc.count(parent)) << v.str();
            for (int t = 0; t < a; ++t) EXPECT_FALSE(acc.count(parent.child_unchecked(static_cast<std::uint8_t>(t))));
            for (const auto& w : acc) {
                EXPECT_LT(w.depth(), v.depth());
                if (w.depth() > v.depth() - 2) EXPECT_EQ(c.color(w), c.color(v));
            }
        }
    }
}

TEST(AccessibleSet, MonotoneAlongColourClass) {
    TreeShape s(5, 2);
    const Coloring c = Coloring::canonical(s);
    // Along the left spine, a deeper node of the same colour sees a superset.
    const NodeId a = id("l"), b = id("lll"), d = id("lllll");
    ASSERT_EQ(c.color(a), c.color(b));
    ASSERT_EQ(c.color(b), c.color(d));
    const auto sa = accessible_set(a, c), sb = accessible_set(b, c), sd = accessible_set(d, c);
    EXPECT_TRUE(std::includes(sb.begin(), sb.end(), sa.begin(), sa.end()));
    EXPECT_TRUE(std::includes(sd.begin(), sd.end(), sb.begin(), sb.end()));
    EXPECT_THROW(accessible_set(a, c, 1), std::domain_error);
}

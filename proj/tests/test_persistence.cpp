#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "rpnet/errors.hpp"
#include "rpnet/graph.hpp"
#include "rpnet/persistence.hpp"
#include "rpnet/rng.hpp"
#include "test_util.hpp"

using namespace rpnet;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

PersistencePoint pt(double birth, double death, int dim, bool essential) {
    return PersistencePoint{birth, death, dim, essential};
}

PersistenceDiagram diagram_of(std::vector<PersistencePoint> points) {
    PersistenceDiagram d;
    d.points = std::move(points);
    return d;
}

}  // namespace

TEST_CASE("filtration order sorts vertices by value then index") {
    Graph p3(3, {{0, 1}, {1, 2}});
    std::vector<double> values = {1.0, 2.0, 1.0};  // the path's degrees
    FiltrationOrder f = build_filtration(p3, values);

    CHECK(f.vertex_order == std::vector<int>{0, 2, 1});
    CHECK(f.vertex_value == values);
    // Both edges touch the degree-2 middle vertex.
    CHECK(f.edge_value == std::vector<double>{2.0, 2.0});
}

TEST_CASE("filtration edge values are endpoint maxima") {
    Graph g(4, {{0, 1}, {0, 3}, {2, 3}});
    std::vector<double> values = {4.0, 1.0, 3.0, 2.0};
    FiltrationOrder f = build_filtration(g, values);

    CHECK(f.vertex_order == std::vector<int>{1, 3, 2, 0});
    // edges() is sorted: (0,1), (0,3), (2,3)
    CHECK(f.edge_value == std::vector<double>{4.0, 4.0, 3.0});
}

TEST_CASE("filtration input validation") {
    Graph g(2, {{0, 1}});
    CHECK_THROWS_AS(build_filtration(g, {1.0}), ArgumentError);
    CHECK_THROWS_AS(build_filtration(g, {1.0, 2.0, 3.0}), ArgumentError);
    CHECK_THROWS_AS(build_filtration(g, {1.0, std::nan("")}), ArgumentError);
    CHECK_THROWS_AS(build_filtration(g, {kInf, 0.0}), ArgumentError);
    CHECK_THROWS_AS(compute_diagram(g, {1.0}), ArgumentError);
}

TEST_CASE("path graph under its degrees") {
    Graph p3(3, {{0, 1}, {1, 2}});
    PersistenceDiagram d = compute_diagram(p3, {1.0, 2.0, 1.0});

    PersistenceDiagram expected = diagram_of({
        pt(1.0, kInf, 0, true),
        pt(1.0, 2.0, 0, false),
    });
    CHECK(same_multiset(d, expected));
    CHECK(d.count_dim0_essential() == 1);
    CHECK(d.count_dim0_nonessential() == 1);
    CHECK(d.count_dim1() == 0);
}

TEST_CASE("four-cycle under its degrees") {
    Graph c4(4, {{0, 1}, {1, 2}, {2, 3}, {0, 3}});
    PersistenceDiagram d = compute_diagram(c4, {2.0, 2.0, 2.0, 2.0});

    PersistenceDiagram expected = diagram_of({
        pt(2.0, kInf, 0, true),
        pt(2.0, kInf, 1, true),
    });
    CHECK(same_multiset(d, expected));
}

TEST_CASE("single vertex") {
    Graph g(1, {});
    PersistenceDiagram d = compute_diagram(g, {5.0});
    CHECK(same_multiset(d, diagram_of({pt(5.0, kInf, 0, true)})));
}

TEST_CASE("zero-persistence merges are dropped") {
    // Both endpoints and the edge enter at 3, so the merge has no lifetime.
    Graph g(2, {{0, 1}});
    PersistenceDiagram d = compute_diagram(g, {3.0, 3.0});
    CHECK(same_multiset(d, diagram_of({pt(3.0, kInf, 0, true)})));
}

TEST_CASE("trees have no one-dimensional points") {
    Graph tree(6, {{0, 1}, {0, 2}, {1, 3}, {1, 4}, {2, 5}});
    Rng rng(91);
    for (int trial = 0; trial < 10; ++trial) {
        auto values = testutil::random_values(rng, 6);
        CHECK(compute_diagram(tree, values).count_dim1() == 0);
    }
}

TEST_CASE("one-dimensional points carry the cycle count") {
    // Two triangles sharing a vertex plus an isolated vertex: m=6, n=6, c=2.
    Graph g(6, {{0, 1}, {0, 2}, {1, 2}, {2, 3}, {2, 4}, {3, 4}});
    PersistenceDiagram d = compute_diagram(g, {1.0, 1.0, 2.0, 1.0, 3.0, 0.0});
    CHECK(d.count_dim1() == cycle_rank(g));
    CHECK(d.count_dim0_essential() == connected_components(g));
    for (const auto& p : d.points)
        if (p.dim == 1) {
            CHECK(p.essential);
            CHECK(p.death == kInf);
        }
}

TEST_CASE("elder-rule ties agree with the threshold-rescan oracle") {
    // All vertices born together, merged in several orders.
    Graph g(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {0, 4}});
    std::vector<double> flat(5, 1.0);
    CHECK(same_multiset(compute_diagram(g, flat), compute_diagram_oracle(g, flat)));

    std::vector<double> tied = {2.0, 1.0, 2.0, 1.0, 2.0};
    CHECK(same_multiset(compute_diagram(g, tied), compute_diagram_oracle(g, tied)));
}

TEST_CASE("oracle refuses large graphs") {
    Graph big(65, {});
    CHECK_THROWS_AS(compute_diagram_oracle(big, std::vector<double>(65, 0.0)),
                    ArgumentError);
}

TEST_CASE("sweep matches the oracle on random tie-heavy graphs") {
    Rng rng(0xABCDEF);
    for (int trial = 0; trial < 120; ++trial) {
        Graph g = testutil::random_graph(rng, 12, 20);
        auto values = testutil::random_values(rng, g.num_vertices());
        PersistenceDiagram fast = compute_diagram(g, values);
        PersistenceDiagram slow = compute_diagram_oracle(g, values);
        REQUIRE(same_multiset(fast, slow));
    }
}

TEST_CASE("diagram counts match traversal-based homology counts") {
    Rng rng(0x5151);
    for (int trial = 0; trial < 80; ++trial) {
        Graph g = testutil::random_graph(rng, 16, 32);
        auto values = testutil::random_values(rng, g.num_vertices());
        PersistenceDiagram d = compute_diagram(g, values);
        CHECK(d.count_dim0_essential() == connected_components(g));
        CHECK(d.count_dim1() == cycle_rank(g));
    }
}

TEST_CASE("adding a constant shifts every finite coordinate") {
    Rng rng(0x777);
    for (int trial = 0; trial < 30; ++trial) {
        Graph g = testutil::random_graph(rng, 10, 16);
        auto values = testutil::random_values(rng, g.num_vertices());
        const double c = 3.25;
        auto shifted = values;
        for (auto& v : shifted) v += c;

        PersistenceDiagram base = compute_diagram(g, values);
        for (auto& p : base.points) {
            p.birth += c;
            if (std::isfinite(p.death)) p.death += c;
        }
        CHECK(same_multiset(base, compute_diagram(g, shifted)));
    }
}

TEST_CASE("diagrams are invariant under vertex relabeling") {
    Rng rng(0x888);
    for (int trial = 0; trial < 30; ++trial) {
        Graph g = testutil::random_graph(rng, 10, 16);
        int n = g.num_vertices();
        auto values = testutil::random_values(rng, n);

        std::vector<int> perm(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) perm[static_cast<size_t>(i)] = i;
        rng.shuffle(perm);

        std::vector<std::pair<int, int>> edges;
        for (auto [u, v] : g.edges())
            edges.emplace_back(perm[static_cast<size_t>(u)], perm[static_cast<size_t>(v)]);
        std::vector<double> pvalues(static_cast<size_t>(n));
        for (int v = 0; v < n; ++v)
            pvalues[static_cast<size_t>(perm[static_cast<size_t>(v)])] =
                values[static_cast<size_t>(v)];

        CHECK(same_multiset(compute_diagram(g, values),
                            compute_diagram(Graph(n, std::move(edges)), pvalues)));
    }
}

TEST_CASE("non-essential deaths are edge entry values") {
    Rng rng(0x999);
    for (int trial = 0; trial < 30; ++trial) {
        Graph g = testutil::random_graph(rng, 12, 20);
        auto values = testutil::random_values(rng, g.num_vertices());
        FiltrationOrder f = build_filtration(g, values);
        PersistenceDiagram d = compute_diagram(g, values);
        for (const auto& p : d.points) {
            if (p.essential) continue;
            CHECK(std::count(f.edge_value.begin(), f.edge_value.end(), p.death) > 0);
        }
    }
}

TEST_CASE("multiset equality ignores order but not multiplicity") {
    PersistenceDiagram a = diagram_of({pt(1, 2, 0, false), pt(0, kInf, 0, true)});
    PersistenceDiagram b = diagram_of({pt(0, kInf, 0, true), pt(1, 2, 0, false)});
    CHECK(same_multiset(a, b));

    PersistenceDiagram c = diagram_of(
        {pt(1, 2, 0, false), pt(1, 2, 0, false), pt(0, kInf, 0, true)});
    CHECK_FALSE(same_multiset(a, c));
    CHECK_FALSE(same_multiset(c, a));
}

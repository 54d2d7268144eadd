#include "rpnet/persistence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <string>

#include "rpnet/errors.hpp"

namespace rpnet {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_values(const Graph& g, const std::vector<double>& values) {
    if (values.size() != static_cast<size_t>(g.num_vertices()))
        throw ArgumentError("descriptor length " + std::to_string(values.size()) +
                            " does not match vertex count " +
                            std::to_string(g.num_vertices()));
    for (double v : values)
        if (!std::isfinite(v)) throw ArgumentError("non-finite descriptor value");
}

}  // namespace

int PersistenceDiagram::count_dim0_essential() const {
    int c = 0;
    for (const auto& p : points) c += (p.dim == 0 && p.essential);
    return c;
}

int PersistenceDiagram::count_dim0_nonessential() const {
    int c = 0;
    for (const auto& p : points) c += (p.dim == 0 && !p.essential);
    return c;
}

int PersistenceDiagram::count_dim1() const {
    int c = 0;
    for (const auto& p : points) c += (p.dim == 1);
    return c;
}

FiltrationOrder build_filtration(const Graph& g, const std::vector<double>& values) {
    check_values(g, values);
    FiltrationOrder f;
    f.vertex_value = values;
    f.vertex_order.resize(static_cast<size_t>(g.num_vertices()));
    for (int v = 0; v < g.num_vertices(); ++v) f.vertex_order[static_cast<size_t>(v)] = v;
    std::sort(f.vertex_order.begin(), f.vertex_order.end(), [&](int a, int b) {
        double va = values[static_cast<size_t>(a)], vb = values[static_cast<size_t>(b)];
        return va != vb ? va < vb : a < b;
    });
    f.edge_value.reserve(g.edges().size());
    for (const auto& [u, v] : g.edges())
        f.edge_value.push_back(
            std::max(values[static_cast<size_t>(u)], values[static_cast<size_t>(v)]));
    return f;
}

PersistenceDiagram compute_diagram(const Graph& g, const std::vector<double>& values) {
    const FiltrationOrder filt = build_filtration(g, values);
    const int n = g.num_vertices();

    // Events: vertices before edges at equal value; edges tie-break in
    // ascending (u, v) order, which Graph's sorted edge list already gives.
    struct Event {
        double value;
        int dim;    // 0 = vertex, 1 = edge
        int index;  // vertex id or edge index
    };
    std::vector<Event> events;
    events.reserve(static_cast<size_t>(n) + g.edges().size());
    for (int v = 0; v < n; ++v)
        events.push_back({values[static_cast<size_t>(v)], 0, v});
    for (size_t e = 0; e < g.edges().size(); ++e)
        events.push_back({filt.edge_value[e], 1, static_cast<int>(e)});
    std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
        if (a.value != b.value) return a.value < b.value;
        if (a.dim != b.dim) return a.dim < b.dim;
        return a.index < b.index;
    });

    // Union-find with path compression; the merge direction is driven by the
    // elder rule, so the root always carries its component's (birth, root id).
    std::vector<int> parent(static_cast<size_t>(n), -1);
    std::vector<double> birth(static_cast<size_t>(n), 0.0);
    auto find = [&](int x) {
        int root = x;
        while (parent[static_cast<size_t>(root)] != root)
            root = parent[static_cast<size_t>(root)];
        while (parent[static_cast<size_t>(x)] != root) {
            int next = parent[static_cast<size_t>(x)];
            parent[static_cast<size_t>(x)] = root;
            x = next;
        }
        return root;
    };

    PersistenceDiagram d;
    for (const Event& ev : events) {
        if (ev.dim == 0) {
            parent[static_cast<size_t>(ev.index)] = ev.index;
            birth[static_cast<size_t>(ev.index)] = ev.value;
            continue;
        }
        const auto& [u, v] = g.edges()[static_cast<size_t>(ev.index)];
        int ru = find(u), rv = find(v);
        if (ru == rv) {
            d.points.push_back({ev.value, kInf, 1, true});
            continue;
        }
        // Elder rule: smaller birth survives; tie -> smaller root index.
        int survivor = ru, dying = rv;
        if (birth[static_cast<size_t>(rv)] < birth[static_cast<size_t>(ru)] ||
            (birth[static_cast<size_t>(rv)] == birth[static_cast<size_t>(ru)] && rv < ru)) {
            survivor = rv;
            dying = ru;
        }
        if (birth[static_cast<size_t>(dying)] != ev.value)
            d.points.push_back({birth[static_cast<size_t>(dying)], ev.value, 0, false});
        parent[static_cast<size_t>(dying)] = survivor;
    }
    for (int v = 0; v < n; ++v)
        if (find(v) == v) d.points.push_back({birth[static_cast<size_t>(v)], kInf, 0, true});
    return d;
}

PersistenceDiagram compute_diagram_oracle(const Graph& g,
                                          const std::vector<double>& values) {
    check_values(g, values);
    const int n = g.num_vertices();
    if (n > 64) throw ArgumentError("oracle is limited to graphs with n <= 64");

    std::vector<double> thresholds(values);
    std::sort(thresholds.begin(), thresholds.end());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

    auto adj = g.adjacency();

    PersistenceDiagram d;
    // Component records carried across thresholds: vertex -> component id,
    // component id -> (birth, root vertex).
    std::vector<int> comp_of(static_cast<size_t>(n), -1);
    std::map<int, std::pair<double, int>> comp_info;
    int next_comp = 0;
    int prev_cycle_rank = 0;

    for (double alpha : thresholds) {
        // Fresh traversal of the sublevel graph G_alpha.
        std::vector<char> present(static_cast<size_t>(n), 0);
        for (int v = 0; v < n; ++v)
            present[static_cast<size_t>(v)] = values[static_cast<size_t>(v)] <= alpha;

        std::vector<int> label(static_cast<size_t>(n), -1);
        std::vector<std::vector<int>> members;
        int num_edges = 0, num_vertices = 0;
        for (int s = 0; s < n; ++s) {
            if (!present[static_cast<size_t>(s)]) continue;
            ++num_vertices;
            if (label[static_cast<size_t>(s)] != -1) continue;
            int id = static_cast<int>(members.size());
            members.emplace_back();
            std::vector<int> stack{s};
            label[static_cast<size_t>(s)] = id;
            while (!stack.empty()) {
                int u = stack.back();
                stack.pop_back();
                members[static_cast<size_t>(id)].push_back(u);
                for (int w : adj[static_cast<size_t>(u)]) {
                    if (!present[static_cast<size_t>(w)]) continue;
                    if (label[static_cast<size_t>(w)] == -1) {
                        label[static_cast<size_t>(w)] = id;
                        stack.push_back(w);
                    }
                }
            }
        }
        for (const auto& [u, v] : g.edges())
            if (present[static_cast<size_t>(u)] && present[static_cast<size_t>(v)])
                ++num_edges;

        // Dim-1 births: increase of the cycle rank m - n + c.
        int rank = num_edges - num_vertices + static_cast<int>(members.size());
        for (int i = prev_cycle_rank; i < rank; ++i)
            d.points.push_back({alpha, kInf, 1, true});
        prev_cycle_rank = rank;

        // Match components against the previous threshold by inclusion: the
        // (birth, root)-lexicographic minimum survives, the rest die here.
        std::vector<int> new_comp_of(static_cast<size_t>(n), -1);
        std::map<int, std::pair<double, int>> new_info;
        for (const auto& comp : members) {
            std::set<int> previous;
            for (int v : comp)
                if (comp_of[static_cast<size_t>(v)] != -1)
                    previous.insert(comp_of[static_cast<size_t>(v)]);
            std::pair<double, int> identity;
            if (previous.empty()) {
                identity = {alpha, *std::min_element(comp.begin(), comp.end())};
            } else {
                identity = {kInf, -1};
                for (int pc : previous)
                    identity = std::min(identity, comp_info.at(pc));
                for (int pc : previous) {
                    const auto& info = comp_info.at(pc);
                    if (info == identity) continue;
                    if (info.first != alpha)
                        d.points.push_back({info.first, alpha, 0, false});
                }
            }
            int id = next_comp++;
            new_info[id] = identity;
            for (int v : comp) new_comp_of[static_cast<size_t>(v)] = id;
        }
        comp_of = std::move(new_comp_of);
        comp_info = std::move(new_info);
    }

    for (const auto& [id, info] : comp_info)
        d.points.push_back({info.first, kInf, 0, true});
    return d;
}

bool same_multiset(const PersistenceDiagram& a, const PersistenceDiagram& b) {
    auto key = [](const PersistencePoint& p) {
        return std::make_tuple(p.dim, p.essential, p.birth, p.death);
    };
    auto sa = a.points, sb = b.points;
    auto less = [&](const PersistencePoint& x, const PersistencePoint& y) {
        return key(x) < key(y);
    };
    std::sort(sa.begin(), sa.end(), less);
    std::sort(sb.begin(), sb.end(), less);
    if (sa.size() != sb.size()) return false;
    for (size_t i = 0; i < sa.size(); ++i)
        if (key(sa[i]) != key(sb[i])) return false;
    return true;
}

}  // namespace rpnet

#include "rpnet/graph_io.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "rpnet/errors.hpp"
#include "rpnet/rng.hpp"

namespace rpnet {

namespace {

std::ifstream open_or_throw(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in.is_open()) throw IngestionError("missing input file: " + path.string());
    return in;
}

bool parse_int_line(const std::string& line, long& out) {
    std::istringstream ss(line);
    if (!(ss >> out)) return false;
    char c;
    while (ss >> c)
        if (!std::isspace(static_cast<unsigned char>(c))) return false;
    return true;
}

}  // namespace

std::string LoadSummary::to_text() const {
    std::ostringstream os;
    os << "dataset: " << dataset << "\n"
       << "graphs: " << graphs << "\n"
       << "classes: " << classes << "\n"
       << "nodes: " << nodes << "\n"
       << "edges: " << edges << "\n"
       << "dropped_self_loops: " << dropped_self_loops << "\n"
       << "dropped_duplicates: " << dropped_duplicates << "\n";
    return os.str();
}

LabeledDataset parse_tu_dataset(const std::string& directory, const std::string& name,
                                LoadSummary* summary) {
    namespace fs = std::filesystem;
    const fs::path dir(directory);
    const fs::path a_path = dir / (name + "_A.txt");
    const fs::path ind_path = dir / (name + "_graph_indicator.txt");
    const fs::path lab_path = dir / (name + "_graph_labels.txt");

    // Graph labels: one raw label per graph line.
    std::vector<long> raw_labels;
    {
        auto in = open_or_throw(lab_path);
        std::string line;
        long lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            long value;
            if (!parse_int_line(line, value))
                throw FormatError(lab_path.string() + ":" + std::to_string(lineno) +
                                  ": expected an integer label");
            raw_labels.push_back(value);
        }
    }
    const long num_graphs = static_cast<long>(raw_labels.size());
    if (num_graphs == 0) throw FormatError(lab_path.string() + ": no graph labels");

    // Graph indicator: 1-indexed graph id per node line.
    std::vector<long> node_graph;  // node (0-based) -> graph id (1-based)
    {
        auto in = open_or_throw(ind_path);
        std::string line;
        long lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            long gid;
            if (!parse_int_line(line, gid) || gid < 1 || gid > num_graphs)
                throw FormatError(ind_path.string() + ":" + std::to_string(lineno) +
                                  ": bad graph id");
            node_graph.push_back(gid);
        }
    }
    const long num_nodes = static_cast<long>(node_graph.size());

    // Local vertex index per node, assigned in ascending global node id order.
    std::vector<long> graph_size(static_cast<size_t>(num_graphs), 0);
    std::vector<int> local_index(static_cast<size_t>(num_nodes), 0);
    for (long node = 0; node < num_nodes; ++node) {
        long gid = node_graph[static_cast<size_t>(node)];
        local_index[static_cast<size_t>(node)] =
            static_cast<int>(graph_size[static_cast<size_t>(gid - 1)]++);
    }
    for (long g = 0; g < num_graphs; ++g)
        if (graph_size[static_cast<size_t>(g)] == 0)
            throw FormatError(ind_path.string() + ": graph " + std::to_string(g + 1) +
                              " has zero nodes");

    // Edge rows: "u, v" with 1-indexed global node ids, both directions listed.
    std::vector<std::map<std::pair<int, int>, int>> pair_count(
        static_cast<size_t>(num_graphs));
    long dropped_self_loops = 0;
    {
        auto in = open_or_throw(a_path);
        std::string line;
        long lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            std::replace(line.begin(), line.end(), ',', ' ');
            std::istringstream ss(line);
            long u, v;
            if (!(ss >> u >> v))
                throw FormatError(a_path.string() + ":" + std::to_string(lineno) +
                                  ": expected an edge row 'u, v'");
            if (u < 1 || u > num_nodes || v < 1 || v > num_nodes)
                throw FormatError(a_path.string() + ":" + std::to_string(lineno) +
                                  ": node id out of range");
            long gu = node_graph[static_cast<size_t>(u - 1)];
            long gv = node_graph[static_cast<size_t>(v - 1)];
            if (gu != gv)
                throw FormatError(a_path.string() + ":" + std::to_string(lineno) +
                                  ": edge endpoints belong to different graphs");
            if (u == v) {
                ++dropped_self_loops;
                continue;
            }
            int lu = local_index[static_cast<size_t>(u - 1)];
            int lv = local_index[static_cast<size_t>(v - 1)];
            if (lu > lv) std::swap(lu, lv);
            ++pair_count[static_cast<size_t>(gu - 1)][{lu, lv}];
        }
    }

    // The format lists each undirected edge twice; anything beyond that is a
    // duplicate.
    long dropped_duplicates = 0;
    long total_edges = 0;
    std::vector<Graph> graphs;
    graphs.reserve(static_cast<size_t>(num_graphs));
    for (long g = 0; g < num_graphs; ++g) {
        std::vector<std::pair<int, int>> edges;
        edges.reserve(pair_count[static_cast<size_t>(g)].size());
        for (const auto& [pair, count] : pair_count[static_cast<size_t>(g)]) {
            if (count > 2) dropped_duplicates += count - 2;
            edges.push_back(pair);
        }
        total_edges += static_cast<long>(edges.size());
        graphs.emplace_back(static_cast<int>(graph_size[static_cast<size_t>(g)]),
                            std::move(edges));
    }

    // Remap raw labels to contiguous class indices in sorted order.
    std::vector<long> distinct(raw_labels);
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() < 2)
        throw FormatError(lab_path.string() + ": fewer than 2 distinct classes");
    std::map<long, int> class_of;
    for (size_t i = 0; i < distinct.size(); ++i)
        class_of[distinct[i]] = static_cast<int>(i);
    std::vector<int> labels;
    labels.reserve(raw_labels.size());
    for (long raw : raw_labels) labels.push_back(class_of[raw]);

    if (summary) {
        summary->dataset = name;
        summary->graphs = static_cast<int>(num_graphs);
        summary->classes = static_cast<int>(distinct.size());
        summary->nodes = num_nodes;
        summary->edges = total_edges;
        summary->dropped_self_loops = dropped_self_loops;
        summary->dropped_duplicates = dropped_duplicates;
    }
    return make_dataset(std::move(graphs), std::move(labels),
                        static_cast<int>(distinct.size()),
                        /*require_two_classes=*/true);
}

void write_tu_dataset(const LabeledDataset& ds, const std::string& directory,
                      const std::string& name) {
    namespace fs = std::filesystem;
    fs::create_directories(directory);
    const fs::path dir(directory);
    std::ofstream a(dir / (name + "_A.txt"));
    std::ofstream ind(dir / (name + "_graph_indicator.txt"));
    std::ofstream lab(dir / (name + "_graph_labels.txt"));
    if (!a || !ind || !lab)
        throw IngestionError("cannot create dataset files under " + directory);

    long base = 0;  // global node id offset, 1-indexed in the files
    for (size_t g = 0; g < ds.graphs.size(); ++g) {
        const Graph& graph = ds.graphs[g];
        for (int v = 0; v < graph.num_vertices(); ++v) ind << (g + 1) << "\n";
        for (const auto& [u, v] : graph.edges()) {
            a << (base + u + 1) << ", " << (base + v + 1) << "\n";
            a << (base + v + 1) << ", " << (base + u + 1) << "\n";
        }
        lab << ds.labels[g] << "\n";
        base += graph.num_vertices();
    }
}

namespace {

Graph make_cycle(int n) {
    std::vector<std::pair<int, int>> edges;
    edges.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) edges.emplace_back(i, (i + 1) % n);
    return Graph(n, std::move(edges));
}

Graph make_path(int n) {
    std::vector<std::pair<int, int>> edges;
    edges.reserve(static_cast<size_t>(n - 1));
    for (int i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
    return Graph(n, std::move(edges));
}

Graph make_er(int n, double p, Rng& rng) {
    std::vector<std::pair<int, int>> edges;
    for (int u = 0; u < n; ++u)
        for (int v = u + 1; v < n; ++v)
            if (rng.bernoulli(p)) edges.emplace_back(u, v);
    return Graph(n, std::move(edges));
}

}  // namespace

LabeledDataset generate_synthetic(SyntheticKind kind, int count_per_class,
                                  std::pair<int, int> size_range, uint64_t seed) {
    if (count_per_class < 1) throw ArgumentError("count_per_class must be >= 1");
    if (size_range.first < 3 || size_range.first > size_range.second)
        throw ArgumentError("invalid size range [" + std::to_string(size_range.first) +
                            ", " + std::to_string(size_range.second) + "]");
    Rng rng(seed);
    std::vector<Graph> graphs;
    std::vector<int> labels;
    graphs.reserve(static_cast<size_t>(2 * count_per_class));
    for (int cls = 0; cls < 2; ++cls) {
        for (int i = 0; i < count_per_class; ++i) {
            int n = static_cast<int>(rng.uniform_int(size_range.first, size_range.second));
            switch (kind) {
                case SyntheticKind::cycles_vs_paths:
                    graphs.push_back(cls == 0 ? make_cycle(n) : make_path(n));
                    break;
                case SyntheticKind::density_pair:
                    graphs.push_back(make_er(n, cls == 0 ? 0.15 : 0.35, rng));
                    break;
            }
            labels.push_back(cls);
        }
    }
    return make_dataset(std::move(graphs), std::move(labels), 2,
                        /*require_two_classes=*/true);
}

}  // namespace rpnet

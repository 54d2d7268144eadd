#pragma once

#include <cstdint>
#include <string>
#include <utility>

#include "rpnet/graph.hpp"

namespace rpnet {

// Counters from one TU-format ingestion, printable as a structured summary.
struct LoadSummary {
    std::string dataset;
    int graphs = 0;
    int classes = 0;
    long nodes = 0;
    long edges = 0;
    long dropped_self_loops = 0;
    long dropped_duplicates = 0;

    std::string to_text() const;
};

// Parses the TU Dortmund benchmark format from <dir>/<name>_A.txt,
// <name>_graph_indicator.txt and <name>_graph_labels.txt. Node and edge
// attribute files are ignored. Raw labels are remapped to 0..C-1 in sorted
// order. Self-loop rows and pairs listed more than twice are dropped and
// counted in the summary.
LabeledDataset parse_tu_dataset(const std::string& directory, const std::string& name,
                                LoadSummary* summary = nullptr);

// Writes a dataset back in TU format (each edge listed in both directions).
void write_tu_dataset(const LabeledDataset& ds, const std::string& directory,
                      const std::string& name);

enum class SyntheticKind { cycles_vs_paths, density_pair };

// cycles_vs_paths: class 0 = simple cycles, class 1 = simple paths.
// density_pair: Erdos-Renyi families with edge probabilities 0.15 / 0.35.
// Sizes are uniform in [size_range.first, size_range.second]. Deterministic
// for a fixed seed.
LabeledDataset generate_synthetic(SyntheticKind kind, int count_per_class,
                                  std::pair<int, int> size_range, uint64_t seed);

}  // namespace rpnet

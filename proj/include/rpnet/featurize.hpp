#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "rpnet/graph.hpp"
#include "rpnet/persistence.hpp"

namespace rpnet {

// One diagram point after [0,1] normalization, tagged by its group:
// 0 = dim-0 essential, 1 = dim-0 non-essential, 2 = dim-1 essential.
struct TaggedPoint {
    double birth_n = 0.0;
    double death_n = 0.0;
    int group = 0;

    std::array<double, 3> onehot() const {
        std::array<double, 3> oh{0.0, 0.0, 0.0};
        oh[static_cast<size_t>(group)] = 1.0;
        return oh;
    }
    bool operator==(const TaggedPoint&) const = default;
};

// Divides all finite coordinates by the diagram's maximum finite coordinate
// (fallback 1 when none exists or the maximum is 0); +inf deaths map to 1.
std::vector<TaggedPoint> normalize_diagram(const PersistenceDiagram& d);

// Per-graph K x L x 5 tensor (birth, death, 3-d one-hot) with a validity
// mask; padded slots are all-zero and mask-false.
struct FeatureTensor {
    int K = 0;
    int L = 0;
    std::vector<double> data;   // K*L*5 row-major
    std::vector<uint8_t> mask;  // K*L, 1 = real point
    int label = 0;

    double at(int k, int l, int c) const {
        return data[(static_cast<size_t>(k) * static_cast<size_t>(L) +
                     static_cast<size_t>(l)) * 5 + static_cast<size_t>(c)];
    }
    bool valid(int k, int l) const {
        return mask[static_cast<size_t>(k) * static_cast<size_t>(L) +
                    static_cast<size_t>(l)] != 0;
    }
    int valid_count(int k) const;
};

struct FeatureDataset {
    std::vector<FeatureTensor> tensors;
    int K = 0;
    int L = 0;
    int num_classes = 0;
};

enum class SignatureMode { return_prob, degree };

// Runs the signature -> diagrams -> normalize -> pad pipeline over a whole
// dataset. L is the dataset-wide maximum per-diagram point count. Point order
// within a diagram slice is (group, birth, death) ascending. `jobs` > 1
// parallelizes per-graph extraction with a deterministic join.
FeatureDataset extract_features(const LabeledDataset& ds, int K, SignatureMode mode,
                                int jobs = 1);

// RPFEAT01 container, bit-exact round trip, CRC-checked.
void write_features(const FeatureDataset& fd, const std::string& path);
FeatureDataset read_features(const std::string& path);

bool operator==(const FeatureTensor& a, const FeatureTensor& b);
bool operator==(const FeatureDataset& a, const FeatureDataset& b);

}  // namespace rpnet

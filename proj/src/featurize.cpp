#include "rpnet/featurize.hpp"

#include <zlib.h>

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <thread>

#include "rpnet/errors.hpp"
#include "rpnet/signature.hpp"

static_assert(std::endian::native == std::endian::little,
              "feature files are little-endian; big-endian hosts need byte swaps");

namespace rpnet {

std::vector<TaggedPoint> normalize_diagram(const PersistenceDiagram& d) {
    double max_coord = 0.0;
    bool any_finite = false;
    for (const auto& p : d.points) {
        max_coord = std::max(max_coord, p.birth);
        any_finite = true;
        if (std::isfinite(p.death)) max_coord = std::max(max_coord, p.death);
    }
    const double divisor = (!any_finite || max_coord == 0.0) ? 1.0 : max_coord;

    std::vector<TaggedPoint> out;
    out.reserve(d.points.size());
    for (const auto& p : d.points) {
        TaggedPoint t;
        t.birth_n = p.birth / divisor;
        t.death_n = std::isfinite(p.death) ? p.death / divisor : 1.0;
        t.group = p.dim == 1 ? 2 : (p.essential ? 0 : 1);
        out.push_back(t);
    }
    return out;
}

int FeatureTensor::valid_count(int k) const {
    int c = 0;
    for (int l = 0; l < L; ++l) c += valid(k, l);
    return c;
}

namespace {

std::vector<std::vector<TaggedPoint>> diagrams_for_graph(const Graph& g, int K,
                                                         SignatureMode mode) {
    std::vector<std::vector<TaggedPoint>> per_scale;
    if (mode == SignatureMode::degree) {
        auto pts = normalize_diagram(compute_diagram(g, degree_signature(g)));
        per_scale.push_back(std::move(pts));
    } else {
        SignatureMatrix sig = return_probabilities_spectral(g, K);
        per_scale.reserve(static_cast<size_t>(K));
        for (int k = 0; k < K; ++k)
            per_scale.push_back(normalize_diagram(compute_diagram(g, sig.column(k))));
    }
    for (auto& pts : per_scale)
        std::sort(pts.begin(), pts.end(), [](const TaggedPoint& a, const TaggedPoint& b) {
            if (a.group != b.group) return a.group < b.group;
            if (a.birth_n != b.birth_n) return a.birth_n < b.birth_n;
            return a.death_n < b.death_n;
        });
    return per_scale;
}

}  // namespace

FeatureDataset extract_features(const LabeledDataset& ds, int K, SignatureMode mode,
                                int jobs) {
    if (ds.graphs.empty()) throw ArgumentError("cannot extract features of an empty dataset");
    if (K < 1) throw ArgumentError("number of scales K must be >= 1");
    const int eff_k = mode == SignatureMode::degree ? 1 : K;
    const size_t count = ds.graphs.size();

    std::vector<std::vector<std::vector<TaggedPoint>>> all(count);
    if (jobs <= 1) {
        for (size_t i = 0; i < count; ++i)
            all[i] = diagrams_for_graph(ds.graphs[i], K, mode);
    } else {
        std::vector<std::thread> workers;
        std::atomic<size_t> cursor{0};
        for (int t = 0; t < jobs; ++t)
            workers.emplace_back([&] {
                for (size_t i = cursor.fetch_add(1); i < count; i = cursor.fetch_add(1))
                    all[i] = diagrams_for_graph(ds.graphs[i], K, mode);
            });
        for (auto& w : workers) w.join();
    }

    size_t pad = 1;
    for (const auto& per_scale : all)
        for (const auto& pts : per_scale) pad = std::max(pad, pts.size());

    FeatureDataset fd;
    fd.K = eff_k;
    fd.L = static_cast<int>(pad);
    fd.num_classes = ds.num_classes;
    fd.tensors.reserve(count);
    for (size_t i = 0; i < count; ++i) {
        FeatureTensor t;
        t.K = eff_k;
        t.L = fd.L;
        t.label = ds.labels[i];
        t.data.assign(static_cast<size_t>(eff_k) * pad * 5, 0.0);
        t.mask.assign(static_cast<size_t>(eff_k) * pad, 0);
        for (int k = 0; k < eff_k; ++k) {
            const auto& pts = all[i][static_cast<size_t>(k)];
            for (size_t l = 0; l < pts.size(); ++l) {
                size_t slot = static_cast<size_t>(k) * pad + l;
                t.mask[slot] = 1;
                double* row = &t.data[slot * 5];
                row[0] = pts[l].birth_n;
                row[1] = pts[l].death_n;
                row[2 + static_cast<size_t>(pts[l].group)] = 1.0;
            }
        }
        fd.tensors.push_back(std::move(t));
    }
    return fd;
}

namespace {

constexpr char kFeatureMagic[8] = {'R', 'P', 'F', 'E', 'A', 'T', '0', '1'};
constexpr uint32_t kFeatureVersion = 1;

void put_u32(std::string& buf, uint32_t v) {
    buf.append(reinterpret_cast<const char*>(&v), 4);
}

void put_f64(std::string& buf, const double* v, size_t n) {
    buf.append(reinterpret_cast<const char*>(v), n * sizeof(double));
}

uint32_t payload_crc(const std::string& payload) {
    return static_cast<uint32_t>(
        ::crc32(0L, reinterpret_cast<const Bytef*>(payload.data()),
                static_cast<uInt>(payload.size())));
}

struct Reader {
    const std::string& buf;
    size_t pos = 0;

    void need(size_t n) const {
        if (pos + n > buf.size()) throw PersistTruncatedError("feature file is truncated");
    }
    uint32_t u32() {
        need(4);
        uint32_t v;
        std::memcpy(&v, buf.data() + pos, 4);
        pos += 4;
        return v;
    }
    void bytes(void* out, size_t n) {
        need(n);
        std::memcpy(out, buf.data() + pos, n);
        pos += n;
    }
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in.is_open()) throw IngestionError("cannot open file: " + path);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return buf;
}

}  // namespace

void write_features(const FeatureDataset& fd, const std::string& path) {
    std::string payload;
    put_u32(payload, kFeatureVersion);
    put_u32(payload, static_cast<uint32_t>(fd.K));
    put_u32(payload, static_cast<uint32_t>(fd.L));
    put_u32(payload, static_cast<uint32_t>(fd.num_classes));
    put_u32(payload, static_cast<uint32_t>(fd.tensors.size()));
    for (const auto& t : fd.tensors) {
        put_u32(payload, static_cast<uint32_t>(t.label));
        payload.append(reinterpret_cast<const char*>(t.mask.data()), t.mask.size());
        put_f64(payload, t.data.data(), t.data.size());
    }

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out.is_open()) throw IngestionError("cannot create file: " + path);
    out.write(kFeatureMagic, sizeof(kFeatureMagic));
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    uint32_t crc = payload_crc(payload);
    out.write(reinterpret_cast<const char*>(&crc), 4);
    if (!out) throw IngestionError("write failed: " + path);
}

FeatureDataset read_features(const std::string& path) {
    const std::string buf = read_file(path);
    if (buf.size() < sizeof(kFeatureMagic) + 4)
        throw PersistTruncatedError("feature file is too small");
    if (std::memcmp(buf.data(), kFeatureMagic, sizeof(kFeatureMagic)) != 0)
        throw PersistVersionError("not an RPFEAT01 file");

    const std::string payload =
        buf.substr(sizeof(kFeatureMagic), buf.size() - sizeof(kFeatureMagic) - 4);
    uint32_t stored_crc;
    std::memcpy(&stored_crc, buf.data() + buf.size() - 4, 4);
    if (payload_crc(payload) != stored_crc)
        throw PersistChecksumError("feature file checksum mismatch");

    Reader r{payload};
    uint32_t version = r.u32();
    if (version != kFeatureVersion)
        throw PersistVersionError("unsupported feature file version " +
                                  std::to_string(version));
    FeatureDataset fd;
    fd.K = static_cast<int>(r.u32());
    fd.L = static_cast<int>(r.u32());
    fd.num_classes = static_cast<int>(r.u32());
    uint32_t count = r.u32();
    if (fd.K < 1 || fd.L < 1 || fd.num_classes < 2)
        throw FormatError("feature file header has invalid dimensions");
    fd.tensors.reserve(count);
    const size_t slots = static_cast<size_t>(fd.K) * static_cast<size_t>(fd.L);
    for (uint32_t i = 0; i < count; ++i) {
        FeatureTensor t;
        t.K = fd.K;
        t.L = fd.L;
        t.label = static_cast<int>(r.u32());
        t.mask.resize(slots);
        r.bytes(t.mask.data(), slots);
        t.data.resize(slots * 5);
        r.bytes(t.data.data(), slots * 5 * sizeof(double));
        fd.tensors.push_back(std::move(t));
    }
    if (r.pos != payload.size())
        throw PersistTruncatedError("feature file has trailing bytes");
    return fd;
}

bool operator==(const FeatureTensor& a, const FeatureTensor& b) {
    return a.K == b.K && a.L == b.L && a.label == b.label && a.mask == b.mask &&
           a.data == b.data;
}

bool operator==(const FeatureDataset& a, const FeatureDataset& b) {
    return a.K == b.K && a.L == b.L && a.num_classes == b.num_classes &&
           a.tensors == b.tensors;
}

}  // namespace rpnet

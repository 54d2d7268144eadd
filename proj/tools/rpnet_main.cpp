#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rpnet/errors.hpp"
#include "rpnet/featurize.hpp"
#include "rpnet/graph_io.hpp"
#include "rpnet/rpnet_model.hpp"
#include "rpnet/train_eval.hpp"
#include "rpnet/verify.hpp"

namespace {

using namespace rpnet;

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitVerify = 4;

std::string dataset_name_from_dir(const std::string& dir) {
    std::filesystem::path p(dir);
    if (!p.has_filename()) p = p.parent_path();
    return p.filename().string();
}

bool parse_bool(const std::string& v) {
    if (v == "1" || v == "true" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "no") return false;
    throw ArgumentError("expected a boolean, got '" + v + "'");
}

std::vector<size_t> parse_size_list(const std::string& v) {
    std::vector<size_t> out;
    size_t pos = 0;
    while (pos <= v.size()) {
        size_t comma = v.find(',', pos);
        if (comma == std::string::npos) comma = v.size();
        out.push_back(static_cast<size_t>(std::stoul(v.substr(pos, comma - pos))));
        pos = comma + 1;
    }
    return out;
}

// --set section.key=value overrides for the model and training knobs.
void apply_overrides(const std::vector<std::string>& sets, RpnetConfig& model,
                     TrainConfig& train) {
    for (const std::string& s : sets) {
        const size_t eq = s.find('=');
        if (eq == std::string::npos) {
            throw ArgumentError("--set expects section.key=value, got '" + s + "'");
        }
        const std::string key = s.substr(0, eq);
        const std::string value = s.substr(eq + 1);
        try {
            if (key == "model.encoder_width") {
                model.encoder_width = std::stoul(value);
            } else if (key == "model.decoder_width") {
                model.decoder_width = std::stoul(value);
            } else if (key == "model.encoder_depth") {
                model.encoder_depth = std::stoul(value);
            } else if (key == "model.decoder_depth") {
                model.decoder_depth = std::stoul(value);
            } else if (key == "model.head_hidden") {
                model.head_hidden = parse_size_list(value);
            } else if (key == "model.norm") {
                if (value == "none")
                    model.norm = NormKind::none;
                else if (value == "layer")
                    model.norm = NormKind::layer;
                else if (value == "batch")
                    model.norm = NormKind::batch;
                else
                    throw ArgumentError("unknown norm '" + value + "'");
            } else if (key == "model.dropout") {
                model.dropout_rate = std::stod(value);
            } else if (key == "model.activation") {
                if (value == "relu")
                    model.activation = ActivationKind::relu;
                else if (value == "elu")
                    model.activation = ActivationKind::elu;
                else
                    throw ArgumentError("unknown activation '" + value + "'");
            } else if (key == "model.pool") {
                if (value == "softmax")
                    model.diagram_pool = DiagramPool::softmax_weighted;
                else if (value == "average")
                    model.diagram_pool = DiagramPool::average;
                else
                    throw ArgumentError("unknown pool '" + value + "'");
            } else if (key == "model.onehot_input") {
                model.use_onehot_input = parse_bool(value);
            } else if (key == "model.onehot_concat") {
                model.use_onehot_concat = parse_bool(value);
            } else if (key == "train.max_epochs") {
                train.max_epochs = std::stoi(value);
            } else if (key == "train.patience") {
                train.patience = std::stoi(value);
            } else if (key == "train.initial_lr") {
                train.initial_lr = std::stod(value);
            } else if (key == "train.lr_decay") {
                train.lr_decay = std::stod(value);
            } else if (key == "train.decay_every") {
                train.decay_every = std::stoi(value);
            } else if (key == "train.max_decays") {
                train.max_decays = std::stoi(value);
            } else if (key == "train.batch_size") {
                train.batch_size = std::stoi(value);
            } else if (key == "train.folds") {
                train.folds = std::stoi(value);
            } else {
                throw ArgumentError("unknown --set key '" + key + "'");
            }
        } catch (const std::invalid_argument&) {
            throw ArgumentError("bad value for " + key + ": '" + value + "'");
        } catch (const std::out_of_range&) {
            throw ArgumentError("bad value for " + key + ": '" + value + "'");
        }
    }
}

void note_unusual_k(int k) {
    if (k != 1 && k != 2 && k != 4 && k != 8) {
        std::fprintf(stderr, "note: K=%d is outside the usual {1, 2, 4, 8}\n", k);
    }
}

int cmd_extract(const std::string& data, std::string name, int k, const std::string& mode,
                const std::string& out, int jobs) {
    if (name.empty()) name = dataset_name_from_dir(data);
    note_unusual_k(k);
    LoadSummary summary;
    LabeledDataset ds = parse_tu_dataset(data, name, &summary);
    std::printf("%s\n", summary.to_text().c_str());
    SignatureMode sig = SignatureMode::return_prob;
    if (mode == "degree") {
        sig = SignatureMode::degree;
    } else if (mode != "rp") {
        throw ArgumentError("unknown signature mode '" + mode + "'");
    }
    FeatureDataset fd = extract_features(ds, k, sig, jobs);
    write_features(fd, out);
    std::printf("wrote %s: K=%d L=%d classes=%d graphs=%zu\n", out.c_str(), fd.K, fd.L,
                fd.num_classes, fd.tensors.size());
    return 0;
}

int cmd_cv(const std::string& features, const std::string& out, uint64_t seed, int jobs,
           double lr, const std::vector<std::string>& sets) {
    FeatureDataset fd = read_features(features);
    RpnetConfig model = default_config(fd.K, fd.num_classes);
    TrainConfig train;
    train.seed = seed;
    train.jobs = jobs;
    train.initial_lr = lr;
    apply_overrides(sets, model, train);
    CvResult cv = cross_validate(fd, model, train);
    for (const std::string& w : cv.warnings) {
        std::fprintf(stderr, "warning: %s\n", w.c_str());
    }
    write_report(out, cv);
    std::printf("%s\n", summary_line(cv).c_str());
    std::printf("report: %s\n", out.c_str());
    return 0;
}

int cmd_ablate(const std::string& features, uint64_t seed, int jobs,
               const std::vector<std::string>& sets, const std::string& out) {
    FeatureDataset fd = read_features(features);
    RpnetConfig base = default_config(fd.K, fd.num_classes);
    TrainConfig train;
    train.seed = seed;
    train.jobs = jobs;
    apply_overrides(sets, base, train);

    struct Row {
        std::string name;
        CvResult cv;
    };
    std::vector<Row> rows;
    rows.push_back({"full", cross_validate(fd, base, train)});
    for (AblationKind kind :
         {AblationKind::no_onehot_1, AblationKind::no_onehot_2, AblationKind::avg_pool}) {
        rows.push_back({ablation_name(kind), cross_validate(fd, ablation_variant(base, kind), train)});
    }

    std::string table;
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%-14s %s\n", "variant", "accuracy");
    table += buf;
    for (const Row& r : rows) {
        std::snprintf(buf, sizeof(buf), "%-14s %.6f +- %.6f\n", r.name.c_str(),
                      r.cv.mean_accuracy, r.cv.std_accuracy);
        table += buf;
    }
    std::fputs(table.c_str(), stdout);
    if (!out.empty()) {
        std::ofstream f(out, std::ios::trunc);
        if (!f.is_open()) throw IngestionError("cannot create file: " + out);
        f << table;
    }
    return 0;
}

int cmd_verify(bool quick, uint64_t seed) {
    bool all_ok = true;
    for (const CheckResult& r : run_verification(quick, seed)) {
        std::printf("[%s] %s: %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(),
                    r.detail.c_str());
        all_ok = all_ok && r.passed;
    }
    return all_ok ? 0 : kExitVerify;
}

int cmd_synth(const std::string& kind, int count, int min_nodes, int max_nodes,
              const std::string& out_dir, std::string name, uint64_t seed) {
    SyntheticKind sk;
    if (kind == "cycles_vs_paths") {
        sk = SyntheticKind::cycles_vs_paths;
    } else if (kind == "density_pair") {
        sk = SyntheticKind::density_pair;
    } else {
        throw ArgumentError("unknown synthetic kind '" + kind + "'");
    }
    if (name.empty()) name = kind;
    LabeledDataset ds = generate_synthetic(sk, count, {min_nodes, max_nodes}, seed);
    const std::string dir =
        (std::filesystem::path(out_dir) / name).string();  // TU layout: <dir>/<name>_A.txt
    write_tu_dataset(ds, dir, name);
    std::printf("wrote %s: %zu graphs, %d classes\n", dir.c_str(), ds.graphs.size(),
                ds.num_classes);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Return-probability persistence features and the RPNet classifier"};
    app.require_subcommand(1);
    app.fallthrough();

    uint64_t seed = 0;
    int jobs = 1;
    app.add_option("--seed", seed, "master random seed")->capture_default_str();
    app.add_option("--jobs", jobs, "worker threads (1 = fully sequential)")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);

    auto* extract = app.add_subcommand("extract", "dataset directory -> feature file");
    std::string ex_data, ex_name, ex_mode = "rp", ex_out = "features.rpfeat";
    int ex_k = 4;
    extract->add_option("--data", ex_data, "dataset directory (TU format)")->required();
    extract->add_option("--name", ex_name, "dataset name (default: directory name)");
    extract->add_option("--k", ex_k, "number of scales")->check(CLI::PositiveNumber);
    extract->add_option("--mode", ex_mode, "vertex descriptor: rp | degree");
    extract->add_option("--out", ex_out, "output feature file")->capture_default_str();

    auto* cv = app.add_subcommand("cv", "cross-validate a feature file");
    std::string cv_features, cv_out = "report.csv";
    double cv_lr = 0.01;
    std::vector<std::string> cv_sets;
    cv->add_option("--features", cv_features, "RPFEAT01 feature file")->required();
    cv->add_option("--out", cv_out, "report file")->capture_default_str();
    cv->add_option("--lr", cv_lr, "initial learning rate")->capture_default_str();
    cv->add_option("--set", cv_sets, "override config (section.key=value)");

    auto* ablate = app.add_subcommand("ablate", "compare the ablation variants");
    std::string ab_features, ab_out;
    std::vector<std::string> ab_sets;
    ablate->add_option("--features", ab_features, "RPFEAT01 feature file")->required();
    ablate->add_option("--out", ab_out, "also write the table to this file");
    ablate->add_option("--set", ab_sets, "override config (section.key=value)");

    auto* verify = app.add_subcommand("verify", "run the oracle suites");
    bool vf_quick = false;
    verify->add_flag("--quick", vf_quick, "smaller sample counts");

    auto* synth = app.add_subcommand("synth", "write a synthetic dataset in TU format");
    std::string sy_kind = "cycles_vs_paths", sy_out = ".", sy_name;
    int sy_count = 50, sy_min = 6, sy_max = 20;
    synth->add_option("--kind", sy_kind, "cycles_vs_paths | density_pair")
        ->capture_default_str();
    synth->add_option("--count", sy_count, "graphs per class")->capture_default_str();
    synth->add_option("--min-nodes", sy_min, "smallest graph size")->capture_default_str();
    synth->add_option("--max-nodes", sy_max, "largest graph size")->capture_default_str();
    synth->add_option("--out", sy_out, "output directory")->capture_default_str();
    synth->add_option("--name", sy_name, "dataset name (default: kind)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (*extract) return cmd_extract(ex_data, ex_name, ex_k, ex_mode, ex_out, jobs);
        if (*cv) return cmd_cv(cv_features, cv_out, seed, jobs, cv_lr, cv_sets);
        if (*ablate) return cmd_ablate(ab_features, seed, jobs, ab_sets, ab_out);
        if (*verify) return cmd_verify(vf_quick, seed);
        if (*synth) return cmd_synth(sy_kind, sy_count, sy_min, sy_max, sy_out, sy_name, seed);
    } catch (const ArgumentError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const IngestionError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitData;
    } catch (const FormatError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitData;
    } catch (const PersistVersionError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitData;
    } catch (const PersistTruncatedError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitData;
    } catch (const PersistChecksumError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitData;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}

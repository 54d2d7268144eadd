#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "rpnet/errors.hpp"
#include "rpnet/featurize.hpp"
#include "rpnet/graph_io.hpp"
#include "rpnet/rng.hpp"
#include "rpnet/rpnet_model.hpp"
#include "rpnet/train_eval.hpp"

using namespace rpnet;

namespace {

RpnetConfig tiny_model(int K, int num_classes) {
    RpnetConfig cfg = default_config(K, num_classes);
    cfg.encoder_width = 8;
    cfg.decoder_width = 8;
    cfg.head_hidden = {8};
    return cfg;
}

std::vector<const FeatureTensor*> pointers(const std::vector<FeatureTensor>& ts) {
    std::vector<const FeatureTensor*> out;
    for (const auto& t : ts) out.push_back(&t);
    return out;
}

// One real point per tensor; the tag and coordinates encode the class
// directly, so any working optimizer memorizes the mapping.
FeatureTensor class_coded_tensor(int label) {
    FeatureTensor t;
    t.K = 1;
    t.L = 1;
    t.label = label;
    t.mask = {1};
    if (label == 0) {
        t.data = {0.3, 0.8, 1.0, 0.0, 0.0};
    } else {
        t.data = {0.9, 1.0, 0.0, 0.0, 1.0};
    }
    return t;
}

FeatureDataset class_coded_dataset(int per_class) {
    FeatureDataset fd;
    fd.K = 1;
    fd.L = 1;
    fd.num_classes = 2;
    for (int i = 0; i < per_class; ++i) {
        fd.tensors.push_back(class_coded_tensor(0));
        fd.tensors.push_back(class_coded_tensor(1));
    }
    return fd;
}

// All slots masked off: every graph pools to the zero vector, and with zero
// bias initialization the logits stay exactly zero.
FeatureTensor blank_tensor(int label) {
    FeatureTensor t;
    t.K = 1;
    t.L = 2;
    t.label = label;
    t.mask = {0, 0};
    t.data.assign(1 * 2 * 5, 0.0);
    return t;
}

bool same_fold_result(const FoldResult& a, const FoldResult& b) {
    return a.fold == b.fold && a.seed == b.seed && a.train_loss == b.train_loss &&
           a.test_accuracy == b.test_accuracy && a.epochs_run == b.epochs_run &&
           a.selected_epoch == b.selected_epoch &&
           a.reported_accuracy == b.reported_accuracy;
}

void check_stop_rule(const FoldResult& r, const TrainConfig& tc) {
    CHECK(r.epochs_run ==
          std::min(tc.max_epochs, r.selected_epoch + tc.patience + 1));
    CHECK(r.selected_epoch < r.epochs_run);
    CHECK(static_cast<int>(r.train_loss.size()) == r.epochs_run);
    CHECK(static_cast<int>(r.test_accuracy.size()) == r.epochs_run);
}

}  // namespace

TEST_CASE("learning rate schedule") {
    TrainConfig tc;
    tc.initial_lr = 0.01;

    CHECK(lr_at(tc, 0) == 0.01);
    CHECK(lr_at(tc, 24) == 0.01);
    CHECK(lr_at(tc, 25) == 0.005);
    CHECK(lr_at(tc, 400) == doctest::Approx(1.5625e-4).epsilon(1e-12));

    double prev = lr_at(tc, 0);
    for (int e = 1; e <= 200; ++e) {
        double lr = lr_at(tc, e);
        CHECK(lr <= prev);
        prev = lr;
    }
    // Capped after six halvings: constant from epoch 150 on.
    CHECK(lr_at(tc, 150) == lr_at(tc, 100000));

    CHECK_THROWS_AS(lr_at(tc, -1), ArgumentError);
}

TEST_CASE("train config validation") {
    TrainConfig tc;
    CHECK_NOTHROW(tc.validate());

    TrainConfig bad = tc;
    bad.initial_lr = 0.02;
    CHECK_THROWS_AS(bad.validate(), ArgumentError);
    bad.initial_lr = 0.0005;
    CHECK_THROWS_AS(bad.validate(), ArgumentError);

    bad = tc;
    bad.patience = 0;
    CHECK_THROWS_AS(bad.validate(), ArgumentError);
    bad.patience = bad.max_epochs;
    CHECK_THROWS_AS(bad.validate(), ArgumentError);

    bad = tc;
    bad.lr_decay = 1.0;
    CHECK_THROWS_AS(bad.validate(), ArgumentError);

    bad = tc;
    bad.folds = 1;
    CHECK_THROWS_AS(bad.validate(), ArgumentError);

    bad = tc;
    bad.batch_size = 0;
    CHECK_THROWS_AS(bad.validate(), ArgumentError);
}

TEST_CASE("per-fold seeds are stable and distinct") {
    std::set<uint64_t> seen;
    for (int f = 0; f < 10; ++f) {
        uint64_t s = fold_seed_of(1234, f);
        CHECK(s == fold_seed_of(1234, f));
        seen.insert(s);
    }
    CHECK(seen.size() == 10);
    CHECK(fold_seed_of(1234, 0) != fold_seed_of(1235, 0));
}

TEST_CASE("stratified folds partition and balance") {
    std::vector<int> labels;
    for (int i = 0; i < 17; ++i) labels.push_back(0);
    for (int i = 0; i < 17; ++i) labels.push_back(1);
    for (int i = 0; i < 6; ++i) labels.push_back(2);

    std::vector<std::string> warnings;
    auto folds = stratified_folds(labels, 10, 99, &warnings);
    REQUIRE(folds.size() == 10);

    // Exactly one fold per item.
    std::vector<int> hit(labels.size(), 0);
    for (const auto& fold : folds)
        for (size_t idx : fold) {
            REQUIRE(idx < labels.size());
            hit[idx] += 1;
        }
    CHECK(std::count(hit.begin(), hit.end(), 1) == static_cast<long>(labels.size()));

    // Fold sizes and per-class counts spread within one item.
    size_t min_size = labels.size(), max_size = 0;
    for (const auto& fold : folds) {
        min_size = std::min(min_size, fold.size());
        max_size = std::max(max_size, fold.size());
    }
    CHECK(max_size - min_size <= 1);

    for (int cls = 0; cls < 3; ++cls) {
        size_t lo = labels.size(), hi = 0;
        for (const auto& fold : folds) {
            size_t c = 0;
            for (size_t idx : fold) c += labels[idx] == cls ? 1 : 0;
            lo = std::min(lo, c);
            hi = std::max(hi, c);
        }
        CHECK(hi - lo <= 1);
    }

    // The six-member class cannot reach all ten folds.
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].find("class 2") != std::string::npos);

    auto again = stratified_folds(labels, 10, 99, nullptr);
    CHECK(again == folds);
    auto other = stratified_folds(labels, 10, 100, nullptr);
    CHECK(other != folds);
}

TEST_CASE("a run that never improves stops after exactly patience epochs") {
    // Blank inputs pool to zero vectors; zero-initialized biases then keep
    // every logit at zero, so the loss is ln 2 forever and every gradient
    // vanishes (balanced full batch). The first epoch stays the best.
    std::vector<FeatureTensor> train;
    for (int i = 0; i < 8; ++i) train.push_back(blank_tensor(i % 2));
    std::vector<FeatureTensor> test{blank_tensor(0), blank_tensor(1)};

    RpnetConfig cfg = tiny_model(1, 2);
    cfg.norm = NormKind::none;
    cfg.dropout_rate = 0.0;

    TrainConfig tc;
    tc.max_epochs = 100;
    tc.patience = 7;
    tc.batch_size = 8;

    FoldResult r = train_fold(pointers(train), pointers(test), cfg, tc, 42);
    CHECK(r.epochs_run == tc.patience + 1);
    CHECK(r.selected_epoch == 0);
    check_stop_rule(r, tc);
    for (double loss : r.train_loss) {
        CHECK(loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
        CHECK(loss == r.train_loss[0]);  // bit-identical across epochs
    }
    for (double acc : r.test_accuracy) CHECK(acc == 0.5);
}

TEST_CASE("identical seeds reproduce a fold bit for bit") {
    LabeledDataset ds = generate_synthetic(SyntheticKind::cycles_vs_paths, 6, {5, 9}, 7);
    FeatureDataset fd = extract_features(ds, 2, SignatureMode::return_prob);

    std::vector<const FeatureTensor*> train, test;
    for (size_t i = 0; i < fd.tensors.size(); ++i)
        (i % 4 == 0 ? test : train).push_back(&fd.tensors[i]);

    RpnetConfig cfg = tiny_model(2, 2);
    TrainConfig tc;
    tc.max_epochs = 12;
    tc.patience = 6;
    tc.batch_size = 8;

    FoldResult a = train_fold(train, test, cfg, tc, 31337);
    FoldResult b = train_fold(train, test, cfg, tc, 31337);
    CHECK(same_fold_result(a, b));

    FoldResult c = train_fold(train, test, cfg, tc, 31338);
    CHECK(c.seed != a.seed);
}

TEST_CASE("a separable toy problem is fit perfectly") {
    LabeledDataset ds = generate_synthetic(SyntheticKind::cycles_vs_paths, 10, {6, 12}, 2);
    FeatureDataset fd = extract_features(ds, 2, SignatureMode::return_prob);
    REQUIRE(fd.tensors.size() == 20);

    std::vector<const FeatureTensor*> train, test;
    for (size_t i = 0; i < 20; ++i) {
        bool holdout = (i % 10) >= 8;  // two per class
        (holdout ? test : train).push_back(&fd.tensors[i]);
    }

    RpnetConfig cfg = tiny_model(2, 2);
    cfg.dropout_rate = 0.0;  // full-batch descent, so the loss falls monotonically
    TrainConfig tc;
    tc.max_epochs = 120;
    tc.patience = 15;
    tc.batch_size = 16;

    Rng scratch(0);
    RpnetParams restored = init_params(cfg, scratch);
    FoldResult r = train_fold(train, test, cfg, tc, 11, 0, &restored);
    check_stop_rule(r, tc);
    CHECK(r.reported_accuracy == 1.0);

    // The reported number is reproducible from the returned parameters.
    CHECK(evaluate_accuracy(restored, cfg, test) == r.reported_accuracy);
}

TEST_CASE("non-finite inputs abort the fold with context") {
    std::vector<FeatureTensor> train;
    for (int i = 0; i < 4; ++i) train.push_back(class_coded_tensor(i % 2));
    train[0].data[0] = std::nan("");
    std::vector<FeatureTensor> test{class_coded_tensor(0), class_coded_tensor(1)};

    RpnetConfig cfg = tiny_model(1, 2);
    TrainConfig tc;
    tc.max_epochs = 5;
    tc.patience = 2;

    CHECK_THROWS_WITH_AS(
        train_fold(pointers(train), pointers(test), cfg, tc, 3),
        doctest::Contains("fold"), NumericError);
}

TEST_CASE("cross validation memorizes a two-class constant mapping") {
    FeatureDataset fd = class_coded_dataset(10);

    RpnetConfig cfg = tiny_model(1, 2);
    TrainConfig tc;
    tc.max_epochs = 80;
    tc.patience = 12;
    tc.folds = 10;
    tc.seed = 17;

    CvResult cv = cross_validate(fd, cfg, tc);
    REQUIRE(cv.folds.size() == 10);
    for (const auto& fold : cv.folds) {
        check_stop_rule(fold, tc);
        CHECK(fold.reported_accuracy == 1.0);
    }
    CHECK(cv.mean_accuracy == 1.0);
    CHECK(cv.std_accuracy == 0.0);
    CHECK(cv.warnings.empty());
}

TEST_CASE("fold workers match the sequential schedule") {
    FeatureDataset fd = class_coded_dataset(6);

    RpnetConfig cfg = tiny_model(1, 2);
    TrainConfig tc;
    tc.max_epochs = 10;
    tc.patience = 4;
    tc.folds = 4;
    tc.seed = 23;

    CvResult seq = cross_validate(fd, cfg, tc);
    tc.jobs = 2;
    CvResult par = cross_validate(fd, cfg, tc);

    REQUIRE(seq.folds.size() == par.folds.size());
    for (size_t i = 0; i < seq.folds.size(); ++i)
        CHECK(same_fold_result(seq.folds[i], par.folds[i]));
    CHECK(seq.mean_accuracy == par.mean_accuracy);
    CHECK(seq.std_accuracy == par.std_accuracy);
}

TEST_CASE("cross validation rejects mismatched shapes") {
    FeatureDataset fd = class_coded_dataset(6);
    TrainConfig tc;
    tc.folds = 4;

    RpnetConfig wrong_k = tiny_model(2, 2);
    CHECK_THROWS_AS(cross_validate(fd, wrong_k, tc), ArgumentError);

    RpnetConfig wrong_c = tiny_model(1, 3);
    CHECK_THROWS_AS(cross_validate(fd, wrong_c, tc), ArgumentError);

    FeatureDataset small = class_coded_dataset(1);  // 2 graphs, 4 folds
    CHECK_THROWS_AS(cross_validate(small, tiny_model(1, 2), tc), ArgumentError);
}

TEST_CASE("report files carry one row per fold plus a summary") {
    CvResult cv;
    cv.mean_accuracy = 0.8;
    cv.std_accuracy = 0.05;
    FoldResult f0;
    f0.fold = 0;
    f0.seed = 123;
    f0.epochs_run = 10;
    f0.selected_epoch = 4;
    f0.reported_accuracy = 0.75;
    FoldResult f1;
    f1.fold = 1;
    f1.seed = 456;
    f1.epochs_run = 8;
    f1.selected_epoch = 7;
    f1.reported_accuracy = 0.85;
    cv.folds = {f0, f1};

    CHECK(summary_line(cv) == "accuracy: 0.800000 +- 0.050000");

    auto path = std::filesystem::temp_directory_path() / "rpnet_test_report.csv";
    write_report(path.string(), cv);
    std::ifstream in(path);
    REQUIRE(in.is_open());
    std::string line;
    std::getline(in, line);
    CHECK(line == "fold,seed,epochs,selected_epoch,accuracy");
    std::getline(in, line);
    CHECK(line == "0,123,10,4,0.750000");
    std::getline(in, line);
    CHECK(line == "1,456,8,7,0.850000");
    std::getline(in, line);
    CHECK(line == "accuracy: 0.800000 +- 0.050000");
    std::filesystem::remove(path);
}

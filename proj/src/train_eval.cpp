#include "rpnet/train_eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

#include "rpnet/errors.hpp"
#include "rpnet/rng.hpp"

namespace rpnet {

void TrainConfig::validate() const {
    if (max_epochs < 1) throw ArgumentError("train config: max_epochs must be positive");
    if (patience < 1 || patience >= max_epochs) {
        throw ArgumentError("train config: patience must lie in [1, max_epochs)");
    }
    if (!(initial_lr >= 0.001 && initial_lr <= 0.01)) {
        throw ArgumentError("train config: initial_lr must lie in [0.001, 0.01]");
    }
    if (!(lr_decay > 0.0 && lr_decay < 1.0)) {
        throw ArgumentError("train config: lr_decay must lie in (0, 1)");
    }
    if (decay_every < 1) throw ArgumentError("train config: decay_every must be positive");
    if (max_decays < 0) throw ArgumentError("train config: max_decays must be non-negative");
    if (batch_size < 1) throw ArgumentError("train config: batch_size must be positive");
    if (folds < 2) throw ArgumentError("train config: need at least 2 folds");
    if (jobs < 1) throw ArgumentError("train config: jobs must be positive");
}

double lr_at(const TrainConfig& config, int epoch) {
    if (epoch < 0) throw ArgumentError("lr_at: epoch must be non-negative");
    int steps = std::min(epoch / config.decay_every, config.max_decays);
    return config.initial_lr * std::pow(config.lr_decay, static_cast<double>(steps));
}

uint64_t fold_seed_of(uint64_t master_seed, int fold_index) {
    return derive_seed(derive_seed(master_seed, seed_tag::fold),
                       static_cast<uint64_t>(fold_index));
}

double evaluate_accuracy(RpnetParams& params, const RpnetConfig& config,
                         const std::vector<const FeatureTensor*>& graphs) {
    if (graphs.empty()) throw ArgumentError("evaluate_accuracy: empty graph set");
    Tensor probs = rpnet_probabilities(params, config, graphs);
    size_t correct = 0;
    for (size_t r = 0; r < probs.rows(); ++r) {
        size_t best = 0;
        for (size_t c = 1; c < probs.cols(); ++c) {
            if (probs(r, c) > probs(r, best)) best = c;
        }
        if (static_cast<int>(best) == graphs[r]->label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(graphs.size());
}

FoldResult train_fold(const std::vector<const FeatureTensor*>& train,
                      const std::vector<const FeatureTensor*>& test,
                      const RpnetConfig& model_config, const TrainConfig& train_config,
                      uint64_t fold_seed, int fold_index, RpnetParams* out_params) {
    model_config.validate();
    train_config.validate();
    if (train.empty() || test.empty()) {
        throw ArgumentError("train_fold: train and test sets must be non-empty");
    }
    for (const FeatureTensor* t : train) {
        if (t->label < 0 || t->label >= model_config.num_classes) {
            throw ArgumentError("train_fold: label out of range for the configured classes");
        }
    }

    Rng init_rng(derive_seed(fold_seed, seed_tag::init));
    RpnetParams params = init_params(model_config, init_rng);

    // Parameter storage never reallocates after init, so these pointers stay
    // valid for the whole fold.
    std::vector<ParamRef> refs = param_refs(params);
    std::vector<Tensor*> param_ptrs;
    std::vector<const Tensor*> param_view;
    std::vector<std::string> names;
    for (const ParamRef& r : refs) {
        param_ptrs.push_back(r.tensor);
        param_view.push_back(r.tensor);
        names.push_back(r.name);
    }
    AdamState adam = adam_init(param_view);

    FoldResult result;
    result.fold = fold_index;
    result.seed = fold_seed;

    double best_loss = std::numeric_limits<double>::infinity();
    int best_epoch = 0;
    std::vector<NamedTensor> best_snapshot = snapshot_state(params);

    std::vector<size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);

    const uint64_t epoch_root = derive_seed(fold_seed, seed_tag::epoch);
    for (int epoch = 0; epoch < train_config.max_epochs; ++epoch) {
        const uint64_t epoch_seed = derive_seed(epoch_root, static_cast<uint64_t>(epoch));
        Rng shuffle_rng(derive_seed(epoch_seed, seed_tag::shuffle));
        Rng dropout_rng(derive_seed(epoch_seed, seed_tag::batch));
        shuffle_rng.shuffle(order);

        const double lr = lr_at(train_config, epoch);
        double loss_sum = 0.0;
        try {
            for (size_t start = 0; start < order.size();
                 start += static_cast<size_t>(train_config.batch_size)) {
                const size_t stop =
                    std::min(order.size(), start + static_cast<size_t>(train_config.batch_size));
                std::vector<const FeatureTensor*> batch;
                std::vector<int> labels;
                batch.reserve(stop - start);
                for (size_t i = start; i < stop; ++i) {
                    batch.push_back(train[order[i]]);
                    labels.push_back(train[order[i]]->label);
                }

                ForwardResult fwd = rpnet_forward(params, model_config, batch, true, dropout_rng);
                Tape::Id loss =
                    fwd.tape.softmax_cross_entropy(fwd.logits, labels, model_config.num_classes);
                fwd.tape.backward(loss);
                loss_sum += fwd.tape.value(loss)[0] * static_cast<double>(batch.size());

                std::vector<const Tensor*> grad_ptrs;
                grad_ptrs.reserve(fwd.leaves.size());
                for (Tape::Id leaf : fwd.leaves) {
                    grad_ptrs.push_back(&fwd.tape.grad(leaf));
                }
                adam_step(adam, param_ptrs, grad_ptrs, lr, names);
            }
        } catch (const NumericError& e) {
            throw NumericError("fold " + std::to_string(fold_index) + ", epoch " +
                               std::to_string(epoch) + ": " + e.what());
        }

        const double epoch_loss = loss_sum / static_cast<double>(train.size());
        if (!std::isfinite(epoch_loss)) {
            throw NumericError("fold " + std::to_string(fold_index) + ", epoch " +
                               std::to_string(epoch) + ": non-finite training loss");
        }
        result.train_loss.push_back(epoch_loss);
        result.test_accuracy.push_back(evaluate_accuracy(params, model_config, test));

        if (epoch_loss < best_loss) {
            best_loss = epoch_loss;
            best_epoch = epoch;
            best_snapshot = snapshot_state(params);
        }
        if (epoch - best_epoch >= train_config.patience) {
            break;
        }
    }

    result.epochs_run = static_cast<int>(result.train_loss.size());
    result.selected_epoch = best_epoch;
    restore_state(params, best_snapshot);
    result.reported_accuracy = evaluate_accuracy(params, model_config, test);
    if (out_params) *out_params = std::move(params);
    return result;
}

std::vector<std::vector<size_t>> stratified_folds(const std::vector<int>& labels, int folds,
                                                  uint64_t seed,
                                                  std::vector<std::string>* warnings) {
    if (folds < 2) throw ArgumentError("stratified_folds: need at least 2 folds");
    if (labels.size() < static_cast<size_t>(folds)) {
        throw ArgumentError("stratified_folds: fewer graphs than folds");
    }
    int max_label = 0;
    for (int l : labels) {
        if (l < 0) throw ArgumentError("stratified_folds: negative label");
        max_label = std::max(max_label, l);
    }

    std::vector<std::vector<size_t>> by_class(static_cast<size_t>(max_label) + 1);
    for (size_t i = 0; i < labels.size(); ++i) {
        by_class[static_cast<size_t>(labels[i])].push_back(i);
    }

    Rng rng(derive_seed(seed, seed_tag::strat));
    std::vector<std::vector<size_t>> fold_sets(static_cast<size_t>(folds));
    size_t next_fold = 0;
    for (size_t c = 0; c < by_class.size(); ++c) {
        auto& members = by_class[c];
        if (members.empty()) continue;
        if (members.size() < static_cast<size_t>(folds) && warnings) {
            warnings->push_back("class " + std::to_string(c) + " has only " +
                                std::to_string(members.size()) + " graphs for " +
                                std::to_string(folds) +
                                " folds; it cannot appear in every fold");
        }
        rng.shuffle(members);
        // Continuing the round-robin across classes keeps fold sizes within
        // one of each other while spreading every class as far as it reaches.
        for (size_t m : members) {
            fold_sets[next_fold % static_cast<size_t>(folds)].push_back(m);
            ++next_fold;
        }
    }
    for (auto& f : fold_sets) std::sort(f.begin(), f.end());
    return fold_sets;
}

CvResult cross_validate(const FeatureDataset& features, const RpnetConfig& model_config,
                        const TrainConfig& train_config) {
    model_config.validate();
    train_config.validate();
    if (features.tensors.size() < static_cast<size_t>(train_config.folds)) {
        throw ArgumentError("cross_validate: dataset smaller than the fold count");
    }
    if (model_config.K != features.K) {
        throw ArgumentError("cross_validate: model K does not match the feature file");
    }
    if (model_config.num_classes != features.num_classes) {
        throw ArgumentError("cross_validate: model classes do not match the feature file");
    }

    CvResult result;
    std::vector<int> labels;
    labels.reserve(features.tensors.size());
    for (const FeatureTensor& t : features.tensors) labels.push_back(t.label);
    const auto fold_sets =
        stratified_folds(labels, train_config.folds, train_config.seed, &result.warnings);

    result.folds.resize(fold_sets.size());
    std::atomic<size_t> cursor{0};
    std::exception_ptr first_error = nullptr;
    std::mutex error_lock;

    auto run_fold = [&](size_t f) {
        std::vector<char> is_test(features.tensors.size(), 0);
        for (size_t i : fold_sets[f]) is_test[i] = 1;
        std::vector<const FeatureTensor*> train_set, test_set;
        for (size_t i = 0; i < features.tensors.size(); ++i) {
            (is_test[i] ? test_set : train_set).push_back(&features.tensors[i]);
        }
        result.folds[f] = train_fold(train_set, test_set, model_config, train_config,
                                     fold_seed_of(train_config.seed, static_cast<int>(f)),
                                     static_cast<int>(f));
    };

    auto worker = [&]() {
        for (;;) {
            size_t f = cursor.fetch_add(1);
            if (f >= fold_sets.size()) return;
            try {
                run_fold(f);
            } catch (...) {
                std::lock_guard<std::mutex> g(error_lock);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };

    const size_t threads =
        std::min<size_t>(static_cast<size_t>(train_config.jobs), fold_sets.size());
    if (threads <= 1) {
        for (size_t f = 0; f < fold_sets.size(); ++f) run_fold(f);
    } else {
        std::vector<std::thread> pool;
        for (size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
        if (first_error) std::rethrow_exception(first_error);
    }

    double mean = 0.0;
    for (const FoldResult& f : result.folds) mean += f.reported_accuracy;
    mean /= static_cast<double>(result.folds.size());
    double var = 0.0;
    for (const FoldResult& f : result.folds) {
        double d = f.reported_accuracy - mean;
        var += d * d;
    }
    var /= static_cast<double>(result.folds.size());
    result.mean_accuracy = mean;
    result.std_accuracy = std::sqrt(var);
    return result;
}

std::string summary_line(const CvResult& result) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "accuracy: %.6f +- %.6f", result.mean_accuracy,
                  result.std_accuracy);
    return buf;
}

void write_report(const std::string& path, const CvResult& result) {
    std::ofstream out(path, std::ios::trunc);
    if (!out.is_open()) throw IngestionError("cannot create file: " + path);
    out << "fold,seed,epochs,selected_epoch,accuracy\n";
    for (const FoldResult& f : result.folds) {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "%d,%llu,%d,%d,%.6f\n", f.fold,
                      static_cast<unsigned long long>(f.seed), f.epochs_run, f.selected_epoch,
                      f.reported_accuracy);
        out << buf;
    }
    out << summary_line(result) << "\n";
    if (!out) throw IngestionError("write failed: " + path);
}

}  // namespace rpnet

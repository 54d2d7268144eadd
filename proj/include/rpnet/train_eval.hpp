#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rpnet/featurize.hpp"
#include "rpnet/rpnet_model.hpp"

namespace rpnet {

struct TrainConfig {
    int max_epochs = 500;
    int patience = 50;
    double initial_lr = 0.01;
    double lr_decay = 0.5;
    int decay_every = 25;
    int max_decays = 6;
    int batch_size = 32;
    int folds = 10;
    uint64_t seed = 0;
    int jobs = 1;

    void validate() const;
};

// initial_lr * lr_decay^min(floor(epoch / decay_every), max_decays).
double lr_at(const TrainConfig& config, int epoch);

struct FoldResult {
    int fold = 0;
    uint64_t seed = 0;
    std::vector<double> train_loss;     // one entry per epoch run
    std::vector<double> test_accuracy;  // evaluated after each epoch
    int epochs_run = 0;
    int selected_epoch = 0;  // argmin of train_loss
    double reported_accuracy = 0.0;
};

// Trains one fold: mini-batch Adam with the decay schedule, early stopping
// once `patience` epochs pass without a new strict training-loss minimum, and
// restoration of the best epoch's parameter snapshot for reporting. A
// non-finite loss aborts the fold with a NumericError naming fold and epoch.
// When `out_params` is given it receives the restored best parameters.
FoldResult train_fold(const std::vector<const FeatureTensor*>& train,
                      const std::vector<const FeatureTensor*>& test,
                      const RpnetConfig& model_config, const TrainConfig& train_config,
                      uint64_t fold_seed, int fold_index = 0, RpnetParams* out_params = nullptr);

// Deterministic stratified split: per-class shuffle, then round-robin dealing
// across folds. Classes smaller than the fold count trigger a warning (they
// cannot reach every fold). Returned sets partition [0, labels.size()).
std::vector<std::vector<size_t>> stratified_folds(const std::vector<int>& labels, int folds,
                                                  uint64_t seed,
                                                  std::vector<std::string>* warnings);

struct CvResult {
    double mean_accuracy = 0.0;
    double std_accuracy = 0.0;  // population deviation across folds
    std::vector<FoldResult> folds;
    std::vector<std::string> warnings;
};

CvResult cross_validate(const FeatureDataset& features, const RpnetConfig& model_config,
                        const TrainConfig& train_config);

// Fraction of graphs whose argmax class probability matches the label.
double evaluate_accuracy(RpnetParams& params, const RpnetConfig& config,
                         const std::vector<const FeatureTensor*>& graphs);

// Per-fold seed of the documented seed-splitting scheme.
uint64_t fold_seed_of(uint64_t master_seed, int fold_index);

// One header line, CSV rows fold,seed,epochs,selected_epoch,accuracy, then
// the summary line.
void write_report(const std::string& path, const CvResult& result);
std::string summary_line(const CvResult& result);

}  // namespace rpnet

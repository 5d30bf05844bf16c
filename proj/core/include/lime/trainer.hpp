#pragma once
// Negative sampling, the listwise click loss and the epoch loop with
// early stopping on validation AUC.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "lime/corpus.hpp"
#include "lime/features.hpp"
#include "lime/model.hpp"
#include "lime/netcore.hpp"

namespace lime {

struct TrainExample {
    std::size_t impression = 0;          // index into the impression list
    std::size_t positive = 0;            // candidate index
    std::vector<std::size_t> negatives;  // candidate indices, exactly M
};

struct SamplingStats {
    std::size_t examples = 0;
    std::size_t skipped = 0;      // positives dropped for lack of negatives
    std::size_t resampled = 0;    // examples padded by sampling with replacement
};

// One example per label-1 candidate. Negatives come from label-0 candidates of
// the same impression: M distinct ones when available, otherwise drawn with
// replacement (or skipped when `strict`). Positives in impressions without any
// negative are always skipped.
std::vector<TrainExample> sample_examples(std::span<const Impression> impressions, std::size_t negatives,
                                          std::uint64_t seed, bool strict = false,
                                          SamplingStats* stats = nullptr);

// -log(exp(s_pos) / sum_j exp(s_j)) with scores[0] the positive.
double click_loss(std::span<const double> scores);
// Naive form without max-subtraction; a reference for tests.
double click_loss_naive(std::span<const double> scores);

struct TrainConfig {
    double lr = 1e-3;
    std::size_t batch_size = 32;
    std::size_t max_epochs = 20;
    std::size_t patience = 3;
    std::size_t negatives = 4;        // M
    std::uint64_t seed = 1;
    bool strict_sampling = false;
};

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double dev_auc = 0.0;
    double dev_mrr = 0.0;
};

struct TrainResult {
    std::vector<EpochRecord> curve;
    std::size_t best_epoch = 0;
    double best_dev_auc = 0.0;
    double initial_loss = 0.0;        // mean loss over the first epoch's examples before any update
    SamplingStats sampling;
};

// Everything needed to turn impressions into examples for one run.
struct TrainingData {
    std::span<const Impression> train;
    std::span<const Impression> dev;
    const FeatureBuilder& features;
};

// Loss of one example on `tape`; backward is left to the caller.
net::Var example_loss(net::Tape& tape, const LimeModel& model, const ImpressionInputs& inputs,
                      const TrainExample& example);

// Mean loss over examples under the current parameters (no update).
double mean_loss(const LimeModel& model, std::span<const ImpressionInputs> inputs,
                 std::span<const TrainExample> examples);

// Minibatch Adam; after each epoch evaluates dev AUC, keeps the best
// parameters in `model`, stops after `patience` epochs without improvement.
// Throws std::runtime_error if the loss diverges.
TrainResult train(LimeModel& model, const TrainingData& data, const TrainConfig& cfg,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

void write_curve_csv(std::ostream& out, std::span<const EpochRecord> curve);

}  // namespace lime

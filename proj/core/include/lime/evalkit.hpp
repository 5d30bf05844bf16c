#pragma once
// Evaluation harness: scoring impressions with a frozen model, experiment
// runs (train + evaluate), the S1/S2/S3 ablation, the lifetime-definition
// comparison, the (alpha, beta) sweep, error coverage and explanations.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lime/corpus.hpp"
#include "lime/features.hpp"
#include "lime/metrics.hpp"
#include "lime/model.hpp"
#include "lime/timeline.hpp"
#include "lime/trainer.hpp"

namespace lime {

struct CandidateResult {
    int news = 0;
    int label = 0;
    double age_seconds = 0.0;
    double lifetime_seconds = 0.0;
    Provenance provenance = Provenance::Fixed;
    double fresh_units = 0.0;
    double base = 0.0;      // S_base
    double weight = 1.0;    // f(F_c), 1 without S3
    double score = 0.0;     // ranking score
};

struct ImpressionResult {
    std::string impression_id;
    std::string user_id;
    Timestamp time = 0;
    std::vector<CandidateResult> candidates;
    std::vector<std::size_t> ranking;   // candidate indices by descending score
};

struct EvalReport {
    MetricMeans metrics;
    std::size_t impressions = 0;
    std::vector<ImpressionResult> rankings;
    // run metadata
    std::string flags;
    std::string lifetime_definition;
    std::uint64_t seed = 0;
    std::string config_hash;

    void write_json(std::ostream& out, bool include_rankings = true) const;
};

std::vector<ImpressionInputs> build_inputs(const FeatureBuilder& features, std::span<const Impression> impressions);

// Scores every impression in ranking mode (S3 applied when enabled). Work is
// split over `threads`; results are identical for any thread count.
EvalReport evaluate(const LimeModel& model, std::span<const ImpressionInputs> inputs,
                    const StrategyFlags& flags, const FreshnessParams& freshness, std::size_t threads = 1);

// Re-scores an existing report under different freshness settings without
// touching the model (base scores are reused).
EvalReport rescore(const EvalReport& report, const StrategyFlags& flags, const FreshnessParams& freshness);

// ----------------------------------------------------------------------------
// Experiments

struct ExperimentConfig {
    ModelConfig model;                 // vocab sizes are filled from the dataset
    TrainConfig train;
    LifetimeParams lifetime;
    LifetimeDefinition definition = LifetimeDefinition::UserTopic;
    std::vector<std::uint64_t> seeds{1};
    std::size_t threads = 1;
};

struct RunOutcome {
    EvalReport test;
    TrainResult training;
};

// Holds the dataset-derived state shared by every run on one dataset.
class ExperimentContext {
public:
    ExperimentContext(const Dataset& dataset, const LifetimeParams& params);

    const Dataset& dataset() const { return dataset_; }
    const LifetimeTable& lifetimes() const { return lifetimes_; }
    const ClickTimeIndex& click_times() const { return click_times_; }
    ModelConfig model_config(ModelConfig base) const;   // fills vocab sizes

private:
    const Dataset& dataset_;
    LifetimeTable lifetimes_;   // training clicks only
    ClickTimeIndex click_times_;
};

// Trains on the train split with early stopping on dev, evaluates on test.
// `model_out`, when given, receives the trained model.
RunOutcome run_experiment(const ExperimentContext& ctx, const ExperimentConfig& cfg, std::uint64_t seed,
                          std::optional<LimeModel>* model_out = nullptr);

struct TableRow {
    std::string label;
    MetricMeans mean;                    // averaged over seeds
    std::vector<MetricMeans> per_seed;
    double auc_gain_pct = 0.0;           // relative to the first row
    double mrr_gain_pct = 0.0;
    double ndcg5_gain_pct = 0.0;
    double ndcg10_gain_pct = 0.0;
};

struct ComparisonTable {
    std::string title;
    std::vector<TableRow> rows;

    void write_text(std::ostream& out) const;
    void write_json(std::ostream& out) const;
    const TableRow& row(std::string_view label) const;
};

// base, S1, S3, S1+S2, S1+S3, S1+S2+S3.
std::vector<StrategyFlags> ablation_combinations();

// Trains and evaluates each combination over cfg.seeds. Combinations that train
// identically (S3 only acts at ranking time) share one trained model per seed.
// Throws std::invalid_argument for an illegal combination.
ComparisonTable ablate(const ExperimentContext& ctx, const ExperimentConfig& cfg,
                       std::span<const StrategyFlags> combos);

// Full model under fixed, topic-wise and user-topic lifetimes.
ComparisonTable compare_lifetimes(const ExperimentContext& ctx, const ExperimentConfig& cfg);

struct SweepPoint {
    double alpha = 0.0;
    double beta = 0.0;
    MetricMeans metrics;
};

// Re-ranks `report` at every grid point (alpha, beta in {0.0, 0.1, ..., 1.0}
// by default); no retraining.
std::vector<SweepPoint> sweep_freshness(const EvalReport& report, const std::vector<double>& alphas,
                                        const std::vector<double>& betas, const StrategyFlags& flags);
std::vector<double> unit_grid();   // 0.0, 0.1, ..., 1.0
void write_sweep_csv(std::ostream& out, std::span<const SweepPoint> points);

struct ErrorCoverage {
    std::size_t false_negatives = 0;
    std::size_t false_positives = 0;
    std::optional<double> fn_in_lifetime;    // nullopt when there are no FN cases
    std::optional<double> fp_in_lifetime;
};

// Decision rule per impression: the top-k candidates (k = number of positives)
// are predicted clicks. Lifetimes are re-resolved through `features`.
ErrorCoverage error_coverage(const EvalReport& report, const FeatureBuilder& features);

// Per-candidate breakdown in final-score order.
std::string explain(const ImpressionInputs& inputs, const LimeModel& model, const StrategyFlags& flags,
                    const FreshnessParams& freshness, const NewsTable& news);

}  // namespace lime

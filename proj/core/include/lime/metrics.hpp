#pragma once
// Per-impression ranking metrics. Ranks are by descending score with ties
// broken by input order (stable).

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace lime {

// Mann-Whitney AUC, ties count 1/2. nullopt unless both classes are present.
std::optional<double> auc(std::span<const double> scores, std::span<const int> labels);

// Reciprocal rank of the highest-ranked positive. nullopt without positives.
std::optional<double> mrr(std::span<const double> scores, std::span<const int> labels);

// Binary-gain nDCG@k with 1/log2(rank + 1) discounts. nullopt without positives.
std::optional<double> ndcg(std::span<const double> scores, std::span<const int> labels, std::size_t k);

// Candidate indices ordered by descending score, stable for ties.
std::vector<std::size_t> rank_order(std::span<const double> scores);

struct MetricMeans {
    double auc = 0.0;
    double mrr = 0.0;
    double ndcg5 = 0.0;
    double ndcg10 = 0.0;
    std::size_t auc_count = 0;          // impressions with both classes
    std::size_t ranked_count = 0;       // impressions with >= 1 positive
    std::size_t single_class = 0;       // excluded from the AUC mean
    std::size_t no_positive = 0;        // excluded from MRR / nDCG means
};

class MetricAccumulator {
public:
    void add(std::span<const double> scores, std::span<const int> labels);
    MetricMeans means() const;

private:
    double auc_sum_ = 0.0, mrr_sum_ = 0.0, n5_sum_ = 0.0, n10_sum_ = 0.0;
    MetricMeans counts_;
};

}  // namespace lime

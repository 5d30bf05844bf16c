#include "lime/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace lime {

namespace {

void check_sizes(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw std::invalid_argument("metric: scores/labels size mismatch");
}

}  // namespace

std::vector<std::size_t> rank_order(std::span<const double> scores) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return order;
}

std::optional<double> auc(std::span<const double> scores, std::span<const int> labels) {
    check_sizes(scores, labels);
    // Average ranks over ascending scores; tied groups share their mean rank.
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double pos_rank_sum = 0.0;
    std::size_t pos = 0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
        for (std::size_t k = i; k < j; ++k) {
            if (labels[order[k]] == 1) {
                pos_rank_sum += avg_rank;
                ++pos;
            }
        }
        i = j;
    }
    const std::size_t neg = scores.size() - pos;
    if (pos == 0 || neg == 0) return std::nullopt;
    const double np = static_cast<double>(pos);
    return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(neg));
}

std::optional<double> mrr(std::span<const double> scores, std::span<const int> labels) {
    check_sizes(scores, labels);
    const auto order = rank_order(scores);
    for (std::size_t r = 0; r < order.size(); ++r) {
        if (labels[order[r]] == 1) return 1.0 / static_cast<double>(r + 1);
    }
    return std::nullopt;
}

std::optional<double> ndcg(std::span<const double> scores, std::span<const int> labels, std::size_t k) {
    check_sizes(scores, labels);
    const auto order = rank_order(scores);
    const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
    if (positives == 0) return std::nullopt;
    double dcg = 0.0;
    for (std::size_t r = 0; r < std::min(k, order.size()); ++r) {
        if (labels[order[r]] == 1) dcg += 1.0 / std::log2(static_cast<double>(r + 2));
    }
    double ideal = 0.0;
    for (std::size_t r = 0; r < std::min(k, positives); ++r) ideal += 1.0 / std::log2(static_cast<double>(r + 2));
    return dcg / ideal;
}

void MetricAccumulator::add(std::span<const double> scores, std::span<const int> labels) {
    if (const auto a = auc(scores, labels)) {
        auc_sum_ += *a;
        ++counts_.auc_count;
    } else {
        ++counts_.single_class;
    }
    if (const auto m = mrr(scores, labels)) {
        mrr_sum_ += *m;
        n5_sum_ += *ndcg(scores, labels, 5);
        n10_sum_ += *ndcg(scores, labels, 10);
        ++counts_.ranked_count;
    } else {
        ++counts_.no_positive;
    }
}

MetricMeans MetricAccumulator::means() const {
    MetricMeans m = counts_;
    if (m.auc_count) m.auc = auc_sum_ / static_cast<double>(m.auc_count);
    if (m.ranked_count) {
        const auto n = static_cast<double>(m.ranked_count);
        m.mrr = mrr_sum_ / n;
        m.ndcg5 = n5_sum_ / n;
        m.ndcg10 = n10_sum_ / n;
    }
    return m;
}

}  // namespace lime

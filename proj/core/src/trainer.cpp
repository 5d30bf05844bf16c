#include "lime/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>

#include "lime/evalkit.hpp"

namespace lime {

std::vector<TrainExample> sample_examples(std::span<const Impression> impressions, std::size_t negatives,
                                          std::uint64_t seed, bool strict, SamplingStats* stats) {
    if (negatives < 1) throw std::invalid_argument("sample_examples: M must be >= 1");
    std::mt19937_64 rng(seed);
    SamplingStats local;
    std::vector<TrainExample> out;
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < impressions.size(); ++i) {
        const auto& cands = impressions[i].candidates;
        pool.clear();
        for (std::size_t c = 0; c < cands.size(); ++c) {
            if (cands[c].label == 0) pool.push_back(c);
        }
        for (std::size_t c = 0; c < cands.size(); ++c) {
            if (cands[c].label != 1) continue;
            if (pool.empty() || (strict && pool.size() < negatives)) {
                ++local.skipped;
                continue;
            }
            TrainExample ex;
            ex.impression = i;
            ex.positive = c;
            if (pool.size() >= negatives) {
                // Partial Fisher-Yates: M distinct negatives.
                auto p = pool;
                for (std::size_t k = 0; k < negatives; ++k) {
                    const auto j = k + static_cast<std::size_t>(net::uniform01(rng) * static_cast<double>(p.size() - k));
                    std::swap(p[k], p[std::min(j, p.size() - 1)]);
                    ex.negatives.push_back(p[k]);
                }
            } else {
                for (std::size_t k = 0; k < negatives; ++k) {
                    const auto j = static_cast<std::size_t>(net::uniform01(rng) * static_cast<double>(pool.size()));
                    ex.negatives.push_back(pool[std::min(j, pool.size() - 1)]);
                }
                ++local.resampled;
            }
            out.push_back(std::move(ex));
        }
    }
    local.examples = out.size();
    if (stats) *stats = local;
    return out;
}

double click_loss(std::span<const double> scores) {
    if (scores.size() < 2) throw std::invalid_argument("click_loss: need a positive and at least one negative");
    for (const double s : scores) {
        if (!std::isfinite(s)) throw std::invalid_argument("click_loss: non-finite score");
    }
    const double mx = *std::max_element(scores.begin(), scores.end());
    double sum = 0.0;
    for (const double s : scores) sum += std::exp(s - mx);
    return -(scores[0] - mx - std::log(sum));
}

double click_loss_naive(std::span<const double> scores) {
    double sum = 0.0;
    for (const double s : scores) sum += std::exp(s);
    return -std::log(std::exp(scores[0]) / sum);
}

net::Var example_loss(net::Tape& tape, const LimeModel& model, const ImpressionInputs& inputs,
                      const TrainExample& example) {
    const auto history = inputs.history_inputs();
    auto encoded = model.encode_history(tape, history);
    const auto& cfg = model.config();
    std::vector<net::Var> scores;
    scores.reserve(example.negatives.size() + 1);
    auto score_of = [&](std::size_t c) {
        const auto& cand = inputs.candidates[c];
        net::Var s = model.base_score(tape, encoded, cand.input);
        if (cfg.train_with_freshness && cfg.flags.s3_freshness) {
            s = tape.scale(s, tape.scalar_constant(freshness_weight(cand.fresh_units, cfg.freshness)));
        }
        return s;
    };
    scores.push_back(score_of(example.positive));
    for (const auto n : example.negatives) scores.push_back(score_of(n));
    return tape.softmax_nll(tape.stack(scores), 0);
}

double mean_loss(const LimeModel& model, std::span<const ImpressionInputs> inputs,
                 std::span<const TrainExample> examples) {
    if (examples.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& ex : examples) {
        net::Tape tape(model.params());
        sum += tape.scalar(example_loss(tape, model, inputs[ex.impression], ex));
    }
    return sum / static_cast<double>(examples.size());
}

TrainResult train(LimeModel& model, const TrainingData& data, const TrainConfig& cfg,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
    if (cfg.batch_size < 1) throw std::invalid_argument("train: batch size must be >= 1");
    TrainResult result;
    const auto train_inputs = build_inputs(data.features, data.train);
    const auto dev_inputs = build_inputs(data.features, data.dev);
    const auto examples = sample_examples(data.train, cfg.negatives, cfg.seed, cfg.strict_sampling, &result.sampling);
    if (examples.empty()) throw std::runtime_error("train: no training examples (no clicked candidates with negatives)");

    auto& store = model.params();
    net::Adam adam(store, net::AdamConfig{cfg.lr});
    std::mt19937_64 order_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    result.initial_loss = mean_loss(model, train_inputs, examples);
    std::vector<net::Tensor> best_values;
    std::size_t since_best = 0;
    const auto& flags = model.config().flags;
    const auto& fresh = model.config().freshness;

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), order_rng);
        // summed in example order afterwards so the epoch loss does not depend on the shuffle
        std::vector<double> losses(examples.size(), 0.0);
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            const double inv = 1.0 / static_cast<double>(end - start);
            store.zero_grad();
            for (std::size_t i = start; i < end; ++i) {
                const auto& ex = examples[order[i]];
                net::Tape tape(store, true);
                const net::Var loss = example_loss(tape, model, train_inputs[ex.impression], ex);
                const double value = tape.scalar(loss);
                if (!std::isfinite(value)) {
                    throw std::runtime_error("training diverged: non-finite loss at epoch " + std::to_string(epoch));
                }
                losses[order[i]] = value;
                tape.backward(loss, inv);
            }
            adam.step();
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(examples.size());
        if (!dev_inputs.empty()) {
            const auto report = evaluate(model, dev_inputs, flags, fresh);
            rec.dev_auc = report.metrics.auc;
            rec.dev_mrr = report.metrics.mrr;
        }
        result.curve.push_back(rec);
        if (on_epoch) on_epoch(rec);

        if (result.best_epoch == 0 || rec.dev_auc > result.best_dev_auc) {
            result.best_epoch = epoch;
            result.best_dev_auc = rec.dev_auc;
            best_values.clear();
            for (const auto& p : store.params()) best_values.push_back(p.value);
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }
    for (std::size_t i = 0; i < best_values.size(); ++i) store.params()[i].value = best_values[i];
    return result;
}

void write_curve_csv(std::ostream& out, std::span<const EpochRecord> curve) {
    out << "epoch,train_loss,dev_auc,dev_mrr\n";
    out.precision(17);
    for (const auto& r : curve) out << r.epoch << ',' << r.train_loss << ',' << r.dev_auc << ',' << r.dev_mrr << '\n';
}

}  // namespace lime

#pragma once
// Small synthetic datasets shared by the trainer and evalkit tests.

#include <memory>

#include "lime/evalkit.hpp"
#include "lime/synth.hpp"

namespace lime::testing {

inline GeneratorSpec tiny_spec(std::uint64_t seed = 1) {
    GeneratorSpec s;
    s.seed = seed;
    s.num_users = 8;
    s.num_topics = 3;
    s.topics_per_user = 2;
    s.news_per_topic = 60;
    s.vocab_size = 120;
    s.clicks_per_user = 30;
    s.horizon = 20.0 * 86400.0;
    s.max_topic_lifetime = 48.0 * 3600.0;
    s.multiplier_clamp = 2.0;
    return s;
}

inline ModelDims tiny_dims() { return ModelDims{8, 8, 4, 4, 4, 4, 6}; }

// Owns a dataset and everything a FeatureBuilder points into.
struct TinyWorld {
    SyntheticLog log;
    Dataset dataset;
    std::unique_ptr<ExperimentContext> ctx;
    std::unique_ptr<FeatureBuilder> features;

    explicit TinyWorld(const GeneratorSpec& spec = tiny_spec())
        : log(generate(spec)), dataset(to_dataset(log)) {
        ctx = std::make_unique<ExperimentContext>(dataset, LifetimeParams{});
        features = std::make_unique<FeatureBuilder>(dataset.news, dataset.vocab, ctx->lifetimes(),
                                                    LifetimeDefinition::UserTopic, ctx->click_times(),
                                                    kSecondsPerHour);
    }

    ModelConfig model_config(StrategyFlags flags = {}) const {
        ModelConfig cfg;
        cfg.dims = tiny_dims();
        cfg.flags = flags;
        return ctx->model_config(cfg);
    }

    ExperimentConfig experiment(std::size_t epochs = 2) const {
        ExperimentConfig cfg;
        cfg.model.dims = tiny_dims();
        cfg.train.max_epochs = epochs;
        return cfg;
    }
};

}  // namespace lime::testing

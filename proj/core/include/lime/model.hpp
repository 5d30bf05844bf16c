#pragma once
// The lifetime-aware matcher.
//
//   content   h_d  = tanh(W_d * mean(word_emb[title]) + b_d)
//   age       h_l  = tanh(W_n * [e_a[bucket(age)] ; e_l[bucket(lifetime)]] + b_n)
//   fused     h_dl = [h_d ; h_l]                        (S1; h_d alone otherwise)
//   topic     t    = W_t * [c[topic] ; s[subtopic]] + b_t
//   attention a_i  = softmax_i(t_C . t_i), g_i = sigmoid(W_g h_i)
//             h_a  = g_i * (a_i h_i) + (1 - g_i) * h_i  (S2; h_i otherwise)
//   user      u    = sum_i softmax_i(v . tanh(W_u h_a_i)) h_a_i
//   score     S    = u . h_c  [* f(F_c) at ranking time with S3]

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lime/netcore.hpp"
#include "lime/tempcode.hpp"

namespace lime {

struct StrategyFlags {
    bool s1_age_repr = true;
    bool s2_candidate_attention = true;
    bool s3_freshness = true;

    // S2 consumes the embeddings S1 produces; throws std::invalid_argument for S2 without S1.
    void validate() const;
    // "base", "S1", "S1+S3", "S1+S2+S3", ...
    std::string label() const;
    static StrategyFlags parse(std::string_view label);

    bool operator==(const StrategyFlags&) const = default;
};

struct ModelDims {
    std::size_t word = 300;       // word embedding
    std::size_t content = 400;    // h_d
    std::size_t bucket = 200;     // each of e_a, e_l
    std::size_t age = 128;        // h_l
    std::size_t category = 100;   // each of c, s
    std::size_t topic = 128;      // t
    std::size_t query = 200;      // additive-attention hidden size of the user encoder
};

struct ModelConfig {
    ModelDims dims;
    BucketConfig buckets;
    FreshnessParams freshness;
    StrategyFlags flags;
    bool train_with_freshness = false;   // apply f(F_c) to training scores too
    std::size_t vocab_size = 1;          // token rows incl. padding row 0
    std::size_t topic_count = 1;
    std::size_t subtopic_count = 1;

    void validate() const;
    std::size_t fused_dim() const { return dims.content + (flags.s1_age_repr ? dims.age : 0); }
    // Covers everything that shapes or feeds the trained parameters; freshness
    // parameters and S3 are ranking-time only and excluded.
    std::string architecture_hash() const;
};

// One news article as seen by a user at a point in time.
struct NewsInput {
    std::span<const int> title;
    int topic = 0;
    int subtopic = 0;
    double age_seconds = 0.0;
    double lifetime_seconds = 0.0;
};

class LimeModel {
public:
    LimeModel(ModelConfig cfg, std::uint64_t seed);

    const ModelConfig& config() const { return cfg_; }
    ModelConfig& config() { return cfg_; }
    net::ParamStore& params() { return params_; }
    const net::ParamStore& params() const { return params_; }

    // Building blocks; each records onto `tape`.
    net::Var encode_content(net::Tape& tape, std::span<const int> title) const;
    net::Var encode_age(net::Tape& tape, double age_seconds, double lifetime_seconds) const;
    net::Var fuse(net::Tape& tape, net::Var content, std::optional<net::Var> age) const;
    net::Var encode_news(net::Tape& tape, const NewsInput& news) const;
    net::Var topic_embed(net::Tape& tape, int topic, int subtopic) const;
    std::vector<net::Var> candidate_attention(net::Tape& tape, std::span<const net::Var> clicked,
                                              std::span<const net::Var> clicked_topics,
                                              net::Var candidate_topic) const;
    net::Var encode_user(net::Tape& tape, std::span<const net::Var> clicked) const;

    struct History {
        std::vector<net::Var> fused;
        std::vector<net::Var> topics;          // only with S2
        std::optional<net::Var> shared_user;   // candidate-independent user vector (no S2)
    };
    History encode_history(net::Tape& tape, std::span<const NewsInput> history) const;

    // u for a given candidate; the zero vector for an empty history.
    net::Var user_for(net::Tape& tape, History& history, const NewsInput& candidate) const;

    // S_base = u . h_c as a tape node (training path).
    net::Var base_score(net::Tape& tape, History& history, const NewsInput& candidate) const;

    // Frozen-model scoring of a candidate list; returns S_base per candidate.
    std::vector<double> base_scores(std::span<const NewsInput> history,
                                    std::span<const NewsInput> candidates) const;

    // Loads word vectors ("token v1 ... vd" per line) into matching vocabulary
    // rows. Returns the number of rows filled.
    std::size_t load_word_vectors(const std::filesystem::path& path,
                                  std::span<const std::string> vocab_tokens);

private:
    ModelConfig cfg_;
    net::ParamStore params_;
    net::ParamId word_emb_, content_w_, content_b_;
    net::ParamId age_emb_, life_emb_, age_w_, age_b_;
    net::ParamId topic_emb_, subtopic_emb_, topic_w_, topic_b_, gate_w_;
    net::ParamId user_w_, user_v_;
};

// Score used for ranking: S_base * f(F_c) with S3 (or with training-time
// freshness), S_base otherwise.
double final_score(double base, double fresh_units, const StrategyFlags& flags, const FreshnessParams& params);

}  // namespace lime

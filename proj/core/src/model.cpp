#include "lime/model.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <utility>

namespace lime {

using net::Init;
using net::Shape;
using net::Tape;
using net::Var;

void StrategyFlags::validate() const {
    if (s2_candidate_attention && !s1_age_repr) {
        throw std::invalid_argument("strategy S2 requires S1 (candidate attention operates on age-aware embeddings)");
    }
}

std::string StrategyFlags::label() const {
    std::string out;
    auto append = [&out](const char* s) {
        if (!out.empty()) out += '+';
        out += s;
    };
    if (s1_age_repr) append("S1");
    if (s2_candidate_attention) append("S2");
    if (s3_freshness) append("S3");
    return out.empty() ? "base" : out;
}

StrategyFlags StrategyFlags::parse(std::string_view label) {
    StrategyFlags f{false, false, false};
    if (label == "base" || label.empty()) return f;
    std::size_t start = 0;
    while (start <= label.size()) {
        const auto end = label.find('+', start);
        const auto part = label.substr(start, end == std::string_view::npos ? end : end - start);
        if (part == "S1" || part == "s1") {
            f.s1_age_repr = true;
        } else if (part == "S2" || part == "s2") {
            f.s2_candidate_attention = true;
        } else if (part == "S3" || part == "s3") {
            f.s3_freshness = true;
        } else {
            throw std::invalid_argument("unknown strategy '" + std::string(part) + "' in '" + std::string(label) + "'");
        }
        if (end == std::string_view::npos) break;
        start = end + 1;
    }
    return f;
}

void ModelConfig::validate() const {
    flags.validate();
    buckets.validate();
    for (const auto d : {dims.word, dims.content, dims.bucket, dims.age, dims.category, dims.topic, dims.query}) {
        if (d == 0) throw std::invalid_argument("model dimensions must be positive");
    }
    if (vocab_size < 1 || topic_count < 1 || subtopic_count < 1) {
        throw std::invalid_argument("vocabulary sizes must be positive");
    }
}

std::string ModelConfig::architecture_hash() const {
    std::ostringstream os;
    os << "word=" << dims.word << ";content=" << dims.content << ";bucket=" << dims.bucket << ";age=" << dims.age
       << ";category=" << dims.category << ";topic=" << dims.topic << ";query=" << dims.query
       << ";B=" << buckets.buckets << ";tau=" << buckets.tau << ";s1=" << flags.s1_age_repr
       << ";s2=" << flags.s2_candidate_attention << ";train_fresh=" << train_with_freshness
       << ";vocab=" << vocab_size << ";topics=" << topic_count << ";subtopics=" << subtopic_count;
    return net::hex64(net::fnv1a(os.str()));
}

LimeModel::LimeModel(ModelConfig cfg, std::uint64_t seed) : cfg_(cfg), params_(seed) {
    cfg_.validate();
    const auto& d = cfg_.dims;
    const std::size_t B = cfg_.buckets.buckets;
    // Every parameter exists regardless of flags so that ablation variants
    // sharing a seed share their initial content encoder.
    word_emb_ = params_.add("word_emb", Shape{cfg_.vocab_size, d.word}, Init::Uniform01);
    content_w_ = params_.add("content_W", Shape{d.content, d.word}, Init::Xavier);
    content_b_ = params_.add("content_b", Shape{d.content}, Init::Zero);
    age_emb_ = params_.add("age_bucket_emb", Shape{B, d.bucket}, Init::Uniform01);
    life_emb_ = params_.add("lifetime_bucket_emb", Shape{B, d.bucket}, Init::Uniform01);
    age_w_ = params_.add("age_W", Shape{d.age, 2 * d.bucket}, Init::Xavier);
    age_b_ = params_.add("age_b", Shape{d.age}, Init::Zero);
    topic_emb_ = params_.add("topic_emb", Shape{cfg_.topic_count, d.category}, Init::Uniform01);
    subtopic_emb_ = params_.add("subtopic_emb", Shape{cfg_.subtopic_count, d.category}, Init::Uniform01);
    topic_w_ = params_.add("topic_W", Shape{d.topic, 2 * d.category}, Init::Xavier);
    topic_b_ = params_.add("topic_b", Shape{d.topic}, Init::Zero);
    const std::size_t fused = cfg_.fused_dim();
    gate_w_ = params_.add("gate_W", Shape{fused, fused}, Init::Xavier);
    user_w_ = params_.add("user_W", Shape{d.query, fused}, Init::Xavier);
    user_v_ = params_.add("user_v", Shape{1, d.query}, Init::Xavier);
}

Var LimeModel::encode_content(Tape& tape, std::span<const int> title) const {
    std::vector<Var> words;
    words.reserve(title.size());
    for (const int tok : title) {
        if (tok != 0) words.push_back(tape.embed(word_emb_, tok));
    }
    if (words.empty()) words.push_back(tape.embed(word_emb_, 0));
    const Var pooled = words.size() == 1 ? words[0] : tape.mean(words);
    return tape.tanh(tape.dense(content_w_, content_b_, pooled));
}

Var LimeModel::encode_age(Tape& tape, double age_seconds, double lifetime_seconds) const {
    const auto ba = static_cast<int>(bucketize(age_seconds, cfg_.buckets));
    const auto bl = static_cast<int>(bucketize(lifetime_seconds, cfg_.buckets));
    const Var joined = tape.concat(tape.embed(age_emb_, ba), tape.embed(life_emb_, bl));
    return tape.tanh(tape.dense(age_w_, age_b_, joined));
}

Var LimeModel::fuse(Tape& tape, Var content, std::optional<Var> age) const {
    if (!cfg_.flags.s1_age_repr || !age) return content;
    return tape.concat(content, *age);
}

Var LimeModel::encode_news(Tape& tape, const NewsInput& news) const {
    const Var content = encode_content(tape, news.title);
    if (!cfg_.flags.s1_age_repr) return content;
    return fuse(tape, content, encode_age(tape, news.age_seconds, news.lifetime_seconds));
}

Var LimeModel::topic_embed(Tape& tape, int topic, int subtopic) const {
    const Var cs = tape.concat(tape.embed(topic_emb_, topic), tape.embed(subtopic_emb_, subtopic));
    return tape.dense(topic_w_, topic_b_, cs);
}

std::vector<Var> LimeModel::candidate_attention(Tape& tape, std::span<const Var> clicked,
                                                std::span<const Var> clicked_topics, Var candidate_topic) const {
    if (clicked.size() != clicked_topics.size()) {
        throw std::invalid_argument("candidate_attention: " + std::to_string(clicked.size()) + " news vs " +
                                    std::to_string(clicked_topics.size()) + " topics");
    }
    if (!cfg_.flags.s2_candidate_attention || clicked.empty()) return {clicked.begin(), clicked.end()};

    std::vector<Var> logits;
    logits.reserve(clicked.size());
    for (const Var t : clicked_topics) logits.push_back(tape.dot(candidate_topic, t));
    const Var alpha = tape.softmax(tape.stack(logits));

    std::vector<Var> out;
    out.reserve(clicked.size());
    for (std::size_t i = 0; i < clicked.size(); ++i) {
        const Var h = clicked[i];
        const Var gate = tape.sigmoid(tape.dense(gate_w_, std::nullopt, h));
        const Var attended = tape.mul(gate, tape.scale(h, tape.component(alpha, i)));
        const Var residual = tape.mul(tape.one_minus(gate), h);
        out.push_back(tape.add(attended, residual));
    }
    return out;
}

Var LimeModel::encode_user(Tape& tape, std::span<const Var> clicked) const {
    if (clicked.empty()) return tape.constant(net::Tensor(Shape{cfg_.fused_dim()}));
    if (clicked.size() == 1) return clicked[0];
    std::vector<Var> scores;
    scores.reserve(clicked.size());
    for (const Var h : clicked) {
        const Var hidden = tape.tanh(tape.dense(user_w_, std::nullopt, h));
        scores.push_back(tape.dense(user_v_, std::nullopt, hidden));
    }
    const Var weights = tape.softmax(tape.stack(scores));
    return tape.weighted_sum(weights, clicked);
}

LimeModel::History LimeModel::encode_history(Tape& tape, std::span<const NewsInput> history) const {
    History h;
    h.fused.reserve(history.size());
    for (const auto& n : history) {
        h.fused.push_back(encode_news(tape, n));
        if (cfg_.flags.s2_candidate_attention) h.topics.push_back(topic_embed(tape, n.topic, n.subtopic));
    }
    return h;
}

Var LimeModel::user_for(Tape& tape, History& history, const NewsInput& candidate) const {
    if (!cfg_.flags.s2_candidate_attention || history.fused.empty()) {
        if (!history.shared_user) history.shared_user = encode_user(tape, history.fused);
        return *history.shared_user;
    }
    const Var tc = topic_embed(tape, candidate.topic, candidate.subtopic);
    const auto attended = candidate_attention(tape, history.fused, history.topics, tc);
    return encode_user(tape, attended);
}

Var LimeModel::base_score(Tape& tape, History& history, const NewsInput& candidate) const {
    const Var u = user_for(tape, history, candidate);
    return tape.dot(u, encode_news(tape, candidate));
}

std::vector<double> LimeModel::base_scores(std::span<const NewsInput> history,
                                           std::span<const NewsInput> candidates) const {
    Tape tape(std::as_const(params_));
    auto h = encode_history(tape, history);
    std::vector<double> out;
    out.reserve(candidates.size());
    for (const auto& c : candidates) out.push_back(tape.scalar(base_score(tape, h, c)));
    return out;
}

std::size_t LimeModel::load_word_vectors(const std::filesystem::path& path,
                                         std::span<const std::string> vocab_tokens) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open word vectors: " + path.string());
    std::unordered_map<std::string, std::size_t> rows;
    for (std::size_t i = 1; i < vocab_tokens.size(); ++i) rows.emplace(vocab_tokens[i], i);
    auto& table = params_[word_emb_].value;
    std::size_t filled = 0;
    std::string line;
    std::vector<double> vec;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string word;
        ls >> word;
        const auto it = rows.find(word);
        if (it == rows.end() || it->second >= table.rows()) continue;
        vec.clear();
        double v = 0.0;
        while (ls >> v) vec.push_back(v);
        if (vec.size() != table.cols()) continue;
        std::copy(vec.begin(), vec.end(), table.row(it->second).begin());
        ++filled;
    }
    return filled;
}

double final_score(double base, double fresh_units, const StrategyFlags& flags, const FreshnessParams& params) {
    if (!flags.s3_freshness) return base;
    return base * freshness_weight(fresh_units, params);
}

}  // namespace lime

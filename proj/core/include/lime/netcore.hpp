#pragma once
// Minimal differentiable kernel: tensors, a named parameter store, a
// reverse-mode tape over the primitives the matcher needs, finite-difference
// gradient checking and Adam.
//
// Gradients of parameter-backed ops (embedding lookups, dense layers) are
// accumulated straight into the ParamStore during Tape::backward, so a tape
// never materializes a gradient for a whole embedding table.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace lime::net {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> values);

    static Tensor vector(std::vector<double> values);

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return values_.size(); }
    std::size_t rows() const { return shape_.empty() ? 1 : shape_[0]; }
    std::size_t cols() const { return shape_.size() < 2 ? 1 : shape_[1]; }

    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }
    double& at(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }

    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }
    std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols(), cols()}; }
    std::span<double> row(std::size_t r) { return {values_.data() + r * cols(), cols()}; }

    void fill(double v);
    bool all_finite() const;

    bool operator==(const Tensor&) const = default;

private:
    Shape shape_;
    std::vector<double> values_;
};

// Deterministic uniform draw in [0, 1) from a 64-bit engine.
double uniform01(std::mt19937_64& rng);

enum class Init { Zero, Uniform01, Xavier };

struct ParamId {
    std::size_t index = 0;
    bool operator==(const ParamId&) const = default;
};

struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;
};

class ParamStore {
public:
    explicit ParamStore(std::uint64_t seed = 0) : seed_(seed), rng_(seed) {}

    // Embeddings use Uniform01 (uniform in [-0.1, 0.1]); dense weights Xavier;
    // biases Zero. Throws std::invalid_argument on duplicate names.
    ParamId add(const std::string& name, Shape shape, Init init);

    std::optional<ParamId> find(std::string_view name) const;
    ParamId id(std::string_view name) const;  // throws std::out_of_range

    Parameter& operator[](ParamId id) { return params_[id.index]; }
    const Parameter& operator[](ParamId id) const { return params_[id.index]; }
    std::vector<Parameter>& params() { return params_; }
    const std::vector<Parameter>& params() const { return params_; }
    std::size_t size() const { return params_.size(); }
    std::size_t scalar_count() const;

    std::uint64_t seed() const { return seed_; }
    void zero_grad();

    // Same names, shapes and values.
    bool same_values(const ParamStore& other) const;

private:
    std::uint64_t seed_;
    std::mt19937_64 rng_;
    std::vector<Parameter> params_;
    std::unordered_map<std::string, std::size_t> index_;
};

struct Var {
    std::uint32_t id = 0;
};

// Records a computation as it is evaluated. With record_grads = false the tape
// only computes values (frozen-model inference, safe to run concurrently on
// one ParamStore).
class Tape {
public:
    explicit Tape(ParamStore& params, bool record_grads = true);
    // Inference-only tape over frozen parameters.
    explicit Tape(const ParamStore& params);

    const Tensor& value(Var v) const { return nodes_[v.id].value; }
    double scalar(Var v) const { return nodes_[v.id].value[0]; }
    std::size_t dim(Var v) const { return nodes_[v.id].value.size(); }
    std::size_t node_count() const { return nodes_.size(); }

    Var constant(Tensor t);
    Var scalar_constant(double v);

    Var embed(ParamId table, int row);
    // x -> W x (+ b); W is [out x in].
    Var dense(ParamId weight, std::optional<ParamId> bias, Var x);
    Var tanh(Var x);
    Var sigmoid(Var x);
    Var softmax(Var x);
    Var concat(Var a, Var b);
    Var mul(Var a, Var b);               // elementwise
    Var add(Var a, Var b);
    Var scale(Var x, Var s);             // s is a scalar node
    Var one_minus(Var x);
    Var dot(Var a, Var b);               // -> scalar
    Var stack(std::span<const Var> scalars);
    Var component(Var x, std::size_t i);
    Var weighted_sum(Var weights, std::span<const Var> vectors);
    Var mean(std::span<const Var> vectors);
    // -log softmax(scores)[target], max-subtracted.
    Var softmax_nll(Var scores, std::size_t target);

    // Propagates d(root)/d(.) and accumulates parameter gradients (scaled by
    // `seed`) into the ParamStore. `root` must be a scalar.
    void backward(Var root, double seed = 1.0);

private:
    enum class Op : std::uint8_t {
        Constant, Embed, Dense, Tanh, Sigmoid, Softmax, Concat, Mul, Add, Scale,
        OneMinus, Dot, Stack, Component, WeightedSum, Mean, SoftmaxNll,
    };
    struct Node {
        Op op;
        std::vector<std::uint32_t> inputs;
        Tensor value;
        Tensor grad;
        std::size_t param_a = 0;
        std::size_t param_b = 0;
        bool has_bias = false;
        std::size_t aux = 0;
    };

    Var push(Op op, std::vector<std::uint32_t> inputs, Tensor value);
    Tensor& grad_of(std::uint32_t id);
    void backward_node(Node& node);

    ParamStore& params_;
    bool record_grads_;
    std::vector<Node> nodes_;
};

struct GradCheckOptions {
    double eps = 1e-5;
    std::size_t max_coords_per_param = 64;   // random subsample per tensor
    std::uint64_t seed = 7;
    // Denominator floor: err = |analytic - numeric| / max(|analytic|, |numeric|, floor).
    double floor = 1e-6;
};

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::map<std::string, double> per_param;   // worst error per parameter
    std::size_t coords_checked = 0;
};

// `loss(store, with_grad)` must return the scalar loss and, when with_grad is
// true, run backward so the store's gradients hold d loss / d theta.
using LossFn = std::function<double(ParamStore&, bool)>;

GradCheckResult grad_check(ParamStore& store, const LossFn& loss, const GradCheckOptions& opts = {});

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class Adam {
public:
    Adam(ParamStore& store, AdamConfig cfg = {});

    // Applies one update from the store's current gradients. Throws
    // std::runtime_error on a non-finite gradient (parameters untouched).
    void step();
    std::size_t steps() const { return t_; }

private:
    ParamStore& store_;
    AdamConfig cfg_;
    std::size_t t_ = 0;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
};

// 64-bit FNV-1a, stable across platforms; used for config hashes.
std::uint64_t fnv1a(std::string_view text);
std::string hex64(std::uint64_t v);

struct CheckpointHeader {
    int version = 1;
    std::uint64_t seed = 0;
    std::string config_hash;
};

// Text header (version, seed, config hash, one line per parameter with its
// shape) followed by the raw arrays as little-endian IEEE-754 doubles.
void save_checkpoint(const std::string& path, const ParamStore& store, const CheckpointHeader& header);
// Loads values into an already-shaped store; throws on any name/shape mismatch
// or when `expected_hash` is non-empty and differs from the file's hash.
CheckpointHeader load_checkpoint(const std::string& path, ParamStore& store,
                                 std::string_view expected_hash = {});

}  // namespace lime::net

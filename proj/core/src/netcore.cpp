#include "lime/netcore.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace lime::net {

namespace {

std::size_t product(const Shape& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_string(a) + " vs " +
                                shape_string(b));
}

double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

std::string shape_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << ']';
    return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), values_(product(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), values_(std::move(values)) {
    if (values_.size() != product(shape_)) {
        throw std::invalid_argument("Tensor: " + std::to_string(values_.size()) + " values for shape " +
                                    shape_string(shape_));
    }
}

Tensor Tensor::vector(std::vector<double> values) {
    const auto n = values.size();
    return Tensor(Shape{n}, std::move(values));
}

void Tensor::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

bool Tensor::all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// --- ParamStore --------------------------------------------------------------

ParamId ParamStore::add(const std::string& name, Shape shape, Init init) {
    if (index_.contains(name)) throw std::invalid_argument("duplicate parameter name: " + name);
    Parameter p{name, Tensor(shape), Tensor(shape)};
    switch (init) {
        case Init::Zero:
            break;
        case Init::Uniform01:
            for (auto& v : p.value.values()) v = -0.1 + 0.2 * uniform01(rng_);
            break;
        case Init::Xavier: {
            const double fan_out = static_cast<double>(p.value.rows());
            const double fan_in = static_cast<double>(p.value.cols());
            const double limit = std::sqrt(6.0 / (fan_in + fan_out));
            for (auto& v : p.value.values()) v = -limit + 2.0 * limit * uniform01(rng_);
            break;
        }
    }
    index_.emplace(name, params_.size());
    params_.push_back(std::move(p));
    return ParamId{params_.size() - 1};
}

std::optional<ParamId> ParamStore::find(std::string_view name) const {
    const auto it = index_.find(std::string(name));
    if (it == index_.end()) return std::nullopt;
    return ParamId{it->second};
}

ParamId ParamStore::id(std::string_view name) const {
    if (auto p = find(name)) return *p;
    throw std::out_of_range("unknown parameter: " + std::string(name));
}

std::size_t ParamStore::scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
}

void ParamStore::zero_grad() {
    for (auto& p : params_) p.grad.fill(0.0);
}

bool ParamStore::same_values(const ParamStore& other) const {
    if (params_.size() != other.params_.size()) return false;
    for (std::size_t i = 0; i < params_.size(); ++i) {
        if (params_[i].name != other.params_[i].name || !(params_[i].value == other.params_[i].value)) {
            return false;
        }
    }
    return true;
}

// --- Tape ----------------------------------------------------------------------

Tape::Tape(ParamStore& params, bool record_grads) : params_(params), record_grads_(record_grads) {
    nodes_.reserve(256);
}

Tape::Tape(const ParamStore& params)
    : params_(const_cast<ParamStore&>(params)), record_grads_(false) {  // never written without recording
    nodes_.reserve(256);
}

Var Tape::push(Op op, std::vector<std::uint32_t> inputs, Tensor value) {
    Node n;
    n.op = op;
    n.inputs = std::move(inputs);
    n.value = std::move(value);
    nodes_.push_back(std::move(n));
    return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Tensor& Tape::grad_of(std::uint32_t id) {
    auto& n = nodes_[id];
    if (n.grad.size() != n.value.size()) n.grad = Tensor(n.value.shape());
    return n.grad;
}

Var Tape::constant(Tensor t) { return push(Op::Constant, {}, std::move(t)); }

Var Tape::scalar_constant(double v) { return constant(Tensor::vector({v})); }

Var Tape::embed(ParamId table, int row) {
    const auto& t = params_[table].value;
    if (t.rank() != 2 || row < 0 || static_cast<std::size_t>(row) >= t.rows()) {
        throw std::invalid_argument("embed: row " + std::to_string(row) + " out of range for " +
                                    params_[table].name + " " + shape_string(t.shape()));
    }
    const auto r = t.row(static_cast<std::size_t>(row));
    Var v = push(Op::Embed, {}, Tensor::vector(std::vector<double>(r.begin(), r.end())));
    nodes_[v.id].param_a = table.index;
    nodes_[v.id].aux = static_cast<std::size_t>(row);
    return v;
}

Var Tape::dense(ParamId weight, std::optional<ParamId> bias, Var x) {
    const auto& w = params_[weight].value;
    const auto& xv = value(x);
    if (w.rank() != 2 || w.cols() != xv.size()) {
        throw std::invalid_argument("dense(" + params_[weight].name + "): shape mismatch " +
                                    shape_string(w.shape()) + " vs " + shape_string(xv.shape()));
    }
    const std::size_t out = w.rows();
    std::vector<double> y(out, 0.0);
    if (bias) {
        const auto& b = params_[*bias].value;
        if (b.size() != out) shape_error("dense bias", b.shape(), Shape{out});
        std::copy(b.values().begin(), b.values().end(), y.begin());
    }
    const auto xs = xv.values();
    for (std::size_t r = 0; r < out; ++r) {
        const auto wr = w.row(r);
        double acc = 0.0;
        for (std::size_t c = 0; c < xs.size(); ++c) acc += wr[c] * xs[c];
        y[r] += acc;
    }
    Var v = push(Op::Dense, {x.id}, Tensor::vector(std::move(y)));
    auto& n = nodes_[v.id];
    n.param_a = weight.index;
    n.has_bias = bias.has_value();
    n.param_b = bias ? bias->index : 0;
    return v;
}

Var Tape::tanh(Var x) {
    Tensor y = value(x);
    for (auto& v : y.values()) v = std::tanh(v);
    return push(Op::Tanh, {x.id}, std::move(y));
}

Var Tape::sigmoid(Var x) {
    Tensor y = value(x);
    for (auto& v : y.values()) v = stable_sigmoid(v);
    return push(Op::Sigmoid, {x.id}, std::move(y));
}

Var Tape::softmax(Var x) {
    Tensor y = value(x);
    if (y.size() == 0) throw std::invalid_argument("softmax: empty input");
    const double mx = *std::max_element(y.values().begin(), y.values().end());
    double sum = 0.0;
    for (auto& v : y.values()) sum += (v = std::exp(v - mx));
    for (auto& v : y.values()) v /= sum;
    return push(Op::Softmax, {x.id}, std::move(y));
}

Var Tape::concat(Var a, Var b) {
    const auto av = value(a).values();
    const auto bv = value(b).values();
    std::vector<double> y;
    y.reserve(av.size() + bv.size());
    y.insert(y.end(), av.begin(), av.end());
    y.insert(y.end(), bv.begin(), bv.end());
    return push(Op::Concat, {a.id, b.id}, Tensor::vector(std::move(y)));
}

Var Tape::mul(Var a, Var b) {
    if (dim(a) != dim(b)) shape_error("mul", value(a).shape(), value(b).shape());
    Tensor y = value(a);
    const auto bv = value(b).values();
    for (std::size_t i = 0; i < y.size(); ++i) y[i] *= bv[i];
    return push(Op::Mul, {a.id, b.id}, std::move(y));
}

Var Tape::add(Var a, Var b) {
    if (dim(a) != dim(b)) shape_error("add", value(a).shape(), value(b).shape());
    Tensor y = value(a);
    const auto bv = value(b).values();
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[i];
    return push(Op::Add, {a.id, b.id}, std::move(y));
}

Var Tape::scale(Var x, Var s) {
    if (dim(s) != 1) shape_error("scale", value(s).shape(), Shape{1});
    Tensor y = value(x);
    const double k = scalar(s);
    for (auto& v : y.values()) v *= k;
    return push(Op::Scale, {x.id, s.id}, std::move(y));
}

Var Tape::one_minus(Var x) {
    Tensor y = value(x);
    for (auto& v : y.values()) v = 1.0 - v;
    return push(Op::OneMinus, {x.id}, std::move(y));
}

Var Tape::dot(Var a, Var b) {
    if (dim(a) != dim(b)) shape_error("dot", value(a).shape(), value(b).shape());
    const auto av = value(a).values();
    const auto bv = value(b).values();
    double acc = 0.0;
    for (std::size_t i = 0; i < av.size(); ++i) acc += av[i] * bv[i];
    return push(Op::Dot, {a.id, b.id}, Tensor::vector({acc}));
}

Var Tape::stack(std::span<const Var> scalars) {
    std::vector<double> y;
    std::vector<std::uint32_t> ins;
    y.reserve(scalars.size());
    for (const Var s : scalars) {
        if (dim(s) != 1) shape_error("stack", value(s).shape(), Shape{1});
        y.push_back(scalar(s));
        ins.push_back(s.id);
    }
    return push(Op::Stack, std::move(ins), Tensor::vector(std::move(y)));
}

Var Tape::component(Var x, std::size_t i) {
    if (i >= dim(x)) shape_error("component", value(x).shape(), Shape{i + 1});
    Var v = push(Op::Component, {x.id}, Tensor::vector({value(x)[i]}));
    nodes_[v.id].aux = i;
    return v;
}

Var Tape::weighted_sum(Var weights, std::span<const Var> vectors) {
    if (vectors.empty() || dim(weights) != vectors.size()) {
        shape_error("weighted_sum", value(weights).shape(), Shape{vectors.size()});
    }
    const std::size_t d = dim(vectors[0]);
    std::vector<double> y(d, 0.0);
    std::vector<std::uint32_t> ins{weights.id};
    const auto w = value(weights).values();
    for (std::size_t k = 0; k < vectors.size(); ++k) {
        if (dim(vectors[k]) != d) shape_error("weighted_sum", value(vectors[k]).shape(), Shape{d});
        const auto xv = value(vectors[k]).values();
        for (std::size_t i = 0; i < d; ++i) y[i] += w[k] * xv[i];
        ins.push_back(vectors[k].id);
    }
    return push(Op::WeightedSum, std::move(ins), Tensor::vector(std::move(y)));
}

Var Tape::mean(std::span<const Var> vectors) {
    if (vectors.empty()) throw std::invalid_argument("mean: no inputs");
    const std::size_t d = dim(vectors[0]);
    std::vector<double> y(d, 0.0);
    std::vector<std::uint32_t> ins;
    for (const Var v : vectors) {
        if (dim(v) != d) shape_error("mean", value(v).shape(), Shape{d});
        const auto xv = value(v).values();
        for (std::size_t i = 0; i < d; ++i) y[i] += xv[i];
        ins.push_back(v.id);
    }
    for (auto& v : y) v /= static_cast<double>(vectors.size());
    return push(Op::Mean, std::move(ins), Tensor::vector(std::move(y)));
}

Var Tape::softmax_nll(Var scores, std::size_t target) {
    const auto s = value(scores).values();
    if (target >= s.size()) shape_error("softmax_nll", value(scores).shape(), Shape{target + 1});
    if (!value(scores).all_finite()) throw std::runtime_error("softmax_nll: non-finite score");
    const double mx = *std::max_element(s.begin(), s.end());
    double sum = 0.0;
    for (const double v : s) sum += std::exp(v - mx);
    const double loss = -(s[target] - mx - std::log(sum));
    Var v = push(Op::SoftmaxNll, {scores.id}, Tensor::vector({loss}));
    nodes_[v.id].aux = target;
    return v;
}

void Tape::backward(Var root, double seed) {
    if (!record_grads_) throw std::logic_error("backward on a tape created without gradient recording");
    if (dim(root) != 1) throw std::invalid_argument("backward: root must be a scalar");
    for (auto& n : nodes_) n.grad = Tensor();
    grad_of(root.id)[0] = seed;
    for (std::size_t i = root.id + 1; i-- > 0;) {
        if (nodes_[i].grad.size() == 0) continue;
        backward_node(nodes_[i]);
    }
}

void Tape::backward_node(Node& node) {
    // `node` stays valid: grad_of never reallocates nodes_.
    const auto g = node.grad.values();
    auto in = [&](std::size_t k) -> Node& { return nodes_[node.inputs[k]]; };
    switch (node.op) {
        case Op::Constant:
            break;
        case Op::Embed: {
            auto row = params_[ParamId{node.param_a}].grad.row(node.aux);
            for (std::size_t i = 0; i < g.size(); ++i) row[i] += g[i];
            break;
        }
        case Op::Dense: {
            auto& w = params_[ParamId{node.param_a}];
            const auto x = in(0).value.values();
            auto& gx = grad_of(node.inputs[0]);
            for (std::size_t r = 0; r < g.size(); ++r) {
                const double gr = g[r];
                if (gr == 0.0) continue;
                auto gw = w.grad.row(r);
                const auto wr = w.value.row(r);
                for (std::size_t c = 0; c < x.size(); ++c) {
                    gw[c] += gr * x[c];
                    gx[c] += gr * wr[c];
                }
            }
            if (node.has_bias) {
                auto& gb = params_[ParamId{node.param_b}].grad;
                for (std::size_t r = 0; r < g.size(); ++r) gb[r] += g[r];
            }
            break;
        }
        case Op::Tanh: {
            auto& gx = grad_of(node.inputs[0]);
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double y = node.value[i];
                gx[i] += g[i] * (1.0 - y * y);
            }
            break;
        }
        case Op::Sigmoid: {
            auto& gx = grad_of(node.inputs[0]);
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double y = node.value[i];
                gx[i] += g[i] * y * (1.0 - y);
            }
            break;
        }
        case Op::Softmax: {
            auto& gx = grad_of(node.inputs[0]);
            double inner = 0.0;
            for (std::size_t i = 0; i < g.size(); ++i) inner += g[i] * node.value[i];
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += node.value[i] * (g[i] - inner);
            break;
        }
        case Op::Concat: {
            const std::size_t na = in(0).value.size();
            auto& ga = grad_of(node.inputs[0]);
            for (std::size_t i = 0; i < na; ++i) ga[i] += g[i];
            auto& gb = grad_of(node.inputs[1]);
            for (std::size_t i = na; i < g.size(); ++i) gb[i - na] += g[i];
            break;
        }
        case Op::Mul: {
            auto& ga = grad_of(node.inputs[0]);
            auto& gb = grad_of(node.inputs[1]);
            const auto a = in(0).value.values();
            const auto b = in(1).value.values();
            for (std::size_t i = 0; i < g.size(); ++i) {
                ga[i] += g[i] * b[i];
                gb[i] += g[i] * a[i];
            }
            break;
        }
        case Op::Add: {
            auto& ga = grad_of(node.inputs[0]);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
            auto& gb = grad_of(node.inputs[1]);
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
            break;
        }
        case Op::Scale: {
            const auto x = in(0).value.values();
            const double k = in(1).value[0];
            auto& gx = grad_of(node.inputs[0]);
            double gk = 0.0;
            for (std::size_t i = 0; i < g.size(); ++i) {
                gx[i] += g[i] * k;
                gk += g[i] * x[i];
            }
            grad_of(node.inputs[1])[0] += gk;
            break;
        }
        case Op::OneMinus: {
            auto& gx = grad_of(node.inputs[0]);
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] -= g[i];
            break;
        }
        case Op::Dot: {
            const double gs = g[0];
            auto& ga = grad_of(node.inputs[0]);
            auto& gb = grad_of(node.inputs[1]);
            const auto a = in(0).value.values();
            const auto b = in(1).value.values();
            for (std::size_t i = 0; i < a.size(); ++i) {
                ga[i] += gs * b[i];
                gb[i] += gs * a[i];
            }
            break;
        }
        case Op::Stack: {
            for (std::size_t k = 0; k < node.inputs.size(); ++k) grad_of(node.inputs[k])[0] += g[k];
            break;
        }
        case Op::Component: {
            grad_of(node.inputs[0])[node.aux] += g[0];
            break;
        }
        case Op::WeightedSum: {
            const auto w = in(0).value.values();
            auto& gw = grad_of(node.inputs[0]);
            for (std::size_t k = 1; k < node.inputs.size(); ++k) {
                const auto x = in(k).value.values();
                auto& gx = grad_of(node.inputs[k]);
                double acc = 0.0;
                for (std::size_t i = 0; i < g.size(); ++i) {
                    gx[i] += g[i] * w[k - 1];
                    acc += g[i] * x[i];
                }
                gw[k - 1] += acc;
            }
            break;
        }
        case Op::Mean: {
            const double inv = 1.0 / static_cast<double>(node.inputs.size());
            for (const auto id : node.inputs) {
                auto& gx = grad_of(id);
                for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * inv;
            }
            break;
        }
        case Op::SoftmaxNll: {
            const auto s = in(0).value.values();
            const double mx = *std::max_element(s.begin(), s.end());
            double sum = 0.0;
            for (const double v : s) sum += std::exp(v - mx);
            auto& gs = grad_of(node.inputs[0]);
            for (std::size_t i = 0; i < s.size(); ++i) {
                const double p = std::exp(s[i] - mx) / sum;
                gs[i] += g[0] * (p - (i == node.aux ? 1.0 : 0.0));
            }
            break;
        }
    }
}

// --- gradient check ------------------------------------------------------------

GradCheckResult grad_check(ParamStore& store, const LossFn& loss, const GradCheckOptions& opts) {
    if (!(opts.eps > 0.0)) throw std::invalid_argument("grad_check: eps must be positive");
    store.zero_grad();
    const double base = loss(store, true);
    if (!std::isfinite(base)) throw std::runtime_error("grad_check: non-finite loss");

    std::vector<Tensor> analytic;
    analytic.reserve(store.size());
    for (const auto& p : store.params()) analytic.push_back(p.grad);

    GradCheckResult result;
    std::mt19937_64 rng(opts.seed);
    for (std::size_t pi = 0; pi < store.size(); ++pi) {
        auto& param = store.params()[pi];
        const std::size_t n = param.value.size();
        std::vector<std::size_t> coords(n);
        std::iota(coords.begin(), coords.end(), std::size_t{0});
        if (n > opts.max_coords_per_param) {
            // Random subsample, preferring coordinates that receive gradient.
            std::shuffle(coords.begin(), coords.end(), rng);
            std::stable_partition(coords.begin(), coords.end(),
                                  [&](std::size_t c) { return analytic[pi][c] != 0.0; });
            coords.resize(opts.max_coords_per_param);
        }
        double worst = 0.0;
        for (const std::size_t c : coords) {
            const double orig = param.value[c];
            param.value[c] = orig + opts.eps;
            const double up = loss(store, false);
            param.value[c] = orig - opts.eps;
            const double down = loss(store, false);
            param.value[c] = orig;
            if (!std::isfinite(up) || !std::isfinite(down)) {
                throw std::runtime_error("grad_check: non-finite loss while perturbing " + param.name);
            }
            const double numeric = (up - down) / (2.0 * opts.eps);
            const double a = analytic[pi][c];
            const double denom = std::max({std::abs(a), std::abs(numeric), opts.floor});
            const double err = std::abs(a - numeric) / denom;
            worst = std::max(worst, err);
            ++result.coords_checked;
        }
        result.per_param[param.name] = worst;
        result.max_rel_error = std::max(result.max_rel_error, worst);
    }
    return result;
}

// --- Adam ------------------------------------------------------------------------

Adam::Adam(ParamStore& store, AdamConfig cfg) : store_(store), cfg_(cfg) {
    for (const auto& p : store_.params()) {
        m_.emplace_back(p.value.size(), 0.0);
        v_.emplace_back(p.value.size(), 0.0);
    }
}

void Adam::step() {
    for (const auto& p : store_.params()) {
        if (!p.grad.all_finite()) throw std::runtime_error("Adam: non-finite gradient in " + p.name);
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t pi = 0; pi < store_.size(); ++pi) {
        auto& p = store_.params()[pi];
        auto& m = m_[pi];
        auto& v = v_[pi];
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const double g = p.grad[i];
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p.value[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }
}

std::uint64_t fnv1a(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xf];
    return s;
}

}  // namespace lime::net

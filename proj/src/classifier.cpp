#include "debias/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "debias/errors.hpp"

namespace debias {

void FeatureSpace::validate() const {
    if (vocab_size <= 0) throw ConfigError("feature space: vocab_size must be > 0");
    if (pair_buckets() <= 0)
        throw ConfigError("feature_dim " + std::to_string(dim) + " must exceed 2 * vocab_size (" +
                          std::to_string(2 * vocab_size) + ")");
}

namespace {

std::uint64_t mix64(std::uint64_t x) {
    x ^= x >> 33;
    x *= 0xff51afd7ed558ccdULL;
    x ^= x >> 33;
    x *= 0xc4ceb9fe1a85ec53ULL;
    return x ^ (x >> 33);
}

}  // namespace

FeatureVector featurize(const Example& example, const FeatureSpace& space) {
    const auto v = static_cast<std::uint32_t>(space.vocab_size);
    std::vector<std::uint32_t> dims;
    const std::size_t b_skip = example.bias_token ? 1 : 0;
    dims.reserve(example.segment_a.size() + example.segment_b.size() +
                 example.segment_a.size() * example.segment_b.size());
    for (TokenId t : example.segment_a) dims.push_back(static_cast<std::uint32_t>(t));
    for (TokenId t : example.segment_b) dims.push_back(v + static_cast<std::uint32_t>(t));
    const auto buckets = static_cast<std::uint64_t>(space.pair_buckets());
    for (TokenId a : example.segment_a) {
        for (std::size_t j = b_skip; j < example.segment_b.size(); ++j) {
            const std::uint64_t key = static_cast<std::uint64_t>(a) * v + static_cast<std::uint64_t>(example.segment_b[j]);
            dims.push_back(static_cast<std::uint32_t>(space.pair_begin() + mix64(key) % buckets));
        }
    }
    std::sort(dims.begin(), dims.end());
    FeatureVector f;
    for (std::uint32_t d : dims) {
        if (!f.entries.empty() && f.entries.back().first == d) {
            f.entries.back().second += 1.0;
        } else {
            f.entries.emplace_back(d, 1.0);
        }
    }
    return f;
}

std::string_view to_string(Layer layer) {
    switch (layer) {
        case Layer::w1: return "W1";
        case Layer::b1: return "b1";
        case Layer::w2: return "W2";
        case Layer::b2: return "b2";
    }
    return "?";
}

ParamBuffer::ParamBuffer(const ModelShape& shape) : shape_(shape) {
    if (shape.input_dim <= 0 || shape.hidden <= 0 || shape.num_labels < 2)
        throw ConfigError("invalid model shape");
    data_.assign(offset(Layer::b2) + size(Layer::b2), 0.0);
}

std::size_t ParamBuffer::size(Layer layer) const {
    const auto d = static_cast<std::size_t>(shape_.input_dim);
    const auto h = static_cast<std::size_t>(shape_.hidden);
    const auto k = static_cast<std::size_t>(shape_.num_labels);
    switch (layer) {
        case Layer::w1: return d * h;
        case Layer::b1: return h;
        case Layer::w2: return h * k;
        case Layer::b2: return k;
    }
    return 0;
}

std::size_t ParamBuffer::offset(Layer layer) const {
    switch (layer) {
        case Layer::w1: return 0;
        case Layer::b1: return size(Layer::w1);
        case Layer::w2: return size(Layer::w1) + size(Layer::b1);
        case Layer::b2: return size(Layer::w1) + size(Layer::b1) + size(Layer::w2);
    }
    return 0;
}

ModelParams ModelParams::initialized(const ModelShape& shape, Rng& rng) {
    ModelParams p(shape);
    const double r1 = 1.0 / std::sqrt(static_cast<double>(shape.input_dim));
    const double r2 = 1.0 / std::sqrt(static_cast<double>(shape.hidden));
    for (double& w : p.layer(Layer::w1)) w = rng.uniform(-r1, r1);
    for (double& w : p.layer(Layer::w2)) w = rng.uniform(-r2, r2);
    return p;
}

bool ModelParams::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

Gradients::Gradients(const ModelShape& shape)
    : ParamBuffer(shape), row_active_(static_cast<std::size_t>(shape.input_dim), 0) {}

void Gradients::mark_row(std::uint32_t row) {
    if (!row_active_[row]) {
        row_active_[row] = 1;
        active_rows_.push_back(row);
    }
}

void Gradients::clear() {
    for (std::uint32_t row : active_rows_) {
        auto r = w1_row(row);
        std::fill(r.begin(), r.end(), 0.0);
        row_active_[row] = 0;
    }
    active_rows_.clear();
    const std::size_t tail = offset(Layer::b1);
    std::fill(data_.begin() + static_cast<std::ptrdiff_t>(tail), data_.end(), 0.0);
}

void Gradients::scale(double factor) {
    for (std::uint32_t row : active_rows_) {
        for (double& g : w1_row(row)) g *= factor;
    }
    for (std::size_t i = offset(Layer::b1); i < data_.size(); ++i) data_[i] *= factor;
}

bool Gradients::all_finite() const {
    auto finite = [](double x) { return std::isfinite(x); };
    for (std::uint32_t row : active_rows_) {
        auto r = w1_row(row);
        if (!std::all_of(r.begin(), r.end(), finite)) return false;
    }
    return std::all_of(data_.begin() + static_cast<std::ptrdiff_t>(offset(Layer::b1)), data_.end(), finite);
}

ProbVector softmax(std::span<const double> logits) {
    const double mx = *std::max_element(logits.begin(), logits.end());
    ProbVector p(logits.size());
    double sum = 0.0;
    for (std::size_t j = 0; j < logits.size(); ++j) {
        p[j] = std::exp(logits[j] - mx);
        sum += p[j];
    }
    for (double& x : p) x /= sum;
    return p;
}

ForwardPass forward_pass(const ModelParams& params, const FeatureVector& f) {
    const auto& shape = params.shape();
    const auto h = static_cast<std::size_t>(shape.hidden);
    const auto k = static_cast<std::size_t>(shape.num_labels);
    ForwardPass fp;
    auto b1 = params.layer(Layer::b1);
    fp.pre.assign(b1.begin(), b1.end());
    for (const auto& [dim, value] : f.entries) {
        if (dim >= static_cast<std::uint32_t>(shape.input_dim))
            throw DataError("feature index " + std::to_string(dim) + " outside model input dimension " +
                            std::to_string(shape.input_dim));
        auto row = params.w1_row(dim);
        for (std::size_t j = 0; j < h; ++j) fp.pre[j] += value * row[j];
    }
    fp.hidden.resize(h);
    for (std::size_t j = 0; j < h; ++j) {
        if (!std::isfinite(fp.pre[j])) throw NumericError("non-finite activation in hidden layer (W1/b1)");
        fp.hidden[j] = fp.pre[j] > 0.0 ? fp.pre[j] : 0.0;
    }
    auto b2 = params.layer(Layer::b2);
    auto w2 = params.layer(Layer::w2);
    fp.logits.assign(b2.begin(), b2.end());
    for (std::size_t j = 0; j < h; ++j) {
        const double a = fp.hidden[j];
        if (a == 0.0) continue;
        for (std::size_t c = 0; c < k; ++c) fp.logits[c] += a * w2[j * k + c];
    }
    for (double z : fp.logits) {
        if (!std::isfinite(z)) throw NumericError("non-finite logit in output layer (W2/b2)");
    }
    fp.probs = softmax(fp.logits);
    return fp;
}

ProbVector forward(const ModelParams& params, const FeatureVector& f) { return forward_pass(params, f).probs; }

namespace {

// Log-softmax of logits + offset, and the matching probabilities.
void combined_log_probs(const ForwardPass& fp, const LossSpec& spec, std::vector<double>& log_q,
                        std::vector<double>& q) {
    const std::size_t k = fp.logits.size();
    if (!spec.logit_offset.empty() && spec.logit_offset.size() != k)
        throw DataError("logit offset has wrong length");
    if (spec.target.size() != k) throw DataError("target has wrong length");
    log_q.resize(k);
    for (std::size_t c = 0; c < k; ++c) log_q[c] = fp.logits[c] + (spec.logit_offset.empty() ? 0.0 : spec.logit_offset[c]);
    const double mx = *std::max_element(log_q.begin(), log_q.end());
    double sum = 0.0;
    for (double z : log_q) sum += std::exp(z - mx);
    const double lse = mx + std::log(sum);
    q.resize(k);
    for (std::size_t c = 0; c < k; ++c) {
        log_q[c] -= lse;
        q[c] = std::exp(log_q[c]);
    }
}

LossValue loss_from(const std::vector<double>& log_q, const LossSpec& spec) {
    static const double log_floor = std::log(kProbFloor);
    if (spec.weight < 0.0) throw DataError("loss weight must be >= 0");
    LossValue out;
    if (spec.weight == 0.0) return out;
    double acc = 0.0;
    for (std::size_t c = 0; c < log_q.size(); ++c) {
        const double t = spec.target[c];
        if (t == 0.0) continue;
        double lq = log_q[c];
        if (lq < log_floor) {
            lq = log_floor;
            out.clamped = true;
        }
        acc -= t * lq;
    }
    out.loss = spec.weight * acc;
    return out;
}

}  // namespace

LossValue evaluate_loss(const ModelParams& params, const FeatureVector& f, const LossSpec& spec) {
    const ForwardPass fp = forward_pass(params, f);
    std::vector<double> log_q, q;
    combined_log_probs(fp, spec, log_q, q);
    LossValue value = loss_from(log_q, spec);
    value.p_d = fp.probs;
    return value;
}

LossValue accumulate_loss_grad(const ModelParams& params, const FeatureVector& f, const LossSpec& spec,
                               Gradients& grads, double scale) {
    const ForwardPass fp = forward_pass(params, f);
    std::vector<double> log_q, q;
    combined_log_probs(fp, spec, log_q, q);
    LossValue value = loss_from(log_q, spec);
    value.p_d = fp.probs;
    const double w = spec.weight * scale;
    if (w == 0.0) return value;

    const auto& shape = params.shape();
    const auto h = static_cast<std::size_t>(shape.hidden);
    const auto k = static_cast<std::size_t>(shape.num_labels);
    double target_mass = 0.0;
    for (double t : spec.target) target_mass += t;

    // dL/dz_c = w * (q_c * sum(target) - target_c)
    std::vector<double> dz(k);
    for (std::size_t c = 0; c < k; ++c) dz[c] = w * (q[c] * target_mass - spec.target[c]);

    auto gw2 = grads.layer(Layer::w2);
    auto gb2 = grads.layer(Layer::b2);
    auto w2 = params.layer(Layer::w2);
    for (std::size_t c = 0; c < k; ++c) gb2[c] += dz[c];
    std::vector<double> dpre(h, 0.0);
    for (std::size_t j = 0; j < h; ++j) {
        const double a = fp.hidden[j];
        double back = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            gw2[j * k + c] += a * dz[c];
            back += w2[j * k + c] * dz[c];
        }
        dpre[j] = fp.pre[j] > 0.0 ? back : 0.0;
    }
    auto gb1 = grads.layer(Layer::b1);
    for (std::size_t j = 0; j < h; ++j) gb1[j] += dpre[j];
    for (const auto& [dim, value] : f.entries) {
        grads.mark_row(dim);
        auto row = grads.w1_row(dim);
        for (std::size_t j = 0; j < h; ++j) row[j] += value * dpre[j];
    }
    return value;
}

std::pair<LossValue, Gradients> loss_and_grad(const ModelParams& params, const FeatureVector& f,
                                              const LossSpec& spec) {
    Gradients g(params.shape());
    LossValue v = accumulate_loss_grad(params, f, spec, g);
    return {v, std::move(g)};
}

double grad_check(const ModelParams& params, const FeatureVector& f, const LossSpec& spec,
                  const GradCheckOptions& opts) {
    auto [value, analytic] = loss_and_grad(params, f, spec);
    (void)value;
    return grad_check_against(params, f, spec, analytic, opts);
}

double grad_check_against(const ModelParams& params, const FeatureVector& f, const LossSpec& spec,
                          const Gradients& analytic, const GradCheckOptions& opts) {
    if (!(opts.eps > 0.0)) throw ConfigError("grad_check: eps must be > 0");
    // Relative error |a - n| / max(|a|, |n|, floor); the floor keeps
    // coordinates with vanishing true gradient from amplifying round-off.
    constexpr double floor = 1e-6;
    Rng rng(derive_seed(opts.seed, "gradcheck"));
    ModelParams probe = params;
    double worst = 0.0;

    auto check = [&](std::size_t idx) {
        const double saved = probe.all()[idx];
        probe.all()[idx] = saved + opts.eps;
        const double up = evaluate_loss(probe, f, spec).loss;
        probe.all()[idx] = saved - opts.eps;
        const double down = evaluate_loss(probe, f, spec).loss;
        probe.all()[idx] = saved;
        const double numeric = (up - down) / (2.0 * opts.eps);
        const double a = analytic.all()[idx];
        const double denom = std::max({std::abs(a), std::abs(numeric), floor});
        worst = std::max(worst, std::abs(a - numeric) / denom);
    };

    const auto per_layer = static_cast<std::size_t>(std::max(opts.samples_per_layer, 1));
    for (Layer layer : kAllLayers) {
        if (opts.bias_layers_only && (layer == Layer::w1 || layer == Layer::w2)) continue;
        const std::size_t base = params.offset(layer);
        const std::size_t n = params.size(layer);
        if (n <= per_layer) {
            for (std::size_t i = 0; i < n; ++i) check(base + i);
            continue;
        }
        std::size_t random_draws = per_layer;
        if (layer == Layer::w1 && !f.entries.empty()) {
            // Half the W1 budget goes to rows the input actually touches.
            const std::size_t h = static_cast<std::size_t>(params.shape().hidden);
            const std::size_t focused = per_layer / 2;
            for (std::size_t s = 0; s < focused; ++s) {
                const auto& entry = f.entries[rng.below(f.entries.size())];
                check(base + entry.first * h + rng.below(h));
            }
            random_draws = per_layer - focused;
        }
        for (std::size_t s = 0; s < random_draws; ++s) check(base + rng.below(n));
    }
    return worst;
}

std::string_view to_string(OptimizerKind kind) { return kind == OptimizerKind::sgd ? "sgd" : "adam"; }

OptimizerKind parse_optimizer(std::string_view text) {
    if (text == "sgd") return OptimizerKind::sgd;
    if (text == "adam") return OptimizerKind::adam;
    throw ConfigError("unknown optimizer '" + std::string(text) + "' (allowed: sgd, adam)");
}

OptState OptState::make(OptimizerKind kind, double lr, const ModelShape& shape) {
    OptState s;
    s.kind = kind;
    s.learning_rate = lr;
    if (kind == OptimizerKind::adam) {
        const std::size_t n = ParamBuffer(shape).total_size();
        s.first_moment.assign(n, 0.0);
        s.second_moment.assign(n, 0.0);
    }
    return s;
}

void opt_step(ModelParams& params, const Gradients& grads, OptState& state) {
    if (!(params.shape() == grads.shape())) throw SchemaError("opt_step: gradient shape mismatch");
    if (!grads.all_finite()) throw NumericError("opt_step: non-finite gradient, step aborted");
    ++state.step;
    const double lr = state.learning_rate;
    auto p = params.all();
    auto g = grads.all();
    if (state.kind == OptimizerKind::sgd) {
        if (lr == 0.0) return;
        const auto h = static_cast<std::size_t>(params.shape().hidden);
        for (std::uint32_t row : grads.active_rows()) {
            const std::size_t base = static_cast<std::size_t>(row) * h;
            for (std::size_t j = 0; j < h; ++j) p[base + j] -= lr * g[base + j];
        }
        for (std::size_t i = params.offset(Layer::b1); i < p.size(); ++i) p[i] -= lr * g[i];
        return;
    }
    if (state.first_moment.size() != p.size()) throw SchemaError("opt_step: optimizer state shape mismatch");
    const double b1 = state.beta1;
    const double b2 = state.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < p.size(); ++i) {
        double& m = state.first_moment[i];
        double& v = state.second_moment[i];
        m = b1 * m + (1.0 - b1) * g[i];
        v = b2 * v + (1.0 - b2) * g[i] * g[i];
        p[i] -= lr * (m / c1) / (std::sqrt(v / c2) + state.epsilon);
    }
}

}  // namespace debias

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "debias/rng.hpp"
#include "debias/synthgen.hpp"

namespace debias {

using ProbVector = std::vector<double>;

// Floor applied before any log or power of a probability.
inline constexpr double kProbFloor = 1e-12;

// Feature layout: [0, V) segment_a bag, [V, 2V) segment_b bag (the bias
// token lands on its own code's dimension there), [2V, dim) hashed ordered
// (a-token, b-token) co-occurrences. The bias token never enters a pair.
struct FeatureSpace {
    int vocab_size = 0;
    int dim = 0;

    int pair_begin() const { return 2 * vocab_size; }
    int pair_buckets() const { return dim - pair_begin(); }
    void validate() const;
};

struct FeatureVector {
    // Sorted by index, no duplicates, all values > 0.
    std::vector<std::pair<std::uint32_t, double>> entries;

    bool empty() const { return entries.empty(); }
    bool operator==(const FeatureVector&) const = default;
};

FeatureVector featurize(const Example& example, const FeatureSpace& space);

struct ModelShape {
    int input_dim = 0;
    int hidden = 64;
    int num_labels = 3;

    bool operator==(const ModelShape&) const = default;
};

enum class Layer { w1, b1, w2, b2 };
inline constexpr Layer kAllLayers[] = {Layer::w1, Layer::b1, Layer::w2, Layer::b2};
std::string_view to_string(Layer layer);

// All parameters live in one flat buffer: W1 (D x H, row per input dim),
// b1 (H), W2 (H x K, row per hidden unit), b2 (K). Gradients share the layout.
class ParamBuffer {
public:
    ParamBuffer() = default;
    explicit ParamBuffer(const ModelShape& shape);

    const ModelShape& shape() const { return shape_; }
    std::size_t offset(Layer layer) const;
    std::size_t size(Layer layer) const;
    std::size_t total_size() const { return data_.size(); }

    std::span<double> layer(Layer l) { return {data_.data() + offset(l), size(l)}; }
    std::span<const double> layer(Layer l) const { return {data_.data() + offset(l), size(l)}; }
    std::span<double> all() { return data_; }
    std::span<const double> all() const { return data_; }

    std::span<double> w1_row(std::size_t input) { return {data_.data() + input * shape_.hidden, static_cast<std::size_t>(shape_.hidden)}; }
    std::span<const double> w1_row(std::size_t input) const { return {data_.data() + input * shape_.hidden, static_cast<std::size_t>(shape_.hidden)}; }

    bool operator==(const ParamBuffer&) const = default;

protected:
    ModelShape shape_;
    std::vector<double> data_;
};

class ModelParams : public ParamBuffer {
public:
    using ParamBuffer::ParamBuffer;

    // Symmetric uniform in +-1/sqrt(fan_in) for weights, zero biases.
    static ModelParams initialized(const ModelShape& shape, Rng& rng);
    static ModelParams zeros(const ModelShape& shape) { return ModelParams(shape); }

    bool all_finite() const;
};

// Dense gradient buffer. Rows of W1 touched since the last clear() are tracked
// so that clearing and plain SGD stay proportional to the active inputs.
class Gradients : public ParamBuffer {
public:
    Gradients() = default;
    explicit Gradients(const ModelShape& shape);

    void clear();
    void scale(double factor);
    void mark_row(std::uint32_t row);
    const std::vector<std::uint32_t>& active_rows() const { return active_rows_; }
    bool all_finite() const;

private:
    std::vector<std::uint32_t> active_rows_;
    std::vector<char> row_active_;
};

struct ForwardPass {
    std::vector<double> pre;     // hidden pre-activations
    std::vector<double> hidden;  // rectified
    std::vector<double> logits;
    ProbVector probs;
};

// Numerically stable softmax (max subtracted before exponentiation).
ProbVector softmax(std::span<const double> logits);

ForwardPass forward_pass(const ModelParams& params, const FeatureVector& f);
ProbVector forward(const ModelParams& params, const FeatureVector& f);

// Soft-target cross entropy over softmax(logits + logit_offset):
//   loss = -weight * sum_j target_j * log q_j
// An empty offset means none. A non-zero offset adds a fixed expert's
// log-probabilities to the logits before normalisation.
struct LossSpec {
    ProbVector target;
    double weight = 1.0;
    std::vector<double> logit_offset;
};

struct LossValue {
    double loss = 0.0;
    bool clamped = false;  // some q_j with target_j > 0 fell under kProbFloor
    ProbVector p_d;        // the model's own softmax output
};

// Adds scale * dloss/dparams into grads; returns the (unscaled) loss.
LossValue accumulate_loss_grad(const ModelParams& params, const FeatureVector& f, const LossSpec& spec,
                               Gradients& grads, double scale = 1.0);

std::pair<LossValue, Gradients> loss_and_grad(const ModelParams& params, const FeatureVector& f,
                                              const LossSpec& spec);

// Loss only, no gradients.
LossValue evaluate_loss(const ModelParams& params, const FeatureVector& f, const LossSpec& spec);

struct GradCheckOptions {
    double eps = 1e-5;
    // Coordinates per layer (all of them when the layer is smaller).
    int samples_per_layer = 64;
    std::uint64_t seed = 0;
    bool bias_layers_only = false;
};

// Worst relative error between the analytic gradient and central differences
// on a random subsample of coordinates.
double grad_check(const ModelParams& params, const FeatureVector& f, const LossSpec& spec,
                  const GradCheckOptions& opts = {});

// Same check against a caller-supplied analytic gradient.
double grad_check_against(const ModelParams& params, const FeatureVector& f, const LossSpec& spec,
                          const Gradients& analytic, const GradCheckOptions& opts = {});

enum class OptimizerKind { sgd, adam };
std::string_view to_string(OptimizerKind kind);
OptimizerKind parse_optimizer(std::string_view text);

struct OptState {
    OptimizerKind kind = OptimizerKind::sgd;
    double learning_rate = 0.1;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::vector<double> first_moment;
    std::vector<double> second_moment;
    std::int64_t step = 0;

    static OptState make(OptimizerKind kind, double lr, const ModelShape& shape);
};

// Throws NumericError (params untouched) on non-finite gradients.
void opt_step(ModelParams& params, const Gradients& grads, OptState& state);

}  // namespace debias

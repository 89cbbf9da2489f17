#include "debias/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "debias/errors.hpp"
#include "debias/eval.hpp"
#include "debias/rng.hpp"

namespace debias {

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
    if (eval_every < 1) throw ConfigError("train.eval_every must be >= 1");
    if (eval_limit < 0) throw ConfigError("train.eval_limit must be >= 0");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
        throw ConfigError("train.learning_rate must be a finite value >= 0");
    if (hidden < 1) throw ConfigError("model.hidden must be >= 1");
    if (teacher_epochs < 0) throw ConfigError("train.teacher_epochs must be >= 0");
    if (!(example_weight >= 0.0)) throw ConfigError("train.example_weight must be >= 0");
    if (!(anneal.minimum >= 0.0 && anneal.minimum <= 1.0)) throw ConfigError("anneal.a must be in [0,1]");
}

std::int64_t planned_steps(std::size_t n, const TrainConfig& cfg) {
    const auto b = static_cast<std::size_t>(cfg.batch_size);
    return static_cast<std::int64_t>((n + b - 1) / b) * cfg.epochs;
}

std::array<double, 5> loss_percentiles(std::vector<double> losses) {
    if (losses.empty()) throw DataError("loss_percentiles: empty batch");
    std::sort(losses.begin(), losses.end());
    const std::size_t n = losses.size();
    std::array<double, 5> out{};
    constexpr std::array<int, 5> ranks{0, 25, 50, 75, 100};
    for (std::size_t i = 0; i < ranks.size(); ++i) {
        // Nearest rank: ceil(p/100 * n), at least 1.
        const auto r = static_cast<std::size_t>(std::ceil(ranks[i] / 100.0 * static_cast<double>(n)));
        out[i] = losses[std::max<std::size_t>(r, 1) - 1];
    }
    return out;
}

Classifier train_teacher(const Dataset& train, const TrainConfig& cfg) {
    TrainConfig teacher_cfg = cfg;
    teacher_cfg.method = DebiasMethod::baseline_ce;
    teacher_cfg.anneal.enabled = false;
    teacher_cfg.example_weight = 1.0;
    if (cfg.teacher_epochs > 0) teacher_cfg.epochs = cfg.teacher_epochs;
    teacher_cfg.seed = derive_seed(cfg.seed, "teacher");
    return train_main(train, nullptr, teacher_cfg).model;
}

TeacherOutputs teacher_outputs(const Classifier& teacher, const Dataset& data) {
    TeacherOutputs out;
    out.reserve(data.size());
    for (const auto& ex : data.examples) out.emplace(ex.id, teacher.predict(ex));
    return out;
}

TrainResult train_main(const Dataset& train, const BiasWeights* weights, const TrainConfig& cfg,
                       const EvalSuite* eval, const TeacherOutputs* teacher) {
    cfg.validate();
    if (train.examples.empty()) throw DataError("training set is empty");
    const int k = train.num_labels;
    const bool needs_weights = cfg.method != DebiasMethod::baseline_ce;
    if (needs_weights && weights == nullptr)
        throw ConfigError(std::string("method ") + std::string(to_string(cfg.method)) + " requires bias weights");
    if (cfg.method == DebiasMethod::conf_reg && teacher == nullptr)
        throw ConfigError("method conf_reg requires a trained teacher");
    if (needs_weights && weights->num_labels() != 0 && weights->num_labels() != k)
        throw SchemaError("bias weights have " + std::to_string(weights->num_labels()) + " labels, dataset has " +
                          std::to_string(k));

    const FeatureSpace space{train.vocab_size, cfg.feature_dim};
    space.validate();
    const std::size_t n = train.examples.size();
    std::vector<FeatureVector> features(n);
    std::vector<const BiasEntry*> bias(n, nullptr);
    std::vector<const ProbVector*> teacher_p(n, nullptr);
    for (std::size_t i = 0; i < n; ++i) {
        const Example& ex = train.examples[i];
        if (ex.label < 0 || ex.label >= k) throw DataError("example " + std::to_string(ex.id) + " has label out of range");
        features[i] = featurize(ex, space);
        if (needs_weights) {
            bias[i] = weights->find(ex.id);
            if (bias[i] == nullptr) throw DataError("missing p_b for example id " + std::to_string(ex.id));
        }
        if (cfg.method == DebiasMethod::conf_reg) {
            auto it = teacher->find(ex.id);
            if (it == teacher->end()) throw DataError("missing teacher output for example id " + std::to_string(ex.id));
            teacher_p[i] = &it->second;
        }
    }

    const ModelShape shape{space.dim, cfg.hidden, k};
    Rng init_rng = Rng::stream(cfg.seed, "init");
    Rng shuffle_rng = Rng::stream(cfg.seed, "shuffle");
    TrainResult result{Classifier{space, ModelParams::initialized(shape, init_rng), 0}, {}};
    ModelParams& params = result.model.params;
    OptState opt = OptState::make(cfg.optimizer, cfg.learning_rate, shape);
    Gradients grads(shape);

    const std::int64_t total = planned_steps(n, cfg);
    AnnealSchedule sched = cfg.anneal;
    // The first step runs at alpha = 1 and the last at alpha = a.
    sched.total_steps = std::max<std::int64_t>(1, total - 1);

    const std::size_t eval_limit = static_cast<std::size_t>(cfg.eval_limit);
    result.log.eval_mode = eval_limit == 0 ? "full" : "subsample:" + std::to_string(eval_limit);
    result.log.records.reserve(static_cast<std::size_t>(total));

    auto build_spec = [&](std::size_t i, double alpha) -> LossSpec {
        const Example& ex = train.examples[i];
        switch (cfg.method) {
            case DebiasMethod::baseline_ce: return baseline_spec(ex.label, k, cfg.example_weight);
            case DebiasMethod::reweight: {
                const ProbVector p = anneal_probs(bias[i]->p_b, alpha);
                return reweight_spec(ex.label, k, std::clamp(p[static_cast<std::size_t>(ex.label)], 0.0, 1.0));
            }
            case DebiasMethod::poe: return poe_spec(ex.label, anneal_probs(bias[i]->p_b, alpha));
            case DebiasMethod::conf_reg: {
                const ProbVector p = anneal_probs(bias[i]->p_b, alpha);
                return confreg_spec(*teacher_p[i], std::clamp(p[static_cast<std::size_t>(ex.label)], 0.0, 1.0));
            }
        }
        throw ConfigError("unhandled method");
    };

    std::vector<std::size_t> order(n);
    std::vector<double> gold_losses;
    std::int64_t step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        shuffle_rng.shuffle(std::span<std::size_t>(order));
        for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(n, start + static_cast<std::size_t>(cfg.batch_size));
            const double inv = 1.0 / static_cast<double>(end - start);
            const double alpha = anneal_alpha(step, sched);
            grads.clear();
            gold_losses.clear();
            MetricsRecord rec;
            rec.alpha = alpha;
            double loss_sum = 0.0;
            for (std::size_t b = start; b < end; ++b) {
                const std::size_t i = order[b];
                const LossSpec spec = build_spec(i, alpha);
                const LossValue v = accumulate_loss_grad(params, features[i], spec, grads, inv);
                if (!std::isfinite(v.loss))
                    throw NumericError("non-finite loss at step " + std::to_string(step) + " on example " +
                                       std::to_string(train.examples[i].id));
                loss_sum += v.loss;
                rec.clamped += v.clamped ? 1 : 0;
                const double p_gold = v.p_d[static_cast<std::size_t>(train.examples[i].label)];
                gold_losses.push_back(-std::log(std::max(p_gold, kProbFloor)));
            }
            opt_step(params, grads, opt);
            ++step;
            rec.step = step;
            rec.mean_loss = loss_sum * inv;
            rec.loss_percentiles = loss_percentiles(gold_losses);
            if (eval != nullptr && (step % cfg.eval_every == 0 || step == total)) {
                rec.accuracy = evaluate_suite(classifier_predictor(result.model), *eval, eval_limit);
            }
            result.log.records.push_back(rec);
        }
    }
    if (!params.all_finite()) throw NumericError("training diverged: non-finite parameters");
    result.model.step = step;
    return result;
}

}  // namespace debias

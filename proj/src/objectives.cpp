#include "debias/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "debias/errors.hpp"

namespace debias {

std::string_view to_string(DebiasMethod method) {
    switch (method) {
        case DebiasMethod::baseline_ce: return "baseline_ce";
        case DebiasMethod::reweight: return "reweight";
        case DebiasMethod::poe: return "poe";
        case DebiasMethod::conf_reg: return "conf_reg";
    }
    return "baseline_ce";
}

DebiasMethod parse_method(std::string_view text) {
    if (text == "baseline_ce" || text == "baseline") return DebiasMethod::baseline_ce;
    if (text == "reweight") return DebiasMethod::reweight;
    if (text == "poe") return DebiasMethod::poe;
    if (text == "conf_reg") return DebiasMethod::conf_reg;
    throw ConfigError("unknown method '" + std::string(text) +
                      "' (allowed: baseline_ce, reweight, poe, conf_reg)");
}

void AnnealSchedule::validate() const {
    if (!(minimum >= 0.0 && minimum <= 1.0)) throw ConfigError("anneal.a must be in [0,1]");
    if (total_steps < 1) throw ConfigError("anneal total steps must be >= 1");
}

ProbVector one_hot(int label, int num_labels) {
    if (label < 0 || label >= num_labels) throw DataError("label " + std::to_string(label) + " out of range");
    ProbVector p(static_cast<std::size_t>(num_labels), 0.0);
    p[static_cast<std::size_t>(label)] = 1.0;
    return p;
}

ProbVector uniform_probs(int num_labels) {
    return ProbVector(static_cast<std::size_t>(num_labels), 1.0 / num_labels);
}

double anneal_alpha(std::int64_t t, const AnnealSchedule& sched) {
    if (!sched.enabled) return 1.0;
    if (t > sched.total_steps) {
        std::cerr << "warning: anneal step " << t << " beyond T=" << sched.total_steps << ", clamped\n";
        return sched.minimum;
    }
    if (t < 0) t = 0;
    return 1.0 - static_cast<double>(t) * (1.0 - sched.minimum) / static_cast<double>(sched.total_steps);
}

namespace {

ProbVector power_normalize(const ProbVector& p, double exponent) {
    ProbVector out(p.size());
    double sum = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) {
        out[j] = std::pow(std::max(p[j], kProbFloor), exponent);
        sum += out[j];
    }
    for (double& x : out) x /= sum;
    return out;
}

}  // namespace

ProbVector anneal_probs(const ProbVector& p_b, double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("anneal alpha must be in [0,1]");
    if (alpha == 1.0) return p_b;
    return power_normalize(p_b, alpha);
}

ProbVector scale_teacher(const ProbVector& p_t, double beta) {
    if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("teacher scaling beta must be in [0,1]");
    if (beta == 0.0) return p_t;
    return power_normalize(p_t, 1.0 - beta);
}

LossSpec baseline_spec(int label, int num_labels, double weight) {
    return LossSpec{one_hot(label, num_labels), weight, {}};
}

LossSpec reweight_spec(int label, int num_labels, double p_b_correct) {
    if (!(p_b_correct >= 0.0 && p_b_correct <= 1.0)) throw DataError("p_b_correct must be in [0,1]");
    return LossSpec{one_hot(label, num_labels), 1.0 - p_b_correct, {}};
}

LossSpec poe_spec(int label, const ProbVector& p_b) {
    LossSpec spec{one_hot(label, static_cast<int>(p_b.size())), 1.0, {}};
    spec.logit_offset.resize(p_b.size());
    for (std::size_t j = 0; j < p_b.size(); ++j) spec.logit_offset[j] = std::log(std::max(p_b[j], kProbFloor));
    return spec;
}

LossSpec confreg_spec(const ProbVector& p_t, double p_b_correct, const TeacherScaler& scaler) {
    if (p_t.empty()) throw ConfigError("conf_reg requires teacher outputs");
    return LossSpec{scaler(p_t, p_b_correct), 1.0, {}};
}

double cross_entropy(const ProbVector& p_d, const ProbVector& target) {
    double loss = 0.0;
    for (std::size_t j = 0; j < p_d.size(); ++j) {
        if (target[j] != 0.0) loss -= target[j] * std::log(std::max(p_d[j], kProbFloor));
    }
    return loss;
}

double loss_reweight(const ProbVector& p_d, int label, double p_b_correct) {
    const LossSpec spec = reweight_spec(label, static_cast<int>(p_d.size()), p_b_correct);
    if (spec.weight == 0.0) return 0.0;
    return spec.weight * cross_entropy(p_d, spec.target);
}

double loss_poe(const ProbVector& p_d, const ProbVector& p_b, int label) {
    if (p_d.size() != p_b.size()) throw DataError("loss_poe: size mismatch");
    std::vector<double> z(p_d.size());
    for (std::size_t j = 0; j < z.size(); ++j)
        z[j] = std::log(std::max(p_d[j], kProbFloor)) + std::log(std::max(p_b[j], kProbFloor));
    const ProbVector combined = softmax(z);
    return -std::log(std::max(combined[static_cast<std::size_t>(label)], kProbFloor));
}

double loss_confreg(const ProbVector& p_d, const ProbVector& p_t, double p_b_correct, const TeacherScaler& scaler) {
    const LossSpec spec = confreg_spec(p_t, p_b_correct, scaler);
    return cross_entropy(p_d, spec.target);
}

}  // namespace debias

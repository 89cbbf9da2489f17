#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string_view>

#include "debias/classifier.hpp"

namespace debias {

enum class DebiasMethod { baseline_ce, reweight, poe, conf_reg };

std::string_view to_string(DebiasMethod method);
DebiasMethod parse_method(std::string_view text);

struct AnnealSchedule {
    double minimum = 0.8;  // a
    std::int64_t total_steps = 1;  // T
    bool enabled = false;

    void validate() const;
};

ProbVector one_hot(int label, int num_labels);
ProbVector uniform_probs(int num_labels);

// alpha_t = 1 - t (1 - a) / T; 1 when disabled. t > T clamps to a.
double anneal_alpha(std::int64_t t, const AnnealSchedule& sched);

// p_j^alpha / sum_k p_k^alpha, entries floored at kProbFloor. alpha == 1
// returns the input unchanged.
ProbVector anneal_probs(const ProbVector& p_b, double alpha);

// Teacher smoothing S(p_t, beta)_j = p_t,j^(1-beta) / sum_k p_t,k^(1-beta).
ProbVector scale_teacher(const ProbVector& p_t, double beta);

// Pluggable teacher-scaling function; defaults to scale_teacher.
using TeacherScaler = std::function<ProbVector(const ProbVector&, double)>;

// The objectives as loss specifications for the classifier's soft-target
// cross entropy.
LossSpec reweight_spec(int label, int num_labels, double p_b_correct);
LossSpec poe_spec(int label, const ProbVector& p_b);
LossSpec confreg_spec(const ProbVector& p_t, double p_b_correct, const TeacherScaler& scaler = scale_teacher);
LossSpec baseline_spec(int label, int num_labels, double weight = 1.0);

// Direct loss values given the main model's output p_d.
double cross_entropy(const ProbVector& p_d, const ProbVector& target);
double loss_reweight(const ProbVector& p_d, int label, double p_b_correct);
double loss_poe(const ProbVector& p_d, const ProbVector& p_b, int label);
double loss_confreg(const ProbVector& p_d, const ProbVector& p_t, double p_b_correct,
                    const TeacherScaler& scaler = scale_teacher);

}  // namespace debias

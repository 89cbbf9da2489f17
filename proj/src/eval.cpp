#include "debias/eval.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include "debias/errors.hpp"
#include "debias/parallel.hpp"
#include "debias/rng.hpp"

namespace debias {

Predictor classifier_predictor(const Classifier& model) {
    // Owns a copy so the predictor may outlive the caller's model.
    auto owned = std::make_shared<const Classifier>(model);
    return [owned](const Example& ex) { return owned->predict(ex); };
}

Predictor bias_oracle_predictor(int num_labels) {
    return [num_labels](const Example& ex) {
        const auto code = bias_oracle_predict(ex);
        return code ? one_hot(*code, num_labels) : uniform_probs(num_labels);
    };
}

int argmax(const ProbVector& p) {
    return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

double accuracy(const Predictor& model, const Dataset& split) {
    if (split.examples.empty()) throw DataError("accuracy: empty split");
    std::size_t correct = 0;
    for (const auto& ex : split.examples) {
        if (argmax(model(ex)) == ex.label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(split.size());
}

namespace {

Dataset head(const Dataset& d, std::size_t limit) {
    if (limit == 0 || limit >= d.size()) return d;
    Dataset out = d;
    out.examples.resize(limit);
    return out;
}

}  // namespace

SplitAccuracy evaluate_suite(const Predictor& model, const EvalSuite& suite, std::size_t limit) {
    if (limit == 0) {
        return {accuracy(model, suite.original), accuracy(model, suite.biased), accuracy(model, suite.anti_biased)};
    }
    return {accuracy(model, head(suite.original, limit)), accuracy(model, head(suite.biased, limit)),
            accuracy(model, head(suite.anti_biased, limit))};
}

ConfidenceHistogram confidence_histogram(const Predictor& model, const Dataset& split, double bin_width) {
    if (!(bin_width > 0.0)) throw ConfigError("histogram bin width must be > 0");
    const int k = split.num_labels;
    const double lo = 1.0 / k;
    const auto n_bins = static_cast<std::size_t>(std::max(1.0, std::ceil((1.0 - lo) / bin_width - 1e-9)));
    ConfidenceHistogram h;
    h.bins.resize(n_bins);
    for (std::size_t b = 0; b < n_bins; ++b) {
        h.bins[b].lo = lo + static_cast<double>(b) * bin_width;
        h.bins[b].hi = b + 1 == n_bins ? 1.0 : lo + static_cast<double>(b + 1) * bin_width;
    }
    double conf_sum = 0.0;
    for (const auto& ex : split.examples) {
        const ProbVector p = model(ex);
        const int pred = argmax(p);
        const double conf = p[static_cast<std::size_t>(pred)];
        auto b = static_cast<std::ptrdiff_t>(std::floor((conf - lo) / bin_width));
        b = std::clamp<std::ptrdiff_t>(b, 0, static_cast<std::ptrdiff_t>(n_bins) - 1);
        auto& bin = h.bins[static_cast<std::size_t>(b)];
        ++bin.count;
        ++h.total;
        if (pred == ex.label) {
            ++bin.correct;
            ++h.total_correct;
        }
        conf_sum += conf;
    }
    h.mean_confidence = h.total == 0 ? 0.0 : conf_sum / static_cast<double>(h.total);
    return h;
}

Partition easy_hard_partition(const Dataset& split, const OraclePredict& oracle) {
    Partition p;
    for (const auto& ex : split.examples) {
        const auto pred = oracle(ex);
        (pred && *pred == ex.label ? p.easy : p.hard).push_back(ex.id);
    }
    return p;
}

ExperimentData make_experiment_data(const SynthConfig& cfg) {
    ExperimentData d;
    d.train = inject_bias(gen_dataset(cfg), cfg.bias_proportion, cfg.manipulated_fraction,
                          derive_seed(cfg.seed, "bias.train"));
    d.eval = make_eval_suite(cfg);
    return d;
}

DebiasInputs prepare_debias_inputs(const ExperimentData& data, const ExperimentConfig& cfg, bool need_teacher) {
    DebiasInputs in;
    in.shallow = train_shallow(data.train, cfg.shallow);
    in.weights = compute_bias_weights(in.shallow.model, data.train, in.shallow.subset_ids, !cfg.exclude_shallow_subset);
    in.main_train = cfg.exclude_shallow_subset ? filter_by_ids(data.train, in.shallow.subset_ids, true) : data.train;
    if (need_teacher) {
        const Classifier teacher = train_teacher(in.main_train, cfg.train);
        in.teacher = teacher_outputs(teacher, in.main_train);
    }
    return in;
}

namespace {

RunOutcome finish(std::uint64_t seed, TrainResult result, const EvalSuite& eval) {
    RunOutcome out;
    out.seed = seed;
    out.final_accuracy = evaluate_suite(classifier_predictor(result.model), eval);
    out.result = std::move(result);
    return out;
}

}  // namespace

RunOutcome run_baseline(const ExperimentData& data, const ExperimentConfig& cfg) {
    TrainConfig tc = cfg.train;
    tc.method = DebiasMethod::baseline_ce;
    tc.anneal.enabled = false;
    return finish(cfg.data.seed, train_main(data.train, nullptr, tc, &data.eval), data.eval);
}

RunOutcome run_debiased(const ExperimentData& data, const DebiasInputs& inputs, const ExperimentConfig& cfg) {
    const TeacherOutputs* teacher = inputs.teacher ? &*inputs.teacher : nullptr;
    return finish(cfg.data.seed, train_main(inputs.main_train, &inputs.weights, cfg.train, &data.eval, teacher),
                  data.eval);
}

MeanSpread mean_spread(const std::vector<double>& xs) {
    MeanSpread ms;
    if (xs.empty()) return ms;
    ms.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - ms.mean) * (x - ms.mean);
        ms.spread = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    }
    return ms;
}

ExperimentConfig with_run_seed(const ExperimentConfig& base, std::uint64_t seed) {
    ExperimentConfig cfg = base;
    cfg.data.seed = seed;
    cfg.shallow.seed = derive_seed(seed, "shallow.run");
    cfg.train.seed = derive_seed(seed, "train.run");
    return cfg;
}

std::vector<ProportionRow> bias_proportion_study(const std::vector<double>& m_values, const ExperimentConfig& base,
                                                 const std::vector<std::uint64_t>& seeds, int jobs) {
    for (double m : m_values) {
        if (!(m >= 0.0 && m <= 1.0)) throw ConfigError("bias proportion values must lie in [0,1]");
    }
    if (seeds.empty()) throw ConfigError("bias proportion study needs at least one seed");
    const std::size_t cells = m_values.size() * seeds.size();
    std::vector<SplitAccuracy> acc(cells);
    parallel_for(cells, jobs, [&](std::size_t c) {
        ExperimentConfig cfg = with_run_seed(base, seeds[c % seeds.size()]);
        cfg.data.bias_proportion = m_values[c / seeds.size()];
        acc[c] = run_baseline(make_experiment_data(cfg.data), cfg).final_accuracy;
    });
    std::vector<ProportionRow> rows;
    for (std::size_t i = 0; i < m_values.size(); ++i) {
        std::vector<double> o, b, a;
        for (std::size_t s = 0; s < seeds.size(); ++s) {
            const auto& x = acc[i * seeds.size() + s];
            o.push_back(x.original);
            b.push_back(x.biased);
            a.push_back(x.anti_biased);
        }
        rows.push_back(ProportionRow{m_values[i], seeds, mean_spread(o), mean_spread(b), mean_spread(a)});
    }
    return rows;
}

SweepReport anneal_sweep(const std::vector<double>& a_values, DebiasMethod method, const ExperimentConfig& base,
                         const std::vector<std::uint64_t>& seeds, int jobs) {
    if (method == DebiasMethod::baseline_ce) throw ConfigError("anneal sweep needs a debiasing method");
    if (seeds.size() < 3) throw ConfigError("anneal sweep aggregates at least 3 seeds");
    for (double a : a_values) {
        if (!(a >= 0.0 && a <= 1.0)) throw ConfigError("anneal sweep values must lie in [0,1]");
    }
    const std::size_t n_seeds = seeds.size();
    std::vector<ExperimentData> data(n_seeds);
    std::vector<DebiasInputs> inputs(n_seeds);
    std::vector<SplitAccuracy> baseline(n_seeds);
    parallel_for(n_seeds, jobs, [&](std::size_t s) {
        ExperimentConfig cfg = with_run_seed(base, seeds[s]);
        cfg.train.method = method;
        data[s] = make_experiment_data(cfg.data);
        inputs[s] = prepare_debias_inputs(data[s], cfg, method == DebiasMethod::conf_reg);
        baseline[s] = run_baseline(data[s], cfg).final_accuracy;
    });
    const std::size_t cells = a_values.size() * n_seeds;
    std::vector<SplitAccuracy> acc(cells);
    parallel_for(cells, jobs, [&](std::size_t c) {
        const std::size_t s = c % n_seeds;
        ExperimentConfig cfg = with_run_seed(base, seeds[s]);
        cfg.train.method = method;
        cfg.train.anneal.enabled = true;
        cfg.train.anneal.minimum = a_values[c / n_seeds];
        acc[c] = run_debiased(data[s], inputs[s], cfg).final_accuracy;
    });
    SweepReport report;
    report.method = method;
    for (std::size_t i = 0; i < a_values.size(); ++i) {
        SweepPoint pt;
        pt.a = a_values[i];
        pt.seeds = seeds;
        std::vector<double> o, a;
        for (std::size_t s = 0; s < n_seeds; ++s) {
            const auto& x = acc[i * n_seeds + s];
            pt.per_seed.push_back(x);
            o.push_back(x.original);
            a.push_back(x.anti_biased);
        }
        pt.original = mean_spread(o);
        pt.anti_biased = mean_spread(a);
        report.points.push_back(std::move(pt));
    }
    std::vector<double> bo, ba;
    for (const auto& x : baseline) {
        bo.push_back(x.original);
        ba.push_back(x.anti_biased);
    }
    report.baseline_original = mean_spread(bo);
    report.baseline_anti_biased = mean_spread(ba);
    return report;
}

namespace {

std::vector<double> ranks(const std::vector<double>& x) {
    std::vector<std::size_t> idx(x.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> r(x.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
        const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t t = i; t <= j; ++t) r[idx[t]] = avg;
        i = j + 1;
    }
    return r;
}

}  // namespace

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw DataError("spearman: need two equal-length series of size >= 2");
    const auto rx = ranks(x);
    const auto ry = ranks(y);
    const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / static_cast<double>(rx.size());
    const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / static_cast<double>(ry.size());
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace debias

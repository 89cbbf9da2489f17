#include "debias/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <iostream>
#include <optional>
#include <set>

#include <CLI11.hpp>
#include <json.hpp>

#include "debias/config.hpp"
#include "debias/errors.hpp"
#include "debias/io.hpp"

#ifndef DEBIAS_FORGE_VERSION
#define DEBIAS_FORGE_VERSION "0.0.0"
#endif

namespace debias {

const char* tool_version() { return DEBIAS_FORGE_VERSION; }

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string fixed(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

struct GlobalOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    int jobs = 1;
    std::string out_dir = ".";
    bool quiet = false;
    std::vector<std::string> overrides;
};

// Shared state of one command invocation.
class Context {
public:
    Context(std::string command, const GlobalOptions& g, std::ostream& err)
        : command_(std::move(command)), g_(g), err_(err), started_(utc_now()) {}

    // Config resolution order: DEBIAS_FORGE_SEED, config file, --set, --seed.
    // Everything is validated before any output is written.
    void resolve() {
        RunConfig base;
        if (const char* env = std::getenv("DEBIAS_FORGE_SEED"); env && *env) {
            set_config_value(base, "seed", env);
        }
        cfg_ = g_.config_path.empty() ? base : load_config(g_.config_path, base);
        for (const auto& kv : g_.overrides) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
            set_config_value(cfg_, kv.substr(0, eq), kv.substr(eq + 1));
        }
        if (g_.seed) cfg_.seed = *g_.seed;
        cfg_.validate();
        if (g_.jobs < 1) throw ConfigError("--jobs must be >= 1");
        digest_ = config_digest(cfg_);
        if (!g_.config_path.empty()) inputs_.push_back(g_.config_path);
    }

    const RunConfig& cfg() const { return cfg_; }
    ExperimentConfig experiment() const { return resolved_experiment(cfg_); }
    const std::string& digest() const { return digest_; }
    int jobs() const { return g_.jobs; }
    fs::path out(const std::string& name) const { return fs::path(g_.out_dir) / name; }

    void log(const std::string& msg) const {
        if (!g_.quiet) err_ << "[" << kToolName << " " << command_ << "] " << msg << "\n";
    }

    void input(const fs::path& p) { inputs_.push_back(p.string()); }
    void write(const fs::path& p, std::string_view content) {
        write_file(p, content);
        outputs_.push_back(p.string());
        log("wrote " + p.string());
    }

    void write_manifest(const json& extra = json::object()) {
        ordered_json m;
        m["config_digest"] = digest_;
        m["command"] = command_;
        m["inputs"] = inputs_;
        m["outputs"] = outputs_;
        m["seed"] = cfg_.seed;
        m["tool_version"] = tool_version();
        m["started_at"] = started_;
        m["finished_at"] = utc_now();
        m["resolved_config"] = canonical_config(cfg_);
        if (!extra.empty()) m["details"] = extra;
        const fs::path path = out(command_ + "-" + digest_ + ".manifest.json");
        write_file(path, m.dump(2) + "\n");
        log("wrote " + path.string());
    }

private:
    std::string command_;
    const GlobalOptions& g_;
    std::ostream& err_;
    std::string started_;
    RunConfig cfg_;
    std::string digest_;
    std::vector<std::string> inputs_;
    std::vector<std::string> outputs_;
};

LoadedDataset load_training_split(Context& ctx, const fs::path& path) {
    LoadedDataset ds = load_dataset(path);
    ctx.input(path);
    // Shallow selection and training never see the evaluation splits.
    if (ds.data.split != "train") {
        throw DataError(path.string() + " holds split '" + ds.data.split + "'; training commands only accept the train split");
    }
    return ds;
}

ShallowThresholds thresholds_for(const RunConfig& cfg, const Dataset& unseen) {
    ShallowThresholds th;
    th.high_conf_min_fraction = cfg.high_conf_fraction;
    return bias_only_band(unseen, cfg.band_half_width, th);
}

json histogram_json(const ConfidenceHistogram& h) {
    json bins = json::array();
    for (const auto& b : h.bins) bins.push_back({{"lo", b.lo}, {"hi", b.hi}, {"count", b.count}, {"correct", b.correct}});
    return {{"bins", bins}, {"mean_confidence", h.mean_confidence}, {"total", h.total}, {"correct", h.total_correct}};
}

std::vector<ExampleId> read_subset_ids(const fs::path& diagnosis) {
    const json j = json::parse(read_file(diagnosis), nullptr, false);
    if (j.is_discarded() || !j.contains("subset_ids")) throw SchemaError(diagnosis.string() + ": no subset_ids");
    return j.at("subset_ids").get<std::vector<ExampleId>>();
}

// ---- generate ---------------------------------------------------------------

int cmd_generate(Context& ctx) {
    const ExperimentConfig ec = ctx.experiment();
    const ExperimentData data = make_experiment_data(ec.data);
    ctx.write(ctx.out("train.jsonl"), dataset_to_jsonl(data.train, ctx.digest()));
    ctx.write(ctx.out("eval_original.jsonl"), dataset_to_jsonl(data.eval.original, ctx.digest()));
    ctx.write(ctx.out("eval_biased.jsonl"), dataset_to_jsonl(data.eval.biased, ctx.digest()));
    ctx.write(ctx.out("eval_anti_biased.jsonl"), dataset_to_jsonl(data.eval.anti_biased, ctx.digest()));
    const TagCounts c = count_tags(data.train);
    ctx.write_manifest({{"train_tags", {{"clean", c.clean}, {"biased", c.biased}, {"anti_biased", c.anti_biased}}}});
    return 0;
}

// ---- shallow ----------------------------------------------------------------

struct ShallowArgs {
    std::string dataset;
    bool grid = false;
};

int cmd_shallow(Context& ctx, const ShallowArgs& a) {
    const fs::path dataset_path = a.dataset.empty() ? ctx.out("train.jsonl") : fs::path(a.dataset);
    const Dataset train = load_training_split(ctx, dataset_path).data;
    ShallowConfig sc = ctx.experiment().shallow;
    sc.validate(train.size());

    json details = json::object();
    bool all_degenerate = false;
    if (a.grid) {
        // The band depends only on tag proportions, so one computed on the
        // whole train set serves every cell.
        const ShallowThresholds th = thresholds_for(ctx.cfg(), train);
        const GridReport grid =
            grid_search_shallow(train, ctx.cfg().grid_sizes, ctx.cfg().grid_epochs, sc, th, ctx.jobs());
        ctx.write(ctx.out("shallow-grid-" + ctx.digest() + ".csv"), grid_to_csv(grid));
        all_degenerate = std::all_of(grid.cells.begin(), grid.cells.end(),
                                     [](const GridCell& c) { return c.diagnosis.degenerate; });
        if (grid.best) {
            sc.sample_size = grid.cells[*grid.best].sample_size;
            sc.epochs = grid.cells[*grid.best].epochs;
            ctx.log("grid selected n_s=" + std::to_string(sc.sample_size) + " e_s=" + std::to_string(sc.epochs));
        } else {
            ctx.log("no grid cell passed; keeping the configured n_s/e_s");
        }
        details["grid_selected"] = grid.best.has_value();
    }

    const ShallowModel shallow = train_shallow(train, sc);
    const Dataset unseen = filter_by_ids(train, shallow.subset_ids, true);
    const ShallowThresholds th = thresholds_for(ctx.cfg(), unseen);
    const ShallowDiagnosis d = validate_shallow(shallow.model, unseen, th);

    ctx.write(ctx.out("shallow.ckpt.json"), checkpoint_to_json(shallow.model, ctx.digest()));
    ordered_json diag;
    diag["config_digest"] = ctx.digest();
    diag["sample_size"] = sc.sample_size;
    diag["epochs"] = sc.epochs;
    diag["unseen_count"] = d.unseen_count;
    diag["unseen_accuracy"] = d.unseen_accuracy;
    diag["high_conf_fraction"] = d.high_conf_fraction;
    diag["mean_confidence"] = d.mean_confidence;
    diag["band"] = {th.accuracy_low, th.accuracy_high};
    diag["degenerate"] = d.degenerate;
    diag["pass"] = d.pass;
    diag["status"] = d.degenerate ? "degenerate" : (d.pass ? "pass" : "fail");
    diag["histogram"] = histogram_json(d.histogram);
    diag["subset_ids"] = shallow.subset_ids;
    ctx.write(ctx.out("shallow.diagnosis.json"), diag.dump(2) + "\n");
    ctx.log("unseen accuracy " + fixed(d.unseen_accuracy) + ", high-confidence fraction " +
            fixed(d.high_conf_fraction) + (d.degenerate ? " (degenerate)" : d.pass ? " (pass)" : " (fail)"));
    ctx.write_manifest(details);
    if (d.degenerate || all_degenerate) return static_cast<int>(ExitCode::degenerate_shallow);
    return 0;
}

// ---- identify ---------------------------------------------------------------

struct IdentifyArgs {
    std::string shallow;
    std::string diagnosis;
    std::string dataset;
};

int cmd_identify(Context& ctx, const IdentifyArgs& a) {
    const fs::path dataset_path = a.dataset.empty() ? ctx.out("train.jsonl") : fs::path(a.dataset);
    const fs::path ckpt_path = a.shallow.empty() ? ctx.out("shallow.ckpt.json") : fs::path(a.shallow);
    const fs::path diag_path = a.diagnosis.empty() ? ctx.out("shallow.diagnosis.json") : fs::path(a.diagnosis);
    const Dataset train = load_training_split(ctx, dataset_path).data;
    const Classifier model = load_checkpoint(ckpt_path, train.num_labels).model;
    ctx.input(ckpt_path);
    if (model.space.vocab_size != train.vocab_size) {
        throw SchemaError("checkpoint vocabulary " + std::to_string(model.space.vocab_size) +
                          " does not match the dataset's " + std::to_string(train.vocab_size));
    }
    const std::vector<ExampleId> subset = read_subset_ids(diag_path);
    ctx.input(diag_path);
    const bool include_subset = !ctx.cfg().experiment.exclude_shallow_subset;
    const BiasWeights w = compute_bias_weights(model, train, subset, include_subset);
    ctx.write(ctx.out("bias_weights.jsonl"), weights_to_jsonl(w));
    ctx.write_manifest({{"entries", w.size()}});
    return 0;
}

// ---- train ------------------------------------------------------------------

struct TrainArgs {
    std::string dataset;
    std::string weights;
    std::string diagnosis;
    std::string teacher;
    std::string eval_dir;
    bool no_auto_teacher = false;
};

std::optional<EvalSuite> load_eval_suite(Context& ctx, const fs::path& dir) {
    const fs::path o = dir / "eval_original.jsonl", b = dir / "eval_biased.jsonl", x = dir / "eval_anti_biased.jsonl";
    if (!fs::exists(o) || !fs::exists(b) || !fs::exists(x)) return std::nullopt;
    EvalSuite s;
    s.original = load_dataset(o).data;
    s.biased = load_dataset(b).data;
    s.anti_biased = load_dataset(x).data;
    ctx.input(o);
    ctx.input(b);
    ctx.input(x);
    return s;
}

int cmd_train(Context& ctx, const TrainArgs& a) {
    const fs::path dataset_path = a.dataset.empty() ? ctx.out("train.jsonl") : fs::path(a.dataset);
    const Dataset train = load_training_split(ctx, dataset_path).data;
    TrainConfig tc = ctx.experiment().train;
    const DebiasMethod method = tc.method;
    const fs::path eval_dir = a.eval_dir.empty() ? dataset_path.parent_path() : fs::path(a.eval_dir);
    const std::optional<EvalSuite> eval = load_eval_suite(ctx, eval_dir.empty() ? fs::path(".") : eval_dir);
    if (!eval) ctx.log("no eval suite found in " + eval_dir.string() + "; training without a trajectory");

    const fs::path weights_path = a.weights.empty() ? ctx.out("bias_weights.jsonl") : fs::path(a.weights);
    Dataset main_train = train;
    std::optional<BiasWeights> weights;
    if (method == DebiasMethod::baseline_ce) {
        if (!a.weights.empty() || fs::exists(weights_path)) ctx.log("method baseline_ce: bias weights ignored");
    } else {
        if (!fs::exists(weights_path)) {
            throw ConfigError("method " + std::string(to_string(method)) + " needs bias weights (--weights); missing " +
                              weights_path.string());
        }
        weights = weights_from_jsonl(read_file(weights_path));
        ctx.input(weights_path);
        if (ctx.cfg().experiment.exclude_shallow_subset) {
            const fs::path diag_path = a.diagnosis.empty() ? ctx.out("shallow.diagnosis.json") : fs::path(a.diagnosis);
            if (fs::exists(diag_path)) {
                main_train = filter_by_ids(train, read_subset_ids(diag_path), true);
                ctx.input(diag_path);
            } else {
                std::vector<ExampleId> covered;
                for (const auto& e : weights->entries()) covered.push_back(e.id);
                main_train = filter_by_ids(train, covered, false);
                ctx.log("no shallow diagnosis found; training on the examples the weights cover");
            }
        }
    }

    std::optional<TeacherOutputs> teacher;
    if (method == DebiasMethod::conf_reg) {
        Classifier t;
        if (!a.teacher.empty()) {
            t = load_checkpoint(a.teacher, train.num_labels).model;
            ctx.input(a.teacher);
        } else {
            const fs::path cached = ctx.out("teacher-" + ctx.digest() + ".ckpt.json");
            if (fs::exists(cached)) {
                t = load_checkpoint(cached, train.num_labels).model;
                ctx.input(cached);
                ctx.log("reusing cached teacher " + cached.string());
            } else if (a.no_auto_teacher) {
                throw ConfigError("method conf_reg needs a teacher (--teacher) and --no-auto-teacher is set");
            } else {
                ctx.log("training teacher");
                t = train_teacher(main_train, tc);
                ctx.write(cached, checkpoint_to_json(t, ctx.digest()));
            }
        }
        teacher = teacher_outputs(t, main_train);
    }

    const TrainResult r = train_main(main_train, weights ? &*weights : nullptr, tc, eval ? &*eval : nullptr,
                                     teacher ? &*teacher : nullptr);
    const std::string stem = "run-" + ctx.digest();
    ctx.write(ctx.out(stem + ".ckpt.json"), checkpoint_to_json(r.model, ctx.digest()));
    ctx.write(ctx.out(stem + ".metrics.jsonl"), metrics_to_jsonl(r.log));
    ordered_json summary;
    summary["config_digest"] = ctx.digest();
    summary["method"] = std::string(to_string(method));
    summary["anneal"] = {{"enabled", tc.anneal.enabled}, {"a", tc.anneal.minimum}};
    summary["steps"] = r.model.step;
    summary["train_examples"] = main_train.size();
    summary["eval_mode"] = r.log.eval_mode;
    if (eval) {
        const SplitAccuracy acc = evaluate_suite(classifier_predictor(r.model), *eval);
        summary["accuracy"] = {{"original", acc.original}, {"biased", acc.biased}, {"anti_biased", acc.anti_biased}};
        ctx.log("final accuracy original " + fixed(acc.original) + " biased " + fixed(acc.biased) + " anti_biased " +
                fixed(acc.anti_biased));
    }
    ctx.write(ctx.out(stem + ".summary.json"), summary.dump(2) + "\n");
    ctx.write_manifest();
    return 0;
}

// ---- report -----------------------------------------------------------------

struct ReportArgs {
    std::string kind;
    std::string metrics;
    std::string model;
    std::string dataset;
    std::vector<std::string> inputs;
};

std::vector<std::uint64_t> report_seeds(const RunConfig& cfg) {
    std::vector<std::uint64_t> s;
    for (int i = 0; i < cfg.report_seeds; ++i) s.push_back(cfg.seed + static_cast<std::uint64_t>(i));
    return s;
}

std::string acc_cell(const std::optional<SplitAccuracy>& a, double SplitAccuracy::*field) {
    return a ? fixed((*a).*field) : std::string();
}

int cmd_report(Context& ctx, const ReportArgs& a) {
    const std::string& kind = a.kind;
    auto require = [&](bool ok, const std::string& needs) {
        if (!ok) throw ConfigError("report --kind " + kind + " requires " + needs);
    };
    // Reports over input files carry a digest of those inputs as well.
    std::string input_key = canonical_config(ctx.cfg()) + "kind=" + kind + "\n";
    auto add_input = [&](const fs::path& p) {
        const std::string content = read_file(p);
        input_key += digest_hex(content) + "\n";
        ctx.input(p);
        return content;
    };

    std::string csv;
    ordered_json summary;
    summary["kind"] = kind;

    if (kind == "trajectory") {
        require(!a.metrics.empty(), "--metrics <run-*.metrics.jsonl>");
        const MetricsLog log = metrics_from_jsonl(add_input(a.metrics));
        csv = "step,alpha,mean_loss,p0,p25,p50,p75,p100,original,biased,anti_biased\n";
        std::size_t evaluated = 0;
        for (const auto& r : log.records) {
            csv += std::to_string(r.step) + "," + fixed(r.alpha) + "," + fixed(r.mean_loss);
            for (double p : r.loss_percentiles) csv += "," + fixed(p);
            csv += "," + acc_cell(r.accuracy, &SplitAccuracy::original) + "," +
                   acc_cell(r.accuracy, &SplitAccuracy::biased) + "," +
                   acc_cell(r.accuracy, &SplitAccuracy::anti_biased) + "\n";
            if (r.accuracy) ++evaluated;
        }
        summary["records"] = log.records.size();
        summary["evaluated_records"] = evaluated;
        summary["eval_mode"] = log.eval_mode;
    } else if (kind == "histogram") {
        require(!a.model.empty() && !a.dataset.empty(), "--model <checkpoint> and --dataset <jsonl>");
        add_input(a.model);
        add_input(a.dataset);
        const Dataset ds = load_dataset(a.dataset).data;
        const Classifier model = load_checkpoint(a.model, ds.num_labels).model;
        const ConfidenceHistogram h = confidence_histogram(classifier_predictor(model), ds);
        csv = histogram_to_csv(h);
        summary["split"] = ds.split;
        summary["histogram"] = histogram_json(h);
    } else if (kind == "sweep") {
        const ExperimentConfig ec = ctx.cfg().experiment;
        if (ec.train.method == DebiasMethod::baseline_ce) {
            throw ConfigError("report --kind sweep requires train.method to be reweight, poe or conf_reg");
        }
        const auto seeds = report_seeds(ctx.cfg());
        const SweepReport rep = anneal_sweep(ctx.cfg().a_values, ec.train.method, ec, seeds, ctx.jobs());
        csv = "a,original_mean,original_spread,anti_biased_mean,anti_biased_spread,seeds\n";
        std::vector<double> as, means;
        for (const auto& p : rep.points) {
            csv += fixed(p.a) + "," + fixed(p.original.mean) + "," + fixed(p.original.spread) + "," +
                   fixed(p.anti_biased.mean) + "," + fixed(p.anti_biased.spread) + "," +
                   std::to_string(p.seeds.size()) + "\n";
            as.push_back(p.a);
            means.push_back(p.anti_biased.mean);
        }
        summary["method"] = std::string(to_string(rep.method));
        summary["seeds"] = seeds;
        summary["baseline"] = {{"original", rep.baseline_original.mean},
                               {"anti_biased", rep.baseline_anti_biased.mean}};
        if (as.size() >= 2) summary["spearman_a_vs_anti_biased"] = spearman(as, means);
    } else if (kind == "proportion") {
        const auto seeds = report_seeds(ctx.cfg());
        const auto rows = bias_proportion_study(ctx.cfg().m_values, ctx.cfg().experiment, seeds, ctx.jobs());
        csv = "m,original_mean,original_spread,biased_mean,biased_spread,anti_biased_mean,anti_biased_spread,seeds\n";
        for (const auto& r : rows) {
            csv += fixed(r.m) + "," + fixed(r.original.mean) + "," + fixed(r.original.spread) + "," +
                   fixed(r.biased.mean) + "," + fixed(r.biased.spread) + "," + fixed(r.anti_biased.mean) + "," +
                   fixed(r.anti_biased.spread) + "," + std::to_string(r.seeds.size()) + "\n";
        }
        summary["seeds"] = seeds;
    } else if (kind == "stability") {
        const ExperimentConfig ec = ctx.experiment();
        Dataset train;
        if (!a.dataset.empty()) {
            train = load_training_split(ctx, a.dataset).data;
            input_key += digest_hex(read_file(a.dataset)) + "\n";
        } else {
            train = make_experiment_data(ec.data).train;
        }
        const Dataset heldout = make_heldout_split(ec.data);
        const auto runs = stability_study(train, ec.shallow, ctx.cfg().stability_runs, heldout, ctx.jobs());
        csv = "run,seed,overall,easy,hard,easy_count,hard_count,degenerate\n";
        int flagged = 0;
        for (std::size_t i = 0; i < runs.size(); ++i) {
            const auto& r = runs[i];
            csv += std::to_string(i) + "," + std::to_string(r.seed) + "," + fixed(r.overall) + "," + fixed(r.easy) +
                   "," + fixed(r.hard) + "," + std::to_string(r.easy_count) + "," + std::to_string(r.hard_count) +
                   "," + (r.degenerate ? "true" : "false") + "\n";
            flagged += r.degenerate;
        }
        summary["runs"] = runs.size();
        summary["degenerate_runs"] = flagged;
    } else if (kind == "compare") {
        require(!a.inputs.empty(), "--inputs <run-*.summary.json ...>");
        csv = "method,original,biased,anti_biased,config_digest\n";
        json rows = json::array();
        for (const auto& p : a.inputs) {
            const json s = json::parse(add_input(p), nullptr, false);
            if (s.is_discarded() || !s.contains("accuracy") || !s.contains("method")) {
                throw SchemaError(p + ": not a run summary with accuracies");
            }
            const json& acc = s.at("accuracy");
            csv += s.at("method").get<std::string>() + "," + fixed(acc.at("original").get<double>()) + "," +
                   fixed(acc.at("biased").get<double>()) + "," + fixed(acc.at("anti_biased").get<double>()) + "," +
                   s.at("config_digest").get<std::string>() + "\n";
            rows.push_back({{"method", s.at("method")}, {"accuracy", acc}});
        }
        summary["rows"] = rows;
    } else {
        throw ConfigError("unknown report kind '" + kind +
                          "' (allowed: trajectory, histogram, sweep, proportion, stability, compare)");
    }

    const std::string report_digest = digest_hex(input_key);
    summary["report_digest"] = report_digest;
    summary["config_digest"] = ctx.digest();
    const std::string stem = "report-" + kind + "-" + report_digest;
    ctx.write(ctx.out(stem + ".csv"), csv);
    ctx.write(ctx.out(stem + ".json"), summary.dump(2) + "\n");
    ctx.write_manifest({{"kind", kind}, {"report_digest", report_digest}});
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Self-debiasing laboratory on a synthetic biased classification task", kToolName};
    app.require_subcommand(1);
    app.set_version_flag("--version", tool_version());

    GlobalOptions g;
    auto add_globals = [&](CLI::App* sub) {
        sub->add_option("--config", g.config_path, "config file (key = value lines)");
        sub->add_option("--seed", g.seed, "run seed (default: DEBIAS_FORGE_SEED, then the config)");
        sub->add_option("--jobs", g.jobs, "parallel workers for grids, sweeps and studies");
        sub->add_option("--out-dir", g.out_dir, "directory for all outputs");
        sub->add_flag("--quiet", g.quiet, "suppress progress messages");
        sub->add_option("--set", g.overrides, "config override key=value (repeatable)");
    };

    auto* gen = app.add_subcommand("generate", "write the train set and the three evaluation splits");
    add_globals(gen);

    ShallowArgs sa;
    auto* sh = app.add_subcommand("shallow", "train (or grid-search) the shallow bias model");
    add_globals(sh);
    sh->add_option("--dataset", sa.dataset, "train split JSONL (default: <out-dir>/train.jsonl)");
    sh->add_flag("--grid", sa.grid, "search shallow.grid_sizes x shallow.grid_epochs first");

    IdentifyArgs ia;
    auto* id = app.add_subcommand("identify", "assign p_b to the unseen training examples");
    add_globals(id);
    id->add_option("--shallow", ia.shallow, "shallow checkpoint (default: <out-dir>/shallow.ckpt.json)");
    id->add_option("--diagnosis", ia.diagnosis, "shallow diagnosis with subset ids");
    id->add_option("--dataset", ia.dataset, "train split JSONL");

    TrainArgs ta;
    auto* tr = app.add_subcommand("train", "train the main model (baseline or debiased)");
    add_globals(tr);
    tr->add_option("--dataset", ta.dataset, "train split JSONL");
    tr->add_option("--weights", ta.weights, "bias weights JSONL (default: <out-dir>/bias_weights.jsonl)");
    tr->add_option("--diagnosis", ta.diagnosis, "shallow diagnosis (subset exclusion)");
    tr->add_option("--teacher", ta.teacher, "teacher checkpoint for conf_reg");
    tr->add_option("--eval-dir", ta.eval_dir, "directory holding eval_*.jsonl (default: next to the dataset)");
    tr->add_flag("--no-auto-teacher", ta.no_auto_teacher, "fail instead of training a missing conf_reg teacher");

    ReportArgs ra;
    auto* rp = app.add_subcommand("report", "emit CSV/JSON analysis reports");
    add_globals(rp);
    rp->add_option("--kind", ra.kind, "trajectory|histogram|sweep|proportion|stability|compare")->required();
    rp->add_option("--metrics", ra.metrics, "metrics JSONL (trajectory)");
    rp->add_option("--model", ra.model, "checkpoint (histogram)");
    rp->add_option("--dataset", ra.dataset, "dataset JSONL (histogram, stability)");
    rp->add_option("--inputs", ra.inputs, "run summaries (compare)");

    std::vector<std::string> argv(args.rbegin(), args.rend());
    try {
        app.parse(argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::CallForVersion& e) {
        out << tool_version() << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return static_cast<int>(ExitCode::config);
    }

    CLI::App* sub = app.get_subcommands().front();
    Context ctx(sub->get_name(), g, err);
    try {
        ctx.resolve();
        if (sub == gen) return cmd_generate(ctx);
        if (sub == sh) return cmd_shallow(ctx, sa);
        if (sub == id) return cmd_identify(ctx, ia);
        if (sub == tr) return cmd_train(ctx, ta);
        return cmd_report(ctx, ra);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return static_cast<int>(e.exit_code());
    } catch (const nlohmann::json::exception& e) {
        err << "error: " << e.what() << "\n";
        return static_cast<int>(ExitCode::data);
    }
}

}  // namespace debias

#include <doctest.h>

#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "debias/cli.hpp"
#include "debias/io.hpp"
#include "helpers.hpp"

using namespace debias;
using nlohmann::json;

namespace {

constexpr const char* kSmallConfig =
    "data.train_size = 3000\n"
    "data.test_size = 400\n"
    "train.epochs = 1\n"
    "train.teacher_epochs = 1\n"
    "train.eval_every = 40\n"
    "shallow.sample_size = 300\n"
    "shallow.epochs = 2\n"
    "shallow.grid_sizes = 200, 300\n"
    "shallow.grid_epochs = 1, 2, 3\n"
    "report.stability_runs = 2\n";

struct Run {
    int code;
    std::string out;
    std::string err;
};

class Workspace {
public:
    Workspace() { write_file(config(), kSmallConfig); }

    fs::path config() const { return dir_.path() / "small.conf"; }
    fs::path out() const { return dir_.path() / "out"; }

    Run run(std::vector<std::string> args, bool with_defaults = true) const {
        if (with_defaults) {
            args.insert(args.end(), {"--config", config().string(), "--out-dir", out().string(), "--quiet"});
        }
        std::ostringstream o, e;
        const int code = run_cli(args, o, e);
        return {code, o.str(), e.str()};
    }

    // Output file contents by name, manifests excluded.
    std::map<std::string, std::string> snapshot() const {
        std::map<std::string, std::string> files;
        if (!fs::exists(out())) return files;
        for (const auto& entry : fs::directory_iterator(out())) {
            const std::string name = entry.path().filename().string();
            if (name.find(".manifest.json") != std::string::npos) continue;
            files[name] = read_file(entry.path());
        }
        return files;
    }

    std::vector<std::string> matching(const std::string& prefix, const std::string& suffix) const {
        std::vector<std::string> names;
        for (const auto& [name, _] : snapshot()) {
            if (name.rfind(prefix, 0) == 0 && name.size() >= suffix.size() &&
                name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0)
                names.push_back(name);
        }
        return names;
    }

private:
    testutil::TempDir dir_;
};

std::size_t line_count(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("help and version") {
    Workspace ws;
    const Run h = ws.run({"--help"}, false);
    CHECK(h.code == 0);
    CHECK(h.out.find("generate") != std::string::npos);
    const Run v = ws.run({"--version"}, false);
    CHECK(v.code == 0);
    CHECK(v.out.find(tool_version()) != std::string::npos);
    CHECK(ws.run({"frobnicate"}, false).code == 2);
}

TEST_CASE("generate writes four splits and a manifest, reproducibly") {
    Workspace ws;
    REQUIRE(ws.run({"generate", "--seed", "4"}).code == 0);
    const auto first = ws.snapshot();
    CHECK(first.size() == 4);
    for (const char* name : {"train.jsonl", "eval_original.jsonl", "eval_biased.jsonl", "eval_anti_biased.jsonl"})
        CHECK(first.count(name) == 1);
    int manifests = 0;
    for (const auto& e : fs::directory_iterator(ws.out())) {
        if (e.path().filename().string().rfind("generate-", 0) != 0) continue;
        ++manifests;
        const json m = json::parse(read_file(e.path()));
        for (const char* key : {"config_digest", "command", "inputs", "outputs", "seed", "tool_version", "started_at",
                                "finished_at", "resolved_config"})
            CHECK(m.contains(key));
        CHECK(m["seed"] == 4);
        CHECK(m["outputs"].size() == 4);
    }
    CHECK(manifests == 1);
    REQUIRE(ws.run({"generate", "--seed", "4"}).code == 0);
    CHECK(ws.snapshot() == first);
    REQUIRE(ws.run({"generate", "--seed", "5"}).code == 0);
    CHECK(ws.snapshot().at("train.jsonl") != first.at("train.jsonl"));
}

TEST_CASE("config errors exit 2 before anything is written") {
    Workspace ws;
    const Run typo = ws.run({"generate", "--set", "data.bais_proportion=0.9"});
    CHECK(typo.code == 2);
    CHECK(typo.err.find("did you mean 'data.bias_proportion'") != std::string::npos);
    const Run range = ws.run({"generate", "--set", "data.bias_proportion=1.5"});
    CHECK(range.code == 2);
    CHECK_FALSE(fs::exists(ws.out()));
    CHECK(ws.run({"generate", "--config", "/nonexistent/x.conf"}, false).code == 2);
    CHECK(ws.run({"report", "--kind", "sweep"}).code == 2);  // baseline method
}

TEST_CASE("seed precedence: flag over --set over config") {
    Workspace ws;
    write_file(ws.config(), std::string(kSmallConfig) + "seed = 11\n");
    REQUIRE(ws.run({"generate", "--set", "seed=12", "--seed", "13"}).code == 0);
    const LoadedDataset d = load_dataset(ws.out() / "train.jsonl");
    CHECK(d.data.provenance.seed == 13);
    REQUIRE(ws.run({"generate", "--set", "seed=12"}).code == 0);
    CHECK(load_dataset(ws.out() / "train.jsonl").data.provenance.seed == 12);
}

TEST_CASE("shallow, identify, train and report pipeline") {
    Workspace ws;
    REQUIRE(ws.run({"generate"}).code == 0);

    const Run grid = ws.run({"shallow", "--grid", "--jobs", "2"});
    REQUIRE(grid.code == 0);
    const auto grids = ws.matching("shallow-grid-", ".csv");
    REQUIRE(grids.size() == 1);
    CHECK(line_count(ws.snapshot().at(grids[0])) == 1 + 2 * 3);

    REQUIRE(ws.run({"shallow"}).code == 0);
    const json diag = json::parse(read_file(ws.out() / "shallow.diagnosis.json"));
    CHECK(diag["subset_ids"].size() == 300);
    REQUIRE(ws.run({"identify"}).code == 0);
    const std::string weights = read_file(ws.out() / "bias_weights.jsonl");
    CHECK(line_count(weights) == 3000 - 300);
    REQUIRE(ws.run({"identify"}).code == 0);
    CHECK(read_file(ws.out() / "bias_weights.jsonl") == weights);

    // Training refuses evaluation splits.
    CHECK(ws.run({"train", "--dataset", (ws.out() / "eval_biased.jsonl").string()}).code == 3);

    std::vector<std::string> summaries;
    for (const char* method : {"baseline_ce", "reweight", "poe", "conf_reg"}) {
        const auto before = ws.matching("run-", ".summary.json");
        const Run r = ws.run({"train", "--set", std::string("train.method=") + method});
        REQUIRE_MESSAGE(r.code == 0, r.err);
        for (const auto& s : ws.matching("run-", ".summary.json"))
            if (std::find(before.begin(), before.end(), s) == before.end()) summaries.push_back(s);
    }
    REQUIRE(summaries.size() == 4);
    CHECK(ws.matching("teacher-", ".ckpt.json").size() == 1);

    for (const auto& m : ws.matching("run-", ".metrics.jsonl")) {
        const MetricsLog log = metrics_from_jsonl(read_file(ws.out() / m));
        for (const auto& rec : log.records) CHECK(rec.alpha == 1.0);
    }

    // A fresh config digest means no cached teacher.
    CHECK(ws.run({"train", "--set", "train.method=conf_reg", "--set", "train.learning_rate=0.1", "--no-auto-teacher"})
              .code == 2);

    std::vector<std::string> compare{"report", "--kind", "compare", "--inputs"};
    for (const auto& s : summaries) compare.push_back((ws.out() / s).string());
    REQUIRE(ws.run(compare).code == 0);
    const auto cmp = ws.matching("report-compare-", ".csv");
    REQUIRE(cmp.size() == 1);
    const std::string table = ws.snapshot().at(cmp[0]);
    CHECK(line_count(table) == 5);
    CHECK(table.find("conf_reg,") != std::string::npos);

    const auto metrics = ws.matching("run-", ".metrics.jsonl");
    REQUIRE(ws.run({"report", "--kind", "trajectory", "--metrics", (ws.out() / metrics[0]).string()}).code == 0);
    REQUIRE(ws.run({"report", "--kind", "histogram", "--model", (ws.out() / "shallow.ckpt.json").string(),
                    "--dataset", (ws.out() / "eval_original.jsonl").string()})
                .code == 0);
    CHECK(ws.matching("report-histogram-", ".csv").size() == 1);
    CHECK(ws.run({"report", "--kind", "trajectory"}).code == 2);
    CHECK(ws.run({"report", "--kind", "histogram", "--model", "x"}).code == 2);
    CHECK(ws.run({"report", "--kind", "nope"}).code == 2);

    // Tampered checkpoint.
    std::string ckpt = read_file(ws.out() / "shallow.ckpt.json");
    json j = json::parse(ckpt);
    j["b2"].erase(0);
    write_file(ws.out() / "shallow.ckpt.json", j.dump());
    CHECK(ws.run({"identify"}).code == 3);
    write_file(ws.out() / "shallow.ckpt.json", ckpt.substr(0, ckpt.size() / 3));
    CHECK(ws.run({"identify"}).code == 3);
}

TEST_CASE("debiasing without weights is a config error") {
    Workspace ws;
    REQUIRE(ws.run({"generate"}).code == 0);
    CHECK(ws.run({"train", "--set", "train.method=reweight"}).code == 2);
}

TEST_CASE("sweep report has one row per a value") {
    Workspace ws;
    const Run r = ws.run({"report", "--kind", "sweep", "--set", "train.method=reweight", "--jobs", "2"});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const auto csv = ws.matching("report-sweep-", ".csv");
    REQUIRE(csv.size() == 1);
    CHECK(line_count(ws.snapshot().at(csv[0])) == 1 + 6);
    const json summary = json::parse(ws.snapshot().at(ws.matching("report-sweep-", ".json")[0]));
    CHECK(summary.contains("spearman_a_vs_anti_biased"));
    CHECK(summary["seeds"].size() == 3);
}

TEST_CASE("stability report flags runs") {
    Workspace ws;
    REQUIRE(ws.run({"report", "--kind", "stability"}).code == 0);
    const auto csv = ws.matching("report-stability-", ".csv");
    REQUIRE(csv.size() == 1);
    CHECK(line_count(ws.snapshot().at(csv[0])) == 1 + 2);
}

}

#include <doctest.h>

#include <fstream>

#include "debias/config.hpp"
#include "debias/errors.hpp"
#include "helpers.hpp"

using namespace debias;

TEST_SUITE("config") {

TEST_CASE("parses sections, comments and lists") {
    const RunConfig c = parse_config(
        "# comment\n"
        "data.bias_proportion = 0.7   # trailing\n"
        "\n"
        "train.method = poe\n"
        "anneal.enabled = true\n"
        "anneal.a = 0.4\n"
        "shallow.grid_sizes = 100, 200\n"
        "report.a_values = 1,0.5\n"
        "seed = 17\n");
    CHECK(c.experiment.data.bias_proportion == 0.7);
    CHECK(c.experiment.train.method == DebiasMethod::poe);
    CHECK(c.experiment.train.anneal.enabled);
    CHECK(c.experiment.train.anneal.minimum == 0.4);
    CHECK(c.grid_sizes == std::vector<int>{100, 200});
    CHECK(c.a_values == std::vector<double>{1.0, 0.5});
    CHECK(c.seed == 17);
}

TEST_CASE("unknown keys get a suggestion and the line number") {
    CHECK(suggest_key("data.bais_proportion") == "data.bias_proportion");
    CHECK(suggest_key("bais_proportion") == "data.bias_proportion");
    CHECK(suggest_key("completely.unrelated.thing").empty());
    try {
        parse_config("seed = 1\ndata.bais_proportion = 0.9\n");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("line 2") != std::string::npos);
        CHECK(msg.find("did you mean 'data.bias_proportion'") != std::string::npos);
    }
}

TEST_CASE("malformed values") {
    CHECK_THROWS_AS(parse_config("data.num_labels = three\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("data.num_labels = 3.5\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("anneal.enabled = maybe\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("shallow.grid_sizes = 1,,2\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("no equals sign\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("train.method = focal\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("shallow.optimizer = rmsprop\n"), ConfigError);
}

TEST_CASE("validation rejects out-of-range settings") {
    auto invalid = [](const char* text) { return [text] { parse_config(text).validate(); }; };
    CHECK_THROWS_AS(invalid("data.bias_proportion = 1.2\n")(), ConfigError);
    CHECK_THROWS_AS(invalid("data.manipulated_fraction = -0.1\n")(), ConfigError);
    CHECK_THROWS_AS(invalid("anneal.a = 2\n")(), ConfigError);
    CHECK_THROWS_AS(invalid("train.epochs = 0\n")(), ConfigError);
    CHECK_THROWS_AS(invalid("report.seeds = 2\n")(), ConfigError);
    CHECK_THROWS_AS(invalid("model.feature_dim = 100\n")(), ConfigError);
    CHECK_THROWS_AS(invalid("report.m_values = 0.5, 1.5\n")(), ConfigError);
    CHECK_NOTHROW(RunConfig{}.validate());
}

TEST_CASE("digest is stable under reordering and sensitive to values") {
    const RunConfig a = parse_config("data.bias_proportion = 0.8\ntrain.method = reweight\n");
    const RunConfig b = parse_config("# same settings\ntrain.method   =   reweight\ndata.bias_proportion=0.80\n");
    CHECK(canonical_config(a) == canonical_config(b));
    CHECK(config_digest(a) == config_digest(b));
    CHECK(config_digest(a) != config_digest(RunConfig{}));
    CHECK(config_digest(a).size() == 16);
    // FNV-1a 64 reference vectors.
    CHECK(digest_hex("") == "cbf29ce484222325");
    CHECK(digest_hex("a") == "af63dc4c8601ec8c");
}

TEST_CASE("canonical form round-trips") {
    RunConfig c = parse_config("data.noise_token_rate = 0.1\nshallow.grid_epochs = 2,3\nseed = 99\n");
    const RunConfig again = parse_config(canonical_config(c));
    CHECK(canonical_config(again) == canonical_config(c));
    for (const auto& k : config_keys()) CHECK(canonical_config(c).find(k + " = ") != std::string::npos);
}

TEST_CASE("config file loading") {
    testutil::TempDir dir;
    const auto path = dir.path() / "run.conf";
    std::ofstream(path) << "train.epochs = 3\n";
    RunConfig base;
    base.seed = 5;
    const RunConfig c = load_config(path, base);
    CHECK(c.experiment.train.epochs == 3);
    CHECK(c.seed == 5);
    CHECK_THROWS_AS(load_config(dir.path() / "missing.conf"), ConfigError);
}

TEST_CASE("resolved experiment derives distinct seeds") {
    RunConfig c;
    c.seed = 12;
    const ExperimentConfig e = resolved_experiment(c);
    CHECK(e.data.seed == 12);
    CHECK(e.train.seed != e.shallow.seed);
    CHECK(e.train.hidden == c.experiment.train.hidden);
}

}

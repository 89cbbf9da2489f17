#include "debias/io.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include <json.hpp>

#include "debias/errors.hpp"

namespace debias {

using nlohmann::json;

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("error while reading " + path.string());
    return ss.str();
}

void write_file(const fs::path& path, std::string_view content) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
        if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw IoError("error while writing " + path.string());
}

namespace {

// Parses one JSON document located at `base` bytes into the enclosing file so
// parse errors report file offsets.
json parse_at(std::string_view text, std::size_t base) {
    try {
        return json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        const std::size_t local = e.byte > 0 ? e.byte - 1 : 0;
        throw ParseError("malformed JSON", base + local);
    }
}

// Calls fn(object, line_number) for every non-blank line.
void for_each_jsonl(std::string_view text, const std::function<void(const json&, int)>& fn) {
    std::size_t pos = 0;
    int line_no = 0;
    while (pos < text.size()) {
        ++line_no;
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        const std::string_view line = text.substr(pos, nl - pos);
        if (line.find_first_not_of(" \t\r") != std::string_view::npos) {
            const json j = parse_at(line, pos);
            try {
                fn(j, line_no);
            } catch (const json::exception& e) {
                throw SchemaError("line " + std::to_string(line_no) + ": " + e.what());
            }
        }
        pos = nl + 1;
    }
}

json synth_to_json(const SynthConfig& c) {
    return json{{"num_labels", c.num_labels},
                {"train_size", c.train_size},
                {"test_size", c.test_size},
                {"vocab_size", c.vocab_size},
                {"tokens_per_segment", c.tokens_per_segment},
                {"signal_synonyms", c.signal_synonyms},
                {"noise_token_rate", c.noise_token_rate},
                {"manipulated_fraction", c.manipulated_fraction},
                {"bias_proportion", c.bias_proportion},
                {"seed", c.seed}};
}

SynthConfig synth_from_json(const json& j) {
    SynthConfig c;
    c.num_labels = j.at("num_labels").get<int>();
    c.train_size = j.at("train_size").get<int>();
    c.test_size = j.at("test_size").get<int>();
    c.vocab_size = j.at("vocab_size").get<int>();
    c.tokens_per_segment = j.at("tokens_per_segment").get<int>();
    c.signal_synonyms = j.at("signal_synonyms").get<int>();
    c.noise_token_rate = j.at("noise_token_rate").get<double>();
    c.manipulated_fraction = j.at("manipulated_fraction").get<double>();
    c.bias_proportion = j.at("bias_proportion").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

void check_example(const Example& ex, const Dataset& ds, int line_no) {
    auto fail = [&](const std::string& msg) {
        throw SchemaError("line " + std::to_string(line_no) + " (id " + std::to_string(ex.id) + "): " + msg);
    };
    if (ex.label < 0 || ex.label >= ds.num_labels) fail("label out of range");
    for (const auto* seg : {&ex.segment_a, &ex.segment_b}) {
        for (TokenId t : *seg)
            if (t < 0 || t >= ds.vocab_size) fail("token out of range");
    }
    switch (ex.bias_tag) {
        case BiasTag::clean:
            if (ex.bias_token) fail("clean example carries a bias token");
            break;
        case BiasTag::biased:
            if (!ex.bias_token || *ex.bias_token != ex.label) fail("biased example must carry its label code");
            break;
        case BiasTag::anti_biased:
            if (!ex.bias_token || *ex.bias_token == ex.label || *ex.bias_token < 0 || *ex.bias_token >= ds.num_labels)
                fail("anti_biased example must carry a wrong label code");
            break;
    }
}

}  // namespace

std::string dataset_to_jsonl(const Dataset& ds, const std::string& config_digest) {
    std::string out;
    const json header{{"num_labels", ds.num_labels},         {"vocab_size", ds.vocab_size},
                      {"config_digest", config_digest},      {"split", ds.split},
                      {"generation_seed", ds.generation_seed}, {"provenance", synth_to_json(ds.provenance)},
                      {"count", ds.size()}};
    out += header.dump() + "\n";
    for (const auto& ex : ds.examples) {
        json j{{"id", ex.id},
               {"segment_a", ex.segment_a},
               {"segment_b", ex.segment_b},
               {"label", ex.label},
               {"bias_tag", std::string(to_string(ex.bias_tag))},
               {"bias_token", nullptr}};
        if (ex.bias_token) j["bias_token"] = *ex.bias_token;
        out += j.dump() + "\n";
    }
    return out;
}

LoadedDataset dataset_from_jsonl(std::string_view text) {
    LoadedDataset out;
    bool have_header = false;
    std::size_t expected = 0;
    for_each_jsonl(text, [&](const json& j, int line_no) {
        if (!have_header) {
            out.data.num_labels = j.at("num_labels").get<int>();
            out.data.vocab_size = j.at("vocab_size").get<int>();
            out.config_digest = j.at("config_digest").get<std::string>();
            out.data.split = j.value("split", std::string("train"));
            out.data.generation_seed = j.value("generation_seed", std::uint64_t{0});
            if (j.contains("provenance")) out.data.provenance = synth_from_json(j.at("provenance"));
            expected = j.value("count", std::size_t{0});
            if (out.data.num_labels < 2 || out.data.vocab_size < 1) throw SchemaError("invalid dataset header");
            have_header = true;
            return;
        }
        Example ex;
        ex.id = j.at("id").get<ExampleId>();
        ex.segment_a = j.at("segment_a").get<std::vector<TokenId>>();
        ex.segment_b = j.at("segment_b").get<std::vector<TokenId>>();
        ex.label = j.at("label").get<int>();
        try {
            ex.bias_tag = parse_bias_tag(j.at("bias_tag").get<std::string>());
        } catch (const DataError& e) {
            throw SchemaError("line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!j.at("bias_token").is_null()) ex.bias_token = j.at("bias_token").get<TokenId>();
        check_example(ex, out.data, line_no);
        out.data.examples.push_back(std::move(ex));
    });
    if (!have_header) throw SchemaError("dataset file has no header line");
    if (expected != 0 && expected != out.data.size()) {
        throw SchemaError("dataset header announces " + std::to_string(expected) + " examples, found " +
                          std::to_string(out.data.size()));
    }
    return out;
}

void save_dataset(const Dataset& ds, const fs::path& path, const std::string& config_digest) {
    write_file(path, dataset_to_jsonl(ds, config_digest));
}

LoadedDataset load_dataset(const fs::path& path) {
    try {
        return dataset_from_jsonl(read_file(path));
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": malformed JSON", e.offset());
    } catch (const SchemaError& e) {
        throw SchemaError(path.string() + ": " + e.what());
    }
}

std::string weights_to_jsonl(const BiasWeights& weights) {
    std::string out;
    for (const auto& e : weights.entries()) {
        out += json{{"id", e.id}, {"p_b", e.p_b}, {"p_b_correct", e.p_b_correct}, {"predicted", e.predicted}}.dump();
        out += "\n";
    }
    return out;
}

BiasWeights weights_from_jsonl(std::string_view text) {
    std::vector<BiasEntry> entries;
    std::size_t k = 0;
    for_each_jsonl(text, [&](const json& j, int line_no) {
        BiasEntry e;
        e.id = j.at("id").get<ExampleId>();
        e.p_b = j.at("p_b").get<ProbVector>();
        e.p_b_correct = j.at("p_b_correct").get<double>();
        e.predicted = j.at("predicted").get<int>();
        if (k == 0) k = e.p_b.size();
        if (e.p_b.size() != k || k < 2)
            throw SchemaError("line " + std::to_string(line_no) + ": p_b has " + std::to_string(e.p_b.size()) +
                              " entries, expected " + std::to_string(k));
        entries.push_back(std::move(e));
    });
    try {
        return BiasWeights(std::move(entries));
    } catch (const DataError& e) {
        throw SchemaError(e.what());
    }
}

std::string checkpoint_to_json(const Classifier& model, const std::string& config_digest) {
    const auto& p = model.params;
    const ModelShape s = p.shape();
    json w1 = json::array();
    for (int i = 0; i < s.input_dim; ++i) {
        const auto row = p.w1_row(static_cast<std::size_t>(i));
        w1.push_back(std::vector<double>(row.begin(), row.end()));
    }
    json w2 = json::array();
    const auto w2f = p.layer(Layer::w2);
    for (int h = 0; h < s.hidden; ++h) {
        w2.push_back(std::vector<double>(w2f.begin() + h * s.num_labels, w2f.begin() + (h + 1) * s.num_labels));
    }
    const auto b1 = p.layer(Layer::b1);
    const auto b2 = p.layer(Layer::b2);
    const json j{{"meta",
                  {{"D", s.input_dim},
                   {"H", s.hidden},
                   {"K", s.num_labels},
                   {"V", model.space.vocab_size},
                   {"step", model.step},
                   {"config_digest", config_digest}}},
                 {"W1", std::move(w1)},
                 {"b1", std::vector<double>(b1.begin(), b1.end())},
                 {"W2", std::move(w2)},
                 {"b2", std::vector<double>(b2.begin(), b2.end())}};
    return j.dump() + "\n";
}

LoadedCheckpoint checkpoint_from_json(std::string_view text, std::optional<int> expected_labels) {
    const json j = parse_at(text, 0);
    LoadedCheckpoint out;
    try {
        const json& meta = j.at("meta");
        ModelShape s;
        s.input_dim = meta.at("D").get<int>();
        s.hidden = meta.at("H").get<int>();
        s.num_labels = meta.at("K").get<int>();
        const int vocab = meta.at("V").get<int>();
        if (s.input_dim < 1 || s.hidden < 1 || s.num_labels < 2 || vocab < 1 || s.input_dim <= 2 * vocab)
            throw SchemaError("checkpoint meta has an invalid shape");
        if (expected_labels && *expected_labels != s.num_labels) {
            throw SchemaError("checkpoint has K=" + std::to_string(s.num_labels) + " but the data has K=" +
                              std::to_string(*expected_labels));
        }
        out.config_digest = meta.at("config_digest").get<std::string>();
        out.model.space = FeatureSpace{vocab, s.input_dim};
        out.model.step = meta.at("step").get<std::int64_t>();
        out.model.params = ModelParams::zeros(s);
        auto& p = out.model.params;

        auto need = [](const json& arr, std::size_t n, const char* name) {
            if (!arr.is_array() || arr.size() != n)
                throw SchemaError(std::string("checkpoint ") + name + " has the wrong length");
        };
        const json& w1 = j.at("W1");
        need(w1, static_cast<std::size_t>(s.input_dim), "W1");
        for (int i = 0; i < s.input_dim; ++i) {
            need(w1[i], static_cast<std::size_t>(s.hidden), "W1 row");
            auto row = p.w1_row(static_cast<std::size_t>(i));
            for (int h = 0; h < s.hidden; ++h) row[h] = w1[i][h].get<double>();
        }
        const json& b1 = j.at("b1");
        need(b1, static_cast<std::size_t>(s.hidden), "b1");
        for (int h = 0; h < s.hidden; ++h) p.layer(Layer::b1)[h] = b1[h].get<double>();
        const json& w2 = j.at("W2");
        need(w2, static_cast<std::size_t>(s.hidden), "W2");
        auto w2f = p.layer(Layer::w2);
        for (int h = 0; h < s.hidden; ++h) {
            need(w2[h], static_cast<std::size_t>(s.num_labels), "W2 row");
            for (int k = 0; k < s.num_labels; ++k) w2f[h * s.num_labels + k] = w2[h][k].get<double>();
        }
        const json& b2 = j.at("b2");
        need(b2, static_cast<std::size_t>(s.num_labels), "b2");
        for (int k = 0; k < s.num_labels; ++k) p.layer(Layer::b2)[k] = b2[k].get<double>();
    } catch (const json::exception& e) {
        throw SchemaError(std::string("checkpoint: ") + e.what());
    }
    return out;
}

void save_checkpoint(const Classifier& model, const fs::path& path, const std::string& config_digest) {
    write_file(path, checkpoint_to_json(model, config_digest));
}

LoadedCheckpoint load_checkpoint(const fs::path& path, std::optional<int> expected_labels) {
    try {
        return checkpoint_from_json(read_file(path), expected_labels);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": malformed JSON", e.offset());
    } catch (const SchemaError& e) {
        throw SchemaError(path.string() + ": " + e.what());
    }
}

std::string metrics_to_jsonl(const MetricsLog& log) {
    std::string out;
    for (const auto& r : log.records) {
        json j{{"step", r.step},
               {"mean_loss", r.mean_loss},
               {"p0", r.loss_percentiles[0]},
               {"p25", r.loss_percentiles[1]},
               {"p50", r.loss_percentiles[2]},
               {"p75", r.loss_percentiles[3]},
               {"p100", r.loss_percentiles[4]},
               {"alpha", r.alpha},
               {"clamped", r.clamped},
               {"eval_mode", log.eval_mode}};
        if (r.accuracy) {
            j["original"] = r.accuracy->original;
            j["biased"] = r.accuracy->biased;
            j["anti_biased"] = r.accuracy->anti_biased;
        }
        out += j.dump() + "\n";
    }
    return out;
}

MetricsLog metrics_from_jsonl(std::string_view text) {
    MetricsLog log;
    for_each_jsonl(text, [&](const json& j, int) {
        MetricsRecord r;
        r.step = j.at("step").get<std::int64_t>();
        r.mean_loss = j.at("mean_loss").get<double>();
        r.loss_percentiles = {j.at("p0").get<double>(), j.at("p25").get<double>(), j.at("p50").get<double>(),
                              j.at("p75").get<double>(), j.at("p100").get<double>()};
        r.alpha = j.at("alpha").get<double>();
        r.clamped = j.value("clamped", std::int64_t{0});
        if (j.contains("original")) {
            r.accuracy = SplitAccuracy{j.at("original").get<double>(), j.at("biased").get<double>(),
                                       j.at("anti_biased").get<double>()};
        }
        log.eval_mode = j.value("eval_mode", log.eval_mode);
        log.records.push_back(r);
    });
    return log;
}

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

}  // namespace

std::string histogram_to_csv(const ConfidenceHistogram& h) {
    std::string out = "bin_lo,bin_hi,count,correct,correct_fraction\n";
    for (const auto& b : h.bins) {
        out += num(b.lo) + "," + num(b.hi) + "," + std::to_string(b.count) + "," + std::to_string(b.correct) + "," +
               num(b.correct_fraction()) + "\n";
    }
    return out;
}

std::string grid_to_csv(const GridReport& grid) {
    std::string out = "n_s,e_s,unseen_acc,high_conf_frac,degenerate,pass\n";
    for (const auto& c : grid.cells) {
        out += std::to_string(c.sample_size) + "," + std::to_string(c.epochs) + "," +
               num(c.diagnosis.unseen_accuracy) + "," + num(c.diagnosis.high_conf_fraction) + "," +
               (c.diagnosis.degenerate ? "true" : "false") + "," + (c.diagnosis.pass ? "true" : "false") + "\n";
    }
    return out;
}

}  // namespace debias

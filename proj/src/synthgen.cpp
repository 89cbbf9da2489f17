#include "debias/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "debias/errors.hpp"
#include "debias/rng.hpp"

namespace debias {

std::string_view to_string(BiasTag tag) {
    switch (tag) {
        case BiasTag::clean: return "clean";
        case BiasTag::biased: return "biased";
        case BiasTag::anti_biased: return "anti_biased";
    }
    return "clean";
}

BiasTag parse_bias_tag(std::string_view text) {
    if (text == "clean") return BiasTag::clean;
    if (text == "biased") return BiasTag::biased;
    if (text == "anti_biased") return BiasTag::anti_biased;
    throw DataError("unknown bias_tag '" + std::string(text) + "'");
}

void SynthConfig::validate() const {
    auto fail = [](const std::string& msg) { throw ConfigError(msg); };
    if (num_labels < 2) fail("num_labels must be >= 2");
    if (train_size <= 0) fail("train_size must be > 0");
    if (test_size <= 0) fail("test_size must be > 0");
    if (tokens_per_segment < 1) fail("tokens_per_segment must be >= 1");
    if (signal_synonyms < 1) fail("signal_synonyms must be >= 1");
    if (!(noise_token_rate >= 0.0 && noise_token_rate <= 1.0)) fail("noise_token_rate must be in [0,1]");
    if (!(manipulated_fraction >= 0.0 && manipulated_fraction <= 1.0))
        fail("manipulated_fraction must be in [0,1]");
    if (!(bias_proportion >= 0.0 && bias_proportion <= 1.0)) fail("bias_proportion must be in [0,1]");
    const TokenLayout layout(*this);
    const bool needs_noise = tokens_per_segment > 1;
    if (layout.noise_count() < (needs_noise ? 1 : 0))
        fail("vocab_size " + std::to_string(vocab_size) + " leaves no room for noise tokens (need > " +
             std::to_string(layout.noise_begin()) + ")");
}

std::int64_t round_half_up(double x) { return static_cast<std::int64_t>(std::floor(x + 0.5)); }

namespace {

Example draw_example(const SynthConfig& cfg, const TokenLayout& layout, Rng& rng, ExampleId id) {
    const int k = cfg.num_labels;
    Example ex;
    ex.id = id;
    ex.label = static_cast<int>(rng.below(k));
    // label = (value_a + value_b) mod K, with value_a uniform: each signal
    // token alone is independent of the label.
    const int value_a = static_cast<int>(rng.below(k));
    int value_b = ((ex.label - value_a) % k + k) % k;
    if (rng.bernoulli(cfg.noise_token_rate)) {
        value_b = (value_b + 1 + static_cast<int>(rng.below(k - 1))) % k;
    }
    const TokenId tok_a = layout.signal_a(value_a, static_cast<int>(rng.below(cfg.signal_synonyms)));
    const TokenId tok_b = layout.signal_b(value_b, static_cast<int>(rng.below(cfg.signal_synonyms)));

    auto fill = [&](TokenId signal) {
        std::vector<TokenId> seg(static_cast<std::size_t>(cfg.tokens_per_segment));
        const std::size_t pos = rng.below(seg.size());
        for (std::size_t i = 0; i < seg.size(); ++i) {
            seg[i] = i == pos ? signal
                              : layout.noise_begin() + static_cast<TokenId>(rng.below(layout.noise_count()));
        }
        return seg;
    };
    ex.segment_a = fill(tok_a);
    ex.segment_b = fill(tok_b);
    return ex;
}

Dataset generate(const SynthConfig& cfg, int n, std::uint64_t seed, std::string split) {
    const TokenLayout layout(cfg);
    Rng rng(seed);
    Dataset ds;
    ds.num_labels = cfg.num_labels;
    ds.vocab_size = cfg.vocab_size;
    ds.provenance = cfg;
    ds.generation_seed = seed;
    ds.split = std::move(split);
    ds.examples.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) ds.examples.push_back(draw_example(cfg, layout, rng, i));
    return ds;
}

}  // namespace

Dataset gen_dataset(const SynthConfig& cfg) {
    cfg.validate();
    return generate(cfg, cfg.train_size, derive_seed(cfg.seed, "data.train"), "train");
}

Dataset inject_bias(const Dataset& dataset, double m, double rho, std::uint64_t seed) {
    if (!(m >= 0.0 && m <= 1.0)) throw ConfigError("bias_proportion must be in [0,1]");
    if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("manipulated_fraction must be in [0,1]");
    for (const auto& ex : dataset.examples) {
        if (ex.bias_tag != BiasTag::clean || ex.bias_token)
            throw DataError("inject_bias: example " + std::to_string(ex.id) + " already carries a bias tag");
    }
    Dataset out = dataset;
    const auto n = static_cast<std::int64_t>(out.examples.size());
    const std::int64_t manipulated = std::min(n, round_half_up(rho * static_cast<double>(n)));
    const std::int64_t n_biased = std::min(manipulated, round_half_up(m * static_cast<double>(manipulated)));

    Rng rng(derive_seed(seed, "bias.inject"));
    std::vector<std::size_t> order(out.examples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(order));
    std::sort(order.begin(), order.begin() + manipulated);

    // Biased/anti split is drawn from a second permutation of the chosen set so
    // that membership does not depend on example position.
    std::vector<std::size_t> chosen(order.begin(), order.begin() + manipulated);
    rng.shuffle(std::span<std::size_t>(chosen));
    const int k = out.num_labels;
    for (std::int64_t i = 0; i < manipulated; ++i) {
        Example& ex = out.examples[chosen[static_cast<std::size_t>(i)]];
        int code = ex.label;
        if (i < n_biased) {
            ex.bias_tag = BiasTag::biased;
        } else {
            code = (ex.label + 1 + static_cast<int>(rng.below(k - 1))) % k;
            ex.bias_tag = BiasTag::anti_biased;
        }
        ex.bias_token = code;
        ex.segment_b.insert(ex.segment_b.begin(), code);
    }
    return out;
}

EvalSuite make_eval_suite(const SynthConfig& cfg) {
    cfg.validate();
    EvalSuite suite;
    suite.original = generate(cfg, cfg.test_size, derive_seed(cfg.seed, "data.eval.original"), "eval:original");
    Dataset biased_base = generate(cfg, cfg.test_size, derive_seed(cfg.seed, "data.eval.biased"), "eval:biased");
    Dataset anti_base =
        generate(cfg, cfg.test_size, derive_seed(cfg.seed, "data.eval.anti_biased"), "eval:anti_biased");
    suite.biased = inject_bias(biased_base, 1.0, 1.0, derive_seed(cfg.seed, "data.eval.biased"));
    suite.anti_biased = inject_bias(anti_base, 0.0, 1.0, derive_seed(cfg.seed, "data.eval.anti_biased"));
    return suite;
}

Dataset make_heldout_split(const SynthConfig& cfg) {
    cfg.validate();
    const Dataset base = generate(cfg, cfg.test_size, derive_seed(cfg.seed, "data.eval.heldout"), "eval:heldout");
    return inject_bias(base, cfg.bias_proportion, cfg.manipulated_fraction, derive_seed(cfg.seed, "data.eval.heldout"));
}

std::optional<int> bias_oracle_predict(const Example& example) {
    if (!example.bias_token) return std::nullopt;
    return static_cast<int>(*example.bias_token);
}

TagCounts count_tags(const Dataset& dataset) {
    TagCounts c;
    for (const auto& ex : dataset.examples) {
        switch (ex.bias_tag) {
            case BiasTag::clean: ++c.clean; break;
            case BiasTag::biased: ++c.biased; break;
            case BiasTag::anti_biased: ++c.anti_biased; break;
        }
    }
    return c;
}

Dataset filter_by_ids(const Dataset& dataset, const std::vector<ExampleId>& ids, bool exclude) {
    const std::unordered_set<ExampleId> set(ids.begin(), ids.end());
    Dataset out = dataset;
    out.examples.clear();
    for (const auto& ex : dataset.examples) {
        if (set.contains(ex.id) != exclude) out.examples.push_back(ex);
    }
    return out;
}

}  // namespace debias

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "debias/eval.hpp"
#include "debias/model.hpp"
#include "debias/shallow_id.hpp"
#include "debias/synthgen.hpp"
#include "debias/trainer.hpp"

namespace debias {

namespace fs = std::filesystem;

// Whole-file helpers; failures raise IoError.
std::string read_file(const fs::path& path);
void write_file(const fs::path& path, std::string_view content);

// Dataset JSONL: a header object, then one example per line.
struct LoadedDataset {
    Dataset data;
    std::string config_digest;
};
std::string dataset_to_jsonl(const Dataset& ds, const std::string& config_digest);
LoadedDataset dataset_from_jsonl(std::string_view text);
void save_dataset(const Dataset& ds, const fs::path& path, const std::string& config_digest);
LoadedDataset load_dataset(const fs::path& path);

// One {"id","p_b","p_b_correct","predicted"} object per line.
std::string weights_to_jsonl(const BiasWeights& weights);
BiasWeights weights_from_jsonl(std::string_view text);

// {meta:{D,H,K,V,step,config_digest}, W1, b1, W2, b2}.
struct LoadedCheckpoint {
    Classifier model;
    std::string config_digest;
};
std::string checkpoint_to_json(const Classifier& model, const std::string& config_digest);
// expected_labels, when given, must match K (SchemaError otherwise).
LoadedCheckpoint checkpoint_from_json(std::string_view text, std::optional<int> expected_labels = {});
void save_checkpoint(const Classifier& model, const fs::path& path, const std::string& config_digest);
LoadedCheckpoint load_checkpoint(const fs::path& path, std::optional<int> expected_labels = {});

// MetricsRecord per line; the first line records the eval mode.
std::string metrics_to_jsonl(const MetricsLog& log);
MetricsLog metrics_from_jsonl(std::string_view text);

std::string histogram_to_csv(const ConfidenceHistogram& h);
std::string grid_to_csv(const GridReport& grid);

}  // namespace debias

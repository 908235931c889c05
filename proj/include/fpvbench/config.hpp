// Run configuration: a JSON tree of defaults, overlaid by a config file and
// then by `key.path=value` overrides.

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "fpvbench/degrade.hpp"
#include "fpvbench/metrics.hpp"
#include "fpvbench/perceive.hpp"
#include "fpvbench/predict.hpp"
#include "fpvbench/scenegen.hpp"

namespace fpvbench {

enum class CovarianceSource { kEstimated, kFixed };

struct RunConfig {
    std::filesystem::path manifest;
    std::filesystem::path out;
    std::uint64_t seed{0};
    int jobs{1};
    std::vector<std::string> folds;  // empty: every fold in the manifest
    std::vector<Variant> variants;

    SceneShape shape;
    int slerp_window{3};
    RenderSettings render;
    VisibilityParams visibility;
    NoiseConfig noise;
    DetectorConfig detector;
    TrackerConfig tracker;
    CovarianceSource covariance{CovarianceSource::kEstimated};
    PredictorConfig predictor;
    std::vector<Predictor> algorithms;
    MetricConfig metrics;

    nlohmann::json tree;  // effective experiment parameters (no jobs/out)
    std::string hash;     // of `tree`

    [[nodiscard]] bool wants(Variant v) const;
};

nlohmann::json default_config_tree();

/// Applies one `a.b.c=value` override; value is parsed as JSON, falling back
/// to a plain string. Unknown keys are rejected.
void apply_override(nlohmann::json& tree, const std::string& assignment);

/// Merges `overlay` into `tree`, rejecting keys absent from `tree`.
void merge_tree(nlohmann::json& tree, const nlohmann::json& overlay, const std::string& prefix = {});

RunConfig config_from_tree(const nlohmann::json& tree);

/// Defaults, then `config_file` (if non-empty), then overrides in order.
RunConfig load_config(const std::filesystem::path& config_file, const std::vector<std::string>& overrides);

std::string config_hash(const nlohmann::json& tree);

}  // namespace fpvbench

// Baseline predictors with best-of-K sampling, plus the layer-norm and
// social-pooling operators.

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fpvbench/rng.hpp"
#include "fpvbench/scenegen.hpp"

namespace fpvbench {

using Trajectory = std::vector<Vec2>;

struct PredictionSet {
    AgentId agent_id{0};
    std::optional<AgentId> gt_id;
    std::vector<Trajectory> samples;  // K samples of t_pred positions
    friend bool operator==(const PredictionSet&, const PredictionSet&) = default;
};

enum class Predictor { kConstantVelocity, kOracle };

std::string_view to_string(Predictor p) noexcept;
std::optional<Predictor> parse_predictor(std::string_view s) noexcept;

struct PredictorConfig {
    int k{20};
    int history_intervals{3};
    double sigma_heading{0.2};  // rad, samples 2..K
    double sigma_speed{0.2};    // relative speed scale, samples 2..K
    std::uint64_t seed{0};
    void validate() const;
};

/// Constant-velocity extrapolation from the tracklet's last observations.
/// Sample i draws from `key.add(agent).add(i)`, so samples are independent of K.
PredictionSet predict_cv(const Tracklet& tracklet, int t_obs, int t_pred, const PredictorConfig& cfg,
                         const StreamKey& scene_key);

/// Replays the ground-truth future for agents with one; falls back to
/// constant velocity otherwise (ghosts, partial futures).
PredictionSet predict_oracle(const Tracklet& tracklet, const Scene& scene, const PredictorConfig& cfg,
                             const StreamKey& scene_key);

StreamKey scene_stream(std::uint64_t seed, const Scene& scene);

/// One prediction per tracklet, in tracklet order.
std::vector<PredictionSet> predict_scene(const Scene& scene, Predictor predictor, const PredictorConfig& cfg);

// ---------------------------------------------------------------------------

/// Population-variance layer normalization. Empty gain/bias mean 1 and 0.
Eigen::VectorXd layer_norm(const Eigen::VectorXd& v, const Eigen::VectorXd& gain = {},
                           const Eigen::VectorXd& bias = {}, double eps = 1e-5);

struct StateMatrix {
    Eigen::MatrixXd states;       // one row per agent
    std::vector<Vec2> positions;  // same order as rows
};

/// Row-normalized exp(-d / bandwidth) similarity with a zero diagonal.
Eigen::MatrixXd social_weights(std::span<const Vec2> positions, double bandwidth = 2.0);

/// state_i + sum_j w_ij state_j.
StateMatrix social_pool(const StateMatrix& in, double bandwidth = 2.0);

// ---------------------------------------------------------------------------

struct MinOverK {
    std::size_t index{0};
    double ade{0};
    double fde{0};
};

/// Best sample by ADE. With `independent_min`, FDE is the minimum over all
/// samples instead of the FDE of the ADE-best sample.
MinOverK min_over_k(const PredictionSet& pred, std::span<const Vec2> gt, bool independent_min = false);

}  // namespace fpvbench

#include "fpvbench/predict.hpp"

#include <algorithm>
#include <limits>

#include "fpvbench/metrics.hpp"

namespace fpvbench {

std::string_view to_string(Predictor p) noexcept {
    switch (p) {
        case Predictor::kConstantVelocity: return "cv";
        case Predictor::kOracle: return "oracle";
    }
    return "?";
}

std::optional<Predictor> parse_predictor(std::string_view s) noexcept {
    if (s == "cv") return Predictor::kConstantVelocity;
    if (s == "oracle") return Predictor::kOracle;
    return std::nullopt;
}

void PredictorConfig::validate() const {
    if (k < 1) throw ConfigError("predictor: k must be >= 1");
    if (history_intervals < 1) throw ConfigError("predictor: history_intervals must be >= 1");
    if (!(sigma_heading >= 0 && sigma_speed >= 0)) throw ConfigError("predictor: sigmas must be >= 0");
}

StreamKey scene_stream(std::uint64_t seed, const Scene& scene) {
    StreamKey k(seed);
    k.add(std::string_view("predict")).add(scene.fold).add(scene.recording).add(scene.window_start);
    k.add(scene.ego_id.value_or(std::numeric_limits<AgentId>::min()));
    return k;
}

PredictionSet predict_cv(const Tracklet& tracklet, int t_obs, int t_pred, const PredictorConfig& cfg,
                         const StreamKey& scene_key) {
    if (tracklet.obs.empty()) throw DataError("predict_cv: tracklet " + std::to_string(tracklet.id) + " is empty");
    const auto& obs = tracklet.obs;
    const TimedPos& last = obs.back();
    const std::size_t back = std::min<std::size_t>(static_cast<std::size_t>(cfg.history_intervals), obs.size() - 1);
    const TimedPos& first = obs[obs.size() - 1 - back];
    Vec2 v{0, 0};
    if (last.t > first.t) v = (1.0 / (last.t - first.t)) * (last.p - first.p);

    PredictionSet out;
    out.agent_id = tracklet.id;
    out.gt_id = tracklet.gt_id;
    out.samples.reserve(static_cast<std::size_t>(cfg.k));
    for (int i = 0; i < cfg.k; ++i) {
        Vec2 vi = v;
        if (i > 0) {
            auto g = StreamKey(scene_key).add(tracklet.id).add(i).engine();
            const double dh = cfg.sigma_heading > 0 ? std::normal_distribution<double>(0, cfg.sigma_heading)(g) : 0.0;
            const double ds = cfg.sigma_speed > 0 ? std::normal_distribution<double>(0, cfg.sigma_speed)(g) : 0.0;
            const double s = std::max(0.0, 1.0 + ds);
            const double c = std::cos(dh), sn = std::sin(dh);
            vi = {s * (c * v.x - sn * v.y), s * (sn * v.x + c * v.y)};
        }
        Trajectory tr;
        tr.reserve(static_cast<std::size_t>(t_pred));
        for (int t = t_obs; t < t_obs + t_pred; ++t) tr.push_back(last.p + static_cast<double>(t - last.t) * vi);
        out.samples.push_back(std::move(tr));
    }
    return out;
}

PredictionSet predict_oracle(const Tracklet& tracklet, const Scene& scene, const PredictorConfig& cfg,
                             const StreamKey& scene_key) {
    if (tracklet.gt_id && scene.is_target(*tracklet.gt_id)) {
        PredictionSet out;
        out.agent_id = tracklet.id;
        out.gt_id = tracklet.gt_id;
        Trajectory tr;
        for (const auto& f : scene.truth_of(*tracklet.gt_id)->future) tr.push_back(f.p);
        out.samples.assign(static_cast<std::size_t>(cfg.k), tr);
        return out;
    }
    return predict_cv(tracklet, scene.t_obs, scene.t_pred, cfg, scene_key);
}

std::vector<PredictionSet> predict_scene(const Scene& scene, Predictor predictor, const PredictorConfig& cfg) {
    cfg.validate();
    const StreamKey key = scene_stream(cfg.seed, scene);
    std::vector<PredictionSet> out;
    out.reserve(scene.tracklets.size());
    for (const auto& tr : scene.tracklets) {
        if (predictor == Predictor::kOracle) {
            out.push_back(predict_oracle(tr, scene, cfg, key));
        } else {
            out.push_back(predict_cv(tr, scene.t_obs, scene.t_pred, cfg, key));
        }
    }
    return out;
}

Eigen::VectorXd layer_norm(const Eigen::VectorXd& v, const Eigen::VectorXd& gain, const Eigen::VectorXd& bias,
                           double eps) {
    if (v.size() < 2) throw ConfigError("layer_norm: vector length must be >= 2");
    if (!(eps > 0)) throw ConfigError("layer_norm: eps must be positive");
    if ((gain.size() && gain.size() != v.size()) || (bias.size() && bias.size() != v.size())) {
        throw ConfigError("layer_norm: gain/bias length mismatch");
    }
    const double mean = v.mean();
    const Eigen::VectorXd centered = v.array() - mean;
    const double var = centered.squaredNorm() / static_cast<double>(v.size());
    Eigen::VectorXd out = centered / std::sqrt(var + eps);
    if (gain.size()) out = out.cwiseProduct(gain);
    if (bias.size()) out += bias;
    return out;
}

Eigen::MatrixXd social_weights(std::span<const Vec2> positions, double bandwidth) {
    if (!(bandwidth > 0)) throw ConfigError("social_pool: bandwidth must be positive");
    const auto n = static_cast<Eigen::Index>(positions.size());
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            if (i != j) w(i, j) = std::exp(-distance(positions[i], positions[j]) / bandwidth);
        }
        const double sum = w.row(i).sum();
        if (sum > 0) w.row(i) /= sum;
    }
    return w;
}

StateMatrix social_pool(const StateMatrix& in, double bandwidth) {
    if (static_cast<std::size_t>(in.states.rows()) != in.positions.size()) {
        throw ConfigError("social_pool: one position per state row required");
    }
    StateMatrix out = in;
    if (in.positions.size() < 2) return out;
    out.states += social_weights(in.positions, bandwidth) * in.states;
    return out;
}

MinOverK min_over_k(const PredictionSet& pred, std::span<const Vec2> gt, bool independent_min) {
    if (pred.samples.empty()) throw DataError("min_over_k: empty prediction set");
    MinOverK best{0, std::numeric_limits<double>::infinity(), 0};
    double min_fde = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pred.samples.size(); ++i) {
        const AdeFde e = ade_fde(pred.samples[i], gt);
        if (e.ade < best.ade) best = {i, e.ade, e.fde};
        min_fde = std::min(min_fde, e.fde);
    }
    if (independent_min) best.fde = min_fde;
    return best;
}

}  // namespace fpvbench

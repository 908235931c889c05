#include "fpvbench/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "fpvbench/rng.hpp"

namespace fpvbench {

using nlohmann::json;

bool RunConfig::wants(Variant v) const {
    return std::find(variants.begin(), variants.end(), v) != variants.end();
}

json default_config_tree() {
    const CameraModel cam;
    const BodyModel body;
    const VisibilityParams vis;
    const NoiseConfig noise;
    const DetectorConfig det;
    const TrackerConfig trk;
    const PredictorConfig pred;
    const MetricConfig met;
    json variants = json::array();
    for (Variant v : kAllVariants) variants.push_back(std::string(to_string(v)));
    return {
        {"manifest", "data/eth_ucy/manifest.json"},
        {"out", "out"},
        {"seed", 0},
        {"jobs", 1},
        {"folds", json::array()},
        {"variants", variants},
        {"scene", {{"t_obs", kDefaultObsSteps}, {"t_pred", kDefaultPredSteps}, {"slerp_window", 3}}},
        {"camera",
         {{"height_m", cam.height_m},
          {"focal_mm", cam.focal_mm},
          {"sensor_w_mm", cam.sensor_w_mm},
          {"sensor_h_mm", cam.sensor_h_mm},
          {"image_w_px", cam.image_w_px},
          {"image_h_px", cam.image_h_px}}},
        {"body", {{"radius_m", body.radius_m}, {"height_m", body.height_m}}},
        {"visibility", {{"min_pixels", vis.min_pixels}, {"min_steps", vis.min_steps}, {"contiguous", vis.contiguous}}},
        {"noise",
         {{"p_tracklet_drop", noise.p_tracklet_drop},
          {"p_box_drop", noise.p_box_drop},
          {"p_id_switch", noise.p_id_switch},
          {"sigma_pos", noise.sigma_pos},
          {"id_switch_basis", "surviving_steps"}}},
        {"detector",
         {{"p_miss_base", det.p_miss_base},
          {"p_miss_dist_coeff", det.p_miss_dist_coeff},
          {"miss_free_range_m", det.miss_free_range_m},
          {"sigma_range_abs", det.sigma_range_abs},
          {"sigma_range_rel", det.sigma_range_rel},
          {"sigma_bearing", det.sigma_bearing},
          {"sigma_yaw", det.sigma_yaw},
          {"false_positives_per_frame", det.false_positives_per_frame},
          {"ghost_min_range_m", det.ghost_min_range_m},
          {"ghost_max_range_m", det.ghost_max_range_m},
          {"score_base", det.score_base},
          {"score_decay_per_m", det.score_decay_per_m},
          {"score_sigma", det.score_sigma},
          {"ghost_score_mean", det.ghost_score_mean},
          {"footprint_m", det.footprint_m},
          {"min_pixels", det.min_pixels}}},
        {"tracker",
         {{"dt", trk.dt},
          {"iou_min", trk.iou_min},
          {"min_hits", trk.min_hits},
          {"max_misses", trk.max_misses},
          {"method", "optimal"},
          {"birth_gate_m", trk.birth_gate_m},
          {"init_vel_var", trk.init_vel_var},
          {"footprint_m", trk.footprint_m},
          {"identity_max_mean_dist_m", trk.identity_max_mean_dist_m},
          {"covariance", "estimated"},
          {"q_diag", std::vector<double>(6, 1e-2)},
          {"r_diag", std::vector<double>(4, 1e-2)}}},
        {"predictor",
         {{"algorithms", {"cv"}},
          {"k", pred.k},
          {"history_intervals", pred.history_intervals},
          {"sigma_heading", pred.sigma_heading},
          {"sigma_speed", pred.sigma_speed}}},
        {"metrics",
         {{"tau_ade", met.tau_ade},
          {"independent_min", met.independent_min},
          {"iou_min", met.iou_min},
          {"recall_levels", met.recall_levels},
          {"amotp_penalty", met.amotp_penalty}}},
    };
}

void merge_tree(json& tree, const json& overlay, const std::string& prefix) {
    if (!overlay.is_object()) throw ConfigError("config: expected an object at '" + prefix + "'");
    for (const auto& [k, v] : overlay.items()) {
        const std::string path = prefix.empty() ? k : prefix + "." + k;
        if (!tree.contains(k)) throw ConfigError("config: unknown key '" + path + "'");
        if (tree[k].is_object()) {
            merge_tree(tree[k], v, path);
        } else {
            tree[k] = v;
        }
    }
}

void apply_override(json& tree, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    json* node = &tree;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (!node->is_object() || !node->contains(part)) throw ConfigError("config: unknown key '" + key + "'");
        node = &(*node)[part];
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    if (node->is_array() && value.is_string()) {
        json arr = json::array();
        std::size_t s = 0;
        const std::string str = value.get<std::string>();
        while (s <= str.size() && !str.empty()) {
            const auto c = str.find(',', s);
            arr.push_back(str.substr(s, c == std::string::npos ? std::string::npos : c - s));
            if (c == std::string::npos) break;
            s = c + 1;
        }
        value = arr;
    }
    if (node->is_object()) throw ConfigError("config: '" + key + "' is a section, not a value");
    *node = value;
}

std::string config_hash(const json& tree) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(tree.dump())));
    return buf;
}

namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::string_view stage) {
    return StreamKey(seed).add(stage).value();
}

template <int N>
Eigen::Matrix<double, N, N> diag_from(const json& j, const char* name) {
    if (!j.is_array() || j.size() != N) {
        throw ConfigError(std::string("tracker.") + name + " must list " + std::to_string(N) + " values");
    }
    Eigen::Matrix<double, N, N> m = Eigen::Matrix<double, N, N>::Zero();
    for (int i = 0; i < N; ++i) m(i, i) = j.at(static_cast<std::size_t>(i)).template get<double>();
    return m;
}

}  // namespace

RunConfig config_from_tree(const json& full) {
    RunConfig c;
    try {
        c.manifest = full.at("manifest").get<std::string>();
        c.out = full.at("out").get<std::string>();
        c.seed = full.at("seed").get<std::uint64_t>();
        c.jobs = full.at("jobs").get<int>();
        if (c.jobs < 1) throw ConfigError("jobs must be >= 1");
        c.folds = full.at("folds").get<std::vector<std::string>>();
        for (const auto& v : full.at("variants")) {
            const auto pv = parse_variant(v.get<std::string>());
            if (!pv) throw ConfigError("unknown variant '" + v.get<std::string>() + "'");
            c.variants.push_back(*pv);
        }

        const auto& sc = full.at("scene");
        c.shape = {sc.at("t_obs").get<int>(), sc.at("t_pred").get<int>()};
        if (c.shape.t_obs < 1 || c.shape.t_pred < 1) throw ConfigError("scene lengths must be >= 1");
        c.slerp_window = sc.at("slerp_window").get<int>();
        if (c.slerp_window < 1) throw ConfigError("scene.slerp_window must be >= 1");

        const auto& cam = full.at("camera");
        c.render.camera.height_m = cam.at("height_m").get<double>();
        c.render.camera.focal_mm = cam.at("focal_mm").get<double>();
        c.render.camera.sensor_w_mm = cam.at("sensor_w_mm").get<double>();
        c.render.camera.sensor_h_mm = cam.at("sensor_h_mm").get<double>();
        c.render.camera.image_w_px = cam.at("image_w_px").get<int>();
        c.render.camera.image_h_px = cam.at("image_h_px").get<int>();
        c.render.camera.validate();
        const auto& body = full.at("body");
        c.render.body.radius_m = body.at("radius_m").get<double>();
        c.render.body.height_m = body.at("height_m").get<double>();
        c.render.body.validate();

        const auto& vis = full.at("visibility");
        c.visibility.min_pixels = vis.at("min_pixels").get<long>();
        c.visibility.min_steps = vis.at("min_steps").get<int>();
        c.visibility.contiguous = vis.at("contiguous").get<bool>();

        const auto& n = full.at("noise");
        c.noise.p_tracklet_drop = n.at("p_tracklet_drop").get<double>();
        c.noise.p_box_drop = n.at("p_box_drop").get<double>();
        c.noise.p_id_switch = n.at("p_id_switch").get<double>();
        c.noise.sigma_pos = n.at("sigma_pos").get<double>();
        const auto basis = n.at("id_switch_basis").get<std::string>();
        if (basis == "surviving_steps") {
            c.noise.id_switch_basis = IdSwitchBasis::kSurvivingSteps;
        } else if (basis == "visible_steps") {
            c.noise.id_switch_basis = IdSwitchBasis::kVisibleSteps;
        } else {
            throw ConfigError("noise.id_switch_basis must be surviving_steps or visible_steps");
        }
        c.noise.seed = derive_seed(c.seed, "noise");
        c.noise.validate();

        const auto& d = full.at("detector");
        c.detector.p_miss_base = d.at("p_miss_base").get<double>();
        c.detector.p_miss_dist_coeff = d.at("p_miss_dist_coeff").get<double>();
        c.detector.miss_free_range_m = d.at("miss_free_range_m").get<double>();
        c.detector.sigma_range_abs = d.at("sigma_range_abs").get<double>();
        c.detector.sigma_range_rel = d.at("sigma_range_rel").get<double>();
        c.detector.sigma_bearing = d.at("sigma_bearing").get<double>();
        c.detector.sigma_yaw = d.at("sigma_yaw").get<double>();
        c.detector.false_positives_per_frame = d.at("false_positives_per_frame").get<double>();
        c.detector.ghost_min_range_m = d.at("ghost_min_range_m").get<double>();
        c.detector.ghost_max_range_m = d.at("ghost_max_range_m").get<double>();
        c.detector.score_base = d.at("score_base").get<double>();
        c.detector.score_decay_per_m = d.at("score_decay_per_m").get<double>();
        c.detector.score_sigma = d.at("score_sigma").get<double>();
        c.detector.ghost_score_mean = d.at("ghost_score_mean").get<double>();
        c.detector.footprint_m = d.at("footprint_m").get<double>();
        c.detector.min_pixels = d.at("min_pixels").get<long>();
        c.detector.seed = derive_seed(c.seed, "detector");
        c.detector.validate();

        const auto& t = full.at("tracker");
        c.tracker.dt = t.at("dt").get<double>();
        c.tracker.iou_min = t.at("iou_min").get<double>();
        c.tracker.min_hits = t.at("min_hits").get<int>();
        c.tracker.max_misses = t.at("max_misses").get<int>();
        const auto method = t.at("method").get<std::string>();
        if (method == "optimal") {
            c.tracker.method = AssignmentMethod::kOptimal;
        } else if (method == "greedy") {
            c.tracker.method = AssignmentMethod::kGreedy;
        } else {
            throw ConfigError("tracker.method must be optimal or greedy");
        }
        c.tracker.birth_gate_m = t.at("birth_gate_m").get<double>();
        c.tracker.init_vel_var = t.at("init_vel_var").get<double>();
        c.tracker.footprint_m = t.at("footprint_m").get<double>();
        c.tracker.identity_max_mean_dist_m = t.at("identity_max_mean_dist_m").get<double>();
        const auto cov = t.at("covariance").get<std::string>();
        if (cov == "estimated") {
            c.covariance = CovarianceSource::kEstimated;
        } else if (cov == "fixed") {
            c.covariance = CovarianceSource::kFixed;
        } else {
            throw ConfigError("tracker.covariance must be estimated or fixed");
        }
        c.tracker.Q = diag_from<6>(t.at("q_diag"), "q_diag");
        c.tracker.R = diag_from<4>(t.at("r_diag"), "r_diag");
        c.tracker.validate();

        const auto& p = full.at("predictor");
        for (const auto& a : p.at("algorithms")) {
            const auto pa = parse_predictor(a.get<std::string>());
            if (!pa) throw ConfigError("unknown predictor '" + a.get<std::string>() + "'");
            c.algorithms.push_back(*pa);
        }
        c.predictor.k = p.at("k").get<int>();
        c.predictor.history_intervals = p.at("history_intervals").get<int>();
        c.predictor.sigma_heading = p.at("sigma_heading").get<double>();
        c.predictor.sigma_speed = p.at("sigma_speed").get<double>();
        c.predictor.seed = derive_seed(c.seed, "predictor");
        c.predictor.validate();

        const auto& m = full.at("metrics");
        c.metrics.tau_ade = m.at("tau_ade").get<double>();
        c.metrics.independent_min = m.at("independent_min").get<bool>();
        c.metrics.iou_min = m.at("iou_min").get<double>();
        c.metrics.recall_levels = m.at("recall_levels").get<int>();
        c.metrics.amotp_penalty = m.at("amotp_penalty").get<double>();
        c.metrics.validate();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    c.tree = full;
    c.tree.erase("jobs");
    c.tree.erase("out");
    c.hash = config_hash(c.tree);
    return c;
}

RunConfig load_config(const std::filesystem::path& config_file, const std::vector<std::string>& overrides) {
    json tree = default_config_tree();
    if (!config_file.empty()) {
        std::ifstream in(config_file);
        if (!in) throw ConfigError("cannot open config " + config_file.string());
        json user = json::parse(in, nullptr, false, true);
        if (user.is_discarded()) throw ConfigError("config " + config_file.string() + " is not valid JSON");
        merge_tree(tree, user);
    }
    for (const auto& o : overrides) apply_override(tree, o);
    return config_from_tree(tree);
}

}  // namespace fpvbench

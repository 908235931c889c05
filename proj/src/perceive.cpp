#include "fpvbench/perceive.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <map>
#include <numeric>

namespace fpvbench {

// ---------------------------------------------------------------------------
// BEV IoU

namespace {

using Poly = std::vector<Vec2>;

Poly corners(const BevBox& b) {
    const double c = std::cos(b.yaw);
    const double s = std::sin(b.yaw);
    const double hl = b.l / 2.0;
    const double hw = b.w / 2.0;
    const std::array<Vec2, 4> local{{{hl, hw}, {-hl, hw}, {-hl, -hw}, {hl, -hw}}};
    Poly out;
    for (const auto& p : local) out.push_back({b.cx + c * p.x - s * p.y, b.cy + s * p.x + c * p.y});
    return out;  // counter-clockwise
}

double cross(Vec2 o, Vec2 a, Vec2 b) noexcept { return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x); }

double area(const Poly& p) {
    double a = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const Vec2& u = p[i];
        const Vec2& v = p[(i + 1) % p.size()];
        a += u.x * v.y - v.x * u.y;
    }
    return std::abs(a) / 2.0;
}

// Sutherland-Hodgman clip of `subject` by the convex CCW polygon `clip`.
Poly clip_convex(Poly subject, const Poly& clip) {
    for (std::size_t i = 0; i < clip.size() && !subject.empty(); ++i) {
        const Vec2 a = clip[i];
        const Vec2 b = clip[(i + 1) % clip.size()];
        Poly in = std::move(subject);
        subject.clear();
        for (std::size_t j = 0; j < in.size(); ++j) {
            const Vec2 p = in[j];
            const Vec2 q = in[(j + 1) % in.size()];
            const double cp = cross(a, b, p);
            const double cq = cross(a, b, q);
            if (cp >= 0) subject.push_back(p);
            if ((cp >= 0) != (cq >= 0)) {
                const double t = cp / (cp - cq);
                subject.push_back({p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)});
            }
        }
    }
    return subject;
}

}  // namespace

double bev_iou(const BevBox& a, const BevBox& b) {
    const double reach = (std::hypot(a.w, a.l) + std::hypot(b.w, b.l)) / 2.0;
    if (std::hypot(a.cx - b.cx, a.cy - b.cy) >= reach) return 0.0;
    const Poly pa = corners(a);
    const Poly pb = corners(b);
    const Poly inter = clip_convex(pa, pb);
    const double ia = inter.size() >= 3 ? area(inter) : 0.0;
    const double u = a.w * a.l + b.w * b.l - ia;
    if (u <= 0) return 0.0;
    return std::clamp(ia / u, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Detector

void DetectorConfig::validate() const {
    auto prob = [](double p, const char* n) {
        if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string("detector: ") + n + " must be in [0, 1]");
    };
    prob(p_miss_base, "p_miss_base");
    if (!(p_miss_dist_coeff >= 0 && sigma_range_abs >= 0 && sigma_range_rel >= 0 && sigma_bearing >= 0 &&
          sigma_yaw >= 0 && score_sigma >= 0 && false_positives_per_frame >= 0)) {
        throw ConfigError("detector: noise parameters must be non-negative");
    }
    if (!(footprint_m > 0)) throw ConfigError("detector: footprint must be positive");
    if (!(ghost_max_range_m >= ghost_min_range_m && ghost_min_range_m > 0)) {
        throw ConfigError("detector: ghost range must satisfy 0 < min <= max");
    }
}

DetectorConfig DetectorConfig::noise_free() {
    DetectorConfig c;
    c.p_miss_base = 0;
    c.p_miss_dist_coeff = 0;
    c.sigma_range_abs = 0;
    c.sigma_range_rel = 0;
    c.sigma_bearing = 0;
    c.sigma_yaw = 0;
    c.false_positives_per_frame = 0;
    c.score_sigma = 0;
    c.score_decay_per_m = 0;
    c.score_base = 1.0;
    return c;
}

double miss_probability(const DetectorConfig& cfg, double distance) noexcept {
    const double p = cfg.p_miss_base + cfg.p_miss_dist_coeff * std::max(0.0, distance - cfg.miss_free_range_m);
    return std::clamp(p, 0.0, 1.0);
}

namespace {

double gaussian(std::mt19937_64& g, double sigma) {
    if (sigma <= 0) return 0.0;
    return std::normal_distribution<double>(0.0, sigma)(g);
}

Detection make_detection(const Pose2& ego, Vec2 pos, double yaw, double score, const DetectorConfig& cfg,
                         const CameraModel& camera, const BodyModel& body) {
    Detection d;
    d.position = {pos.x, pos.y, body.height_m / 2.0};
    d.yaw = wrap_angle(yaw);
    d.box = {pos.x, pos.y, cfg.footprint_m, cfg.footprint_m, d.yaw};
    d.score = std::clamp(score, 0.0, 1.0);
    const Vec3 pc = world_to_camera(ego, camera, {pos.x, pos.y, 0.0});
    if (auto r = body_rectangle(camera, body, pc)) d.bbox2d = clip_to_image(*r, camera);
    return d;
}

}  // namespace

Detection measure_agent(const Pose2& ego, const Pose2& agent, const DetectorConfig& cfg,
                        const CameraModel& camera, const BodyModel& body, std::mt19937_64& rng) {
    const Vec2 rel = agent.position() - ego.position();
    const double range = rel.norm();
    const double dr = gaussian(rng, cfg.sigma_range_abs + cfg.sigma_range_rel * range);
    const double db = gaussian(rng, cfg.sigma_bearing);
    const double dyaw = gaussian(rng, cfg.sigma_yaw);
    const double dscore = gaussian(rng, cfg.score_sigma);
    Vec2 pos = agent.position();
    if (dr != 0.0 || db != 0.0) {
        const double bearing = std::atan2(rel.y, rel.x) + db;
        const double r = std::max(0.0, range + dr);
        pos = ego.position() + Vec2{r * std::cos(bearing), r * std::sin(bearing)};
    }
    const double score = cfg.score_base - cfg.score_decay_per_m * range + dscore;
    return make_detection(ego, pos, agent.heading + dyaw, score, cfg, camera, body);
}

std::vector<Detection> synth_detect(const EgoFrameAnnotation& ann, const DetectorConfig& cfg,
                                    const CameraModel& camera, const BodyModel& body,
                                    std::mt19937_64& rng) {
    std::vector<Detection> out;
    for (const auto& v : ann.visible) {
        if (v.pixel_count < cfg.min_pixels) continue;
        const double d = distance(v.world_pose.position(), ann.ego_pose.position());
        if (bernoulli(rng, miss_probability(cfg, d))) continue;
        Detection det = measure_agent(ann.ego_pose, v.world_pose, cfg, camera, body, rng);
        det.step = ann.step;
        det.source = v.agent_id;
        out.push_back(det);
    }
    if (cfg.false_positives_per_frame > 0) {
        const int ghosts = std::poisson_distribution<int>(cfg.false_positives_per_frame)(rng);
        const double half_fov = camera.horizontal_fov_rad() / 2.0;
        for (int i = 0; i < ghosts; ++i) {
            const double bearing = ann.ego_pose.heading + std::uniform_real_distribution<double>(-half_fov, half_fov)(rng);
            const double r =
                std::uniform_real_distribution<double>(cfg.ghost_min_range_m, cfg.ghost_max_range_m)(rng);
            const double yaw = std::uniform_real_distribution<double>(-kPi, kPi)(rng);
            const double score = cfg.ghost_score_mean + gaussian(rng, cfg.score_sigma);
            const Vec2 pos = ann.ego_pose.position() + Vec2{r * std::cos(bearing), r * std::sin(bearing)};
            Detection det = make_detection(ann.ego_pose, pos, yaw, score, cfg, camera, body);
            det.step = ann.step;
            out.push_back(det);
        }
    }
    return out;
}

StreamKey detection_stream(std::uint64_t seed, const std::string& fold, const std::string& recording,
                           AgentId ego, Step step) {
    StreamKey k(seed);
    k.add(std::string_view("detector")).add(fold).add(recording).add(ego).add(step);
    return k;
}

// ---------------------------------------------------------------------------
// Kalman filter

namespace {

Eigen::Matrix<double, 4, 6> observation_matrix() {
    Eigen::Matrix<double, 4, 6> H = Eigen::Matrix<double, 4, 6>::Zero();
    for (int i = 0; i < 4; ++i) H(i, i) = 1.0;
    return H;
}

constexpr double kPsdTolerance = 1e-9;

void check_psd(const Mat6& P) {
    if (min_eigenvalue(P) < -kPsdTolerance) throw NumericalError("track covariance lost positive semi-definiteness");
}

}  // namespace

double min_eigenvalue(const Eigen::MatrixXd& m) {
    const Eigen::MatrixXd sym = (m + m.transpose()) / 2.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

TrackState kalman_predict(const TrackState& state, double dt, const Mat6& Q) {
    if (!(dt > 0)) throw ConfigError("kalman_predict: dt must be positive");
    Mat6 F = Mat6::Identity();
    F(0, 4) = dt;
    F(1, 5) = dt;
    TrackState out = state;
    out.mean = F * state.mean;
    out.mean(3) = wrap_angle(out.mean(3));
    out.covariance = F * state.covariance * F.transpose() + Q;
    out.covariance = (out.covariance + out.covariance.transpose()) / 2.0;
    out.age += 1;
    check_psd(out.covariance);
    return out;
}

TrackState kalman_update(const TrackState& state, const Vec4& z, const Mat4& R) {
    if (!R.isApprox(R.transpose(), 1e-12) || min_eigenvalue(R) < -1e-12) {
        throw ConfigError("observation covariance R must be symmetric positive semi-definite");
    }
    const auto H = observation_matrix();
    Vec4 innovation = z - H * state.mean;
    innovation(3) = wrap_angle(innovation(3));
    const Mat4 S = H * state.covariance * H.transpose() + R;
    Mat4 S_inv;
    Eigen::LDLT<Mat4> ldlt(S);
    if (ldlt.info() == Eigen::Success && ldlt.isPositive() && ldlt.vectorD().minCoeff() > 1e-14 * std::max(1.0, S.norm())) {
        S_inv = ldlt.solve(Mat4::Identity());
    } else {
        S_inv = S.completeOrthogonalDecomposition().pseudoInverse();
    }
    const Eigen::Matrix<double, 6, 4> K = state.covariance * H.transpose() * S_inv;
    TrackState out = state;
    out.mean = state.mean + K * innovation;
    out.mean(3) = wrap_angle(out.mean(3));
    const Mat6 I_KH = Mat6::Identity() - K * H;
    out.covariance = I_KH * state.covariance * I_KH.transpose() + K * R * K.transpose();
    out.covariance = (out.covariance + out.covariance.transpose()) / 2.0;
    check_psd(out.covariance);
    return out;
}

TrackState kalman_update(const TrackState& state, const Detection& det, const Mat4& R) {
    return kalman_update(state, Vec4(det.position.x, det.position.y, det.position.z, det.yaw), R);
}

// ---------------------------------------------------------------------------
// Assignment

namespace {

// Minimum-cost assignment of every row (rows <= cols), Jonker-style
// potentials. Returns the column of each row.
std::vector<int> hungarian_min(const Eigen::MatrixXd& cost) {
    const int n = static_cast<int>(cost.rows());
    const int m = static_cast<int>(cost.cols());
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0), v(m + 1, 0);
    std::vector<int> p(m + 1, 0), way(m + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(m + 1, inf);
        std::vector<char> used(m + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= m; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    std::vector<int> row_to_col(n, -1);
    for (int j = 1; j <= m; ++j) {
        if (p[j]) row_to_col[p[j] - 1] = j - 1;
    }
    return row_to_col;
}

}  // namespace

std::vector<int> max_weight_assignment(const Eigen::MatrixXd& weights, AssignmentMethod method) {
    const auto rows = weights.rows();
    const auto cols = weights.cols();
    std::vector<int> result(static_cast<std::size_t>(rows), -1);
    if (rows == 0 || cols == 0) return result;

    if (method == AssignmentMethod::kGreedy) {
        struct Pair {
            double w;
            int r, c;
        };
        std::vector<Pair> pairs;
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c)
                if (weights(r, c) > 0) pairs.push_back({weights(r, c), r, c});
        std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return a.w > b.w; });
        std::vector<char> col_used(static_cast<std::size_t>(cols), 0);
        for (const auto& p : pairs) {
            if (result[p.r] >= 0 || col_used[p.c]) continue;
            result[p.r] = p.c;
            col_used[p.c] = 1;
        }
        return result;
    }

    const Eigen::MatrixXd cost = -weights.cwiseMax(0.0);
    if (rows <= cols) {
        result = hungarian_min(cost);
    } else {
        const auto col_to_row = hungarian_min(cost.transpose());
        for (int c = 0; c < cols; ++c) {
            if (col_to_row[c] >= 0) result[col_to_row[c]] = c;
        }
    }
    for (int r = 0; r < rows; ++r) {
        if (result[r] >= 0 && !(weights(r, result[r]) > 0)) result[r] = -1;
    }
    return result;
}

Association associate(std::span<const BevBox> tracks, std::span<const BevBox> dets, double iou_min,
                      AssignmentMethod method) {
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(tracks.size()),
                                              static_cast<Eigen::Index>(dets.size()));
    for (std::size_t i = 0; i < tracks.size(); ++i) {
        for (std::size_t j = 0; j < dets.size(); ++j) {
            const double iou = bev_iou(tracks[i], dets[j]);
            if (iou >= iou_min && iou > 0) w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = iou;
        }
    }
    const auto match = max_weight_assignment(w, method);
    Association a;
    std::vector<char> det_used(dets.size(), 0);
    for (std::size_t i = 0; i < tracks.size(); ++i) {
        if (match[i] >= 0) {
            a.matches.emplace_back(i, static_cast<std::size_t>(match[i]));
            det_used[static_cast<std::size_t>(match[i])] = 1;
        } else {
            a.unmatched_tracks.push_back(i);
        }
    }
    for (std::size_t j = 0; j < dets.size(); ++j) {
        if (!det_used[j]) a.unmatched_detections.push_back(j);
    }
    return a;
}

// ---------------------------------------------------------------------------
// Tracker

void TrackerConfig::validate() const {
    if (!(dt > 0)) throw ConfigError("tracker: dt must be positive");
    if (min_hits < 1 || max_misses < 1) throw ConfigError("tracker: min_hits and max_misses must be >= 1");
    if (min_eigenvalue(Q) < -1e-12 || !Q.isApprox(Q.transpose())) throw ConfigError("tracker: Q must be symmetric PSD");
    if (min_eigenvalue(R) < -1e-12 || !R.isApprox(R.transpose())) throw ConfigError("tracker: R must be symmetric PSD");
}

double TrackHistory::mean_score() const noexcept {
    if (points.empty()) return 0.0;
    double s = 0;
    for (const auto& p : points) s += p.score;
    return s / static_cast<double>(points.size());
}

MultiObjectTracker::MultiObjectTracker(TrackerConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

BevBox MultiObjectTracker::box_of(const Vec6& s) const noexcept {
    return {s(0), s(1), cfg_.footprint_m, cfg_.footprint_m, s(3)};
}

void MultiObjectTracker::spawn(int t, const Detection& det) {
    TrackState st;
    st.track_id = next_id_++;
    st.mean << det.position.x, det.position.y, det.position.z, det.yaw, 0.0, 0.0;
    st.covariance = Mat6::Zero();
    st.covariance.topLeftCorner<4, 4>() = cfg_.R;
    st.covariance(4, 4) = cfg_.init_vel_var;
    st.covariance(5, 5) = cfg_.init_vel_var;
    st.hits = 1;
    TrackHistory h;
    h.track_id = st.track_id;
    h.confirmed = cfg_.min_hits <= 1;
    h.points.push_back({t, st.mean, det.score});
    history_.push_back(std::move(h));
    live_.push_back(st);
    meta_.push_back({history_.size() - 1, 1});
}

void MultiObjectTracker::step(int t, std::span<const Detection> dets) {
    for (auto& s : live_) s = kalman_predict(s, cfg_.dt, cfg_.Q);

    std::vector<BevBox> tboxes, dboxes;
    for (const auto& s : live_) tboxes.push_back(box_of(s.mean));
    for (const auto& d : dets) dboxes.push_back(d.box);
    Association assoc = associate(tboxes, dboxes, cfg_.iou_min, cfg_.method);

    // Tracks without an observed velocity get a distance-gated second chance.
    std::vector<std::size_t> young;
    for (std::size_t i : assoc.unmatched_tracks) {
        if (live_[i].hits < 2) young.push_back(i);
    }
    if (!young.empty() && !assoc.unmatched_detections.empty()) {
        Eigen::MatrixXd w = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(young.size()),
                                                  static_cast<Eigen::Index>(assoc.unmatched_detections.size()));
        for (std::size_t a = 0; a < young.size(); ++a) {
            const Vec6& m = live_[young[a]].mean;
            for (std::size_t b = 0; b < assoc.unmatched_detections.size(); ++b) {
                const auto& d = dets[assoc.unmatched_detections[b]];
                const double dist = std::hypot(d.position.x - m(0), d.position.y - m(1));
                if (dist < cfg_.birth_gate_m) {
                    w(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = cfg_.birth_gate_m - dist;
                }
            }
        }
        const auto match = max_weight_assignment(w, cfg_.method);
        std::vector<std::size_t> still_tracks, still_dets;
        std::vector<char> used(assoc.unmatched_detections.size(), 0);
        for (std::size_t a = 0; a < young.size(); ++a) {
            if (match[a] >= 0) {
                assoc.matches.emplace_back(young[a], assoc.unmatched_detections[static_cast<std::size_t>(match[a])]);
                used[static_cast<std::size_t>(match[a])] = 1;
            }
        }
        for (std::size_t i : assoc.unmatched_tracks) {
            const bool matched = std::any_of(assoc.matches.begin(), assoc.matches.end(),
                                             [&](auto& m) { return m.first == i; });
            if (!matched) still_tracks.push_back(i);
        }
        for (std::size_t b = 0; b < assoc.unmatched_detections.size(); ++b) {
            if (!used[b]) still_dets.push_back(assoc.unmatched_detections[b]);
        }
        assoc.unmatched_tracks = std::move(still_tracks);
        assoc.unmatched_detections = std::move(still_dets);
    }

    std::vector<char> keep(live_.size(), 1);
    for (auto [i, j] : assoc.matches) {
        auto& s = live_[i];
        auto& meta = meta_[i];
        s = kalman_update(s, dets[j], cfg_.R);
        s.hits += 1;
        s.misses = 0;
        meta.consecutive_hits += 1;
        auto& h = history_[meta.history];
        if (!h.confirmed && meta.consecutive_hits >= cfg_.min_hits) h.confirmed = true;
        h.points.push_back({t, s.mean, dets[j].score});
    }
    for (std::size_t i : assoc.unmatched_tracks) {
        auto& s = live_[i];
        s.misses += 1;
        meta_[i].consecutive_hits = 0;
        const bool confirmed = history_[meta_[i].history].confirmed;
        if (!confirmed || s.misses >= cfg_.max_misses) keep[i] = 0;
    }
    std::vector<TrackState> live;
    std::vector<Live> meta;
    for (std::size_t i = 0; i < live_.size(); ++i) {
        if (!keep[i]) continue;
        live.push_back(live_[i]);
        meta.push_back(meta_[i]);
    }
    live_ = std::move(live);
    meta_ = std::move(meta);
    for (std::size_t j : assoc.unmatched_detections) spawn(t, dets[j]);
}

std::vector<TrackHistory> MultiObjectTracker::confirmed_tracks() const {
    std::vector<TrackHistory> out;
    for (const auto& h : history_) {
        if (h.confirmed) out.push_back(h);
    }
    return out;
}

std::optional<AgentId> assign_identity(const Tracklet& tracklet, const RecordingIndex& index,
                                       Step window_start, std::optional<AgentId> exclude,
                                       double max_mean_dist) {
    std::map<AgentId, std::pair<double, int>> acc;
    for (const auto& o : tracklet.obs) {
        for (const auto& a : index.agents_at(window_start + o.t)) {
            if (exclude && a.id == *exclude) continue;
            auto& [sum, n] = acc[a.id];
            sum += distance(o.p, a.pose.position());
            n += 1;
        }
    }
    std::optional<AgentId> best;
    double best_mean = std::numeric_limits<double>::infinity();
    for (const auto& [id, sn] : acc) {
        const double mean = sn.first / sn.second;
        if (mean < best_mean) {
            best_mean = mean;
            best = id;
        }
    }
    if (!best || best_mean > max_mean_dist) return std::nullopt;
    return best;
}

PerceptionResult track_scene(const Scene& gt, const RecordingIndex& index, const AnnotationIndex& annotations,
                             std::span<const std::vector<Detection>> detections, const TrackerConfig& tracker,
                             long min_pixels) {
    if (gt.variant != Variant::kFpvGt || !gt.ego_id) throw DataError("track_scene expects an FPV-GT scene");
    if (static_cast<int>(detections.size()) != gt.t_obs) {
        throw DataIntegrityError("track_scene: expected one detection frame per observation step");
    }
    const AgentId ego = *gt.ego_id;

    MultiObjectTracker mot(tracker);
    for (int t = 0; t < gt.t_obs; ++t) mot.step(t, detections[static_cast<std::size_t>(t)]);
    const auto tracks = mot.confirmed_tracks();

    PerceptionResult res;
    res.detections.assign(detections.begin(), detections.end());
    res.scene = gt;
    res.scene.variant = Variant::kFpvDet;
    res.scene.removed.clear();
    res.scene.tracklets.clear();
    for (const auto& tr : gt.tracklets) {
        if (tr.id == ego) res.scene.tracklets.push_back(tr);
    }
    for (const auto& h : tracks) {
        Tracklet tl;
        tl.id = -static_cast<AgentId>(h.track_id);
        for (const auto& p : h.points) tl.obs.push_back({p.t, {p.state(0), p.state(1)}});
        tl.score = h.mean_score();
        tl.gt_id = assign_identity(tl, index, gt.window_start, ego, tracker.identity_max_mean_dist_m);
        res.scene.tracklets.push_back(std::move(tl));
    }
    res.scene.ego_only = res.scene.tracklets.size() <= 1;

    res.tracking.resize(static_cast<std::size_t>(gt.t_obs));
    for (int t = 0; t < gt.t_obs; ++t) {
        auto& frame = res.tracking[static_cast<std::size_t>(t)];
        auto it = annotations.find({ego, gt.window_start + t});
        if (it == annotations.end()) {
            throw DataIntegrityError("missing annotation for ego " + std::to_string(ego) + " at step " +
                                     std::to_string(gt.window_start + t));
        }
        for (const auto& v : it->second.visible) {
            if (v.pixel_count < min_pixels) continue;
            frame.truth.push_back({v.agent_id,
                                   {v.world_pose.x, v.world_pose.y, tracker.footprint_m, tracker.footprint_m,
                                    v.world_pose.heading},
                                   1.0});
        }
        for (const auto& h : tracks) {
            for (const auto& p : h.points) {
                if (p.t != t) continue;
                frame.tracks.push_back({h.track_id,
                                        {p.state(0), p.state(1), tracker.footprint_m, tracker.footprint_m, p.state(3)},
                                        h.mean_score()});
            }
        }
    }
    return res;
}

NoiseCovariances estimate_covariances(std::span<const Recording> training, const DetectorConfig& det,
                                      const CameraModel& camera, const BodyModel& body, double dt,
                                      double max_range_m) {
    NoiseCovariances out;
    for (const auto& rec : training) {
        for (const auto& tr : rec.tracks) {
            const auto& p = tr.positions;
            for (std::size_t t = 1; t + 1 < p.size(); ++t) {
                const Vec2 v0 = (1.0 / dt) * (p[t] - p[t - 1]);
                const Vec2 v1 = (1.0 / dt) * (p[t + 1] - p[t]);
                const Vec2 pred = p[t] + dt * v0;
                Vec6 r;
                r << p[t + 1].x - pred.x, p[t + 1].y - pred.y, 0.0, angle_diff(tr.headings[t + 1], tr.headings[t]),
                    v1.x - v0.x, v1.y - v0.y;
                out.Q += r * r.transpose();
                ++out.process_samples;
            }
        }
    }
    if (out.process_samples < kMinCovarianceSamples) {
        throw EstimationError("too few constant-velocity residuals to estimate Q (" +
                              std::to_string(out.process_samples) + ")");
    }
    out.Q /= static_cast<double>(out.process_samples);

    const double half_fov = camera.horizontal_fov_rad() / 2.0;
    for (const auto& rec : training) {
        RecordingIndex index(rec);
        for (Step s = index.min_step(); s <= index.max_step(); ++s) {
            auto agents = index.agents_at(s);
            auto rng = StreamKey(det.seed).add(std::string_view("covariance")).add(rec.name).add(s).engine();
            for (const auto& ego : agents) {
                for (const auto& other : agents) {
                    if (other.id == ego.id) continue;
                    const Vec2 rel = other.pose.position() - ego.pose.position();
                    const double range = rel.norm();
                    if (range > max_range_m || range < 1e-6) continue;
                    if (std::abs(angle_diff(std::atan2(rel.y, rel.x), ego.pose.heading)) > half_fov) continue;
                    const Detection d = measure_agent(ego.pose, other.pose, det, camera, body, rng);
                    Vec4 e;
                    e << d.position.x - other.pose.x, d.position.y - other.pose.y,
                        d.position.z - body.height_m / 2.0, angle_diff(d.yaw, other.pose.heading);
                    out.R += e * e.transpose();
                    ++out.observation_samples;
                }
            }
        }
    }
    if (out.observation_samples < kMinCovarianceSamples) {
        throw EstimationError("too few detector samples to estimate R (" +
                              std::to_string(out.observation_samples) + ")");
    }
    out.R /= static_cast<double>(out.observation_samples);
    return out;
}

}  // namespace fpvbench

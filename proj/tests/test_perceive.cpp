#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include "doctest.h"
#include "fpvbench/perceive.hpp"
#include "support.hpp"

using namespace fpvbench;

namespace {

// Axis-aligned 0.5 m boxes offset along x have IoU (0.5 - d) / (0.5 + d).
double offset_for_iou(double iou) { return 0.5 * (1 - iou) / (1 + iou); }

double exhaustive_best(const Eigen::MatrixXd& w) {
    const int n = static_cast<int>(w.rows());
    const int m = static_cast<int>(w.cols());
    std::vector<int> cols(static_cast<std::size_t>(std::max(n, m)));
    std::iota(cols.begin(), cols.end(), 0);
    double best = 0;
    do {
        double total = 0;
        for (int r = 0; r < n; ++r) {
            const int c = cols[static_cast<std::size_t>(r)];
            if (c < m && w(r, c) > 0) total += w(r, c);
        }
        best = std::max(best, total);
    } while (std::next_permutation(cols.begin(), cols.end()));
    return best;
}

Detection exact_detection(Step step, Vec2 p, double yaw = 0) {
    Detection d;
    d.step = step;
    d.position = {p.x, p.y, 0.85};
    d.yaw = yaw;
    d.box = {p.x, p.y, 0.5, 0.5, yaw};
    return d;
}

TrackerConfig exact_tracker() {
    TrackerConfig c;
    c.R = Mat4::Zero();
    return c;
}

}  // namespace

TEST_SUITE("perceive") {

TEST_CASE("bev iou") {
    const BevBox a{0, 0, 0.5, 0.5, 0};
    CHECK(bev_iou(a, a) == doctest::Approx(1.0));
    CHECK(bev_iou(a, {0.25, 0, 0.5, 0.5, 0}) == doctest::Approx(1.0 / 3));
    CHECK(bev_iou(a, {3, 0, 0.5, 0.5, 0}) == 0.0);
    // Rotation by a quarter turn maps a square onto itself.
    CHECK(bev_iou(a, {0, 0, 0.5, 0.5, kPi / 2}) == doctest::Approx(1.0));
    const BevBox tilted{0.1, 0.05, 0.5, 0.8, 0.7};
    CHECK(bev_iou(a, tilted) == doctest::Approx(bev_iou(tilted, a)));
}

TEST_CASE("kalman predict") {
    TrackState s;
    s.mean << 0, 0, 0, 0, 1, 0;
    auto p = kalman_predict(s, 0.4, Mat6::Zero());
    CHECK(p.mean(0) == doctest::Approx(0.4));
    CHECK(p.mean(1) == 0.0);
    CHECK(p.mean(4) == 1.0);
    CHECK(p.covariance.isZero());
    s.covariance = Mat6::Identity();
    p = kalman_predict(s, 0.4, Mat6::Identity() * 0.01);
    CHECK(p.covariance.trace() > s.covariance.trace());
    CHECK_THROWS_AS(kalman_predict(s, 0.0, Mat6::Zero()), ConfigError);
}

TEST_CASE("kalman update limits") {
    TrackState s;
    s.mean << 0, 0, 0, 0, 0, 0;
    s.covariance = Mat6::Identity();
    const Vec4 z(1, 0, 0, 0);
    // Equal-weight scalar fusion.
    auto u = kalman_update(s, z, Mat4::Identity());
    CHECK(std::abs(u.mean(0) - 0.5) < 1e-6);
    CHECK(std::abs(u.covariance(0, 0) - 0.5) < 1e-6);

    const Vec4 z2(1.5, -2, 0.3, 0.2);
    u = kalman_update(s, z2, Mat4::Zero());
    for (int i = 0; i < 4; ++i) CHECK(std::abs(u.mean(i) - z2(i)) < 1e-6);
    u = kalman_update(s, z2, Mat4::Identity() * 1e9);
    for (int i = 0; i < 6; ++i) CHECK(std::abs(u.mean(i) - s.mean(i)) < 1e-6);

    Mat4 bad = Mat4::Identity();
    bad(0, 0) = -1;
    CHECK_THROWS_AS(kalman_update(s, z, bad), ConfigError);
}

TEST_CASE("covariance stays positive semi-definite") {
    std::mt19937_64 g(13);
    std::normal_distribution<double> n(0, 1);
    TrackState s;
    s.covariance = Mat6::Identity();
    s.covariance(4, 4) = s.covariance(5, 5) = 2.0;
    for (int i = 0; i < 500; ++i) {
        s = kalman_predict(s, 0.4, Mat6::Identity() * 1e-3);
        s = kalman_update(s, Vec4(n(g), n(g), n(g), n(g)), Mat4::Identity() * 1e-4);
        CHECK(min_eigenvalue(s.covariance) > -1e-9);
        CHECK(s.mean(3) > -kPi);
        CHECK(s.mean(3) <= kPi);
    }
}

TEST_CASE("association examples") {
    const BevBox t{0, 0, 0.5, 0.5, 0};
    const std::vector<BevBox> tracks{t};
    const std::vector<BevBox> near{{offset_for_iou(0.8), 0, 0.5, 0.5, 0}};
    CHECK(bev_iou(t, near[0]) == doctest::Approx(0.8));
    auto a = associate(tracks, near, 0.5);
    REQUIRE(a.matches.size() == 1);
    CHECK(a.matches[0] == std::pair<std::size_t, std::size_t>{0, 0});

    const std::vector<BevBox> far{{offset_for_iou(0.3), 0, 0.5, 0.5, 0}};
    a = associate(tracks, far, 0.5);
    CHECK(a.matches.empty());
    CHECK(a.unmatched_tracks.size() == 1);
    CHECK(a.unmatched_detections.size() == 1);

    a = associate(tracks, near, 1.0 + 1e-9);
    CHECK(a.matches.empty());

    Eigen::MatrixXd w(2, 2);
    w << 0.9, 0.6, 0.6, 0.9;
    CHECK(max_weight_assignment(w, AssignmentMethod::kOptimal) == std::vector<int>{0, 1});
    w << 0.6, 0.9, 0.9, 0.6;
    CHECK(max_weight_assignment(w, AssignmentMethod::kOptimal) == std::vector<int>{1, 0});
}

TEST_CASE("optimal assignment matches exhaustive search") {
    std::mt19937_64 g(17);
    for (int trial = 0; trial < 300; ++trial) {
        const int n = 1 + static_cast<int>(uniform01(g) * 5);
        const int m = 1 + static_cast<int>(uniform01(g) * 5);
        Eigen::MatrixXd w(n, m);
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < m; ++c) w(r, c) = uniform01(g) < 0.3 ? 0.0 : std::round(uniform01(g) * 10) / 10;
        const auto match = max_weight_assignment(w, AssignmentMethod::kOptimal);
        double total = 0;
        std::set<int> used;
        for (int r = 0; r < n; ++r) {
            const int c = match[static_cast<std::size_t>(r)];
            if (c < 0) continue;
            CHECK(used.insert(c).second);
            CHECK(w(r, c) > 0);
            total += w(r, c);
        }
        CHECK(total == doctest::Approx(exhaustive_best(w)));
    }
}

TEST_CASE("detector limits") {
    CameraModel cam;
    BodyModel body;
    EgoFrameAnnotation ann = rasterize_visibility({1, {0, 0, 0}},
                                                  std::vector<AgentPose>{{2, {5, 0.5, 0.2}}, {3, {8, -1, 0}}}, cam,
                                                  body, {});
    ann.step = 4;
    REQUIRE(ann.visible.size() == 2);
    std::mt19937_64 g(1);
    const auto dets = synth_detect(ann, DetectorConfig::noise_free(), cam, body, g);
    REQUIRE(dets.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(dets[i].position.x == ann.visible[i].world_pose.x);
        CHECK(dets[i].position.y == ann.visible[i].world_pose.y);
        CHECK(dets[i].yaw == doctest::Approx(ann.visible[i].world_pose.heading));
        CHECK(dets[i].step == 4);
        CHECK(dets[i].source == ann.visible[i].agent_id);
    }
    DetectorConfig blind = DetectorConfig::noise_free();
    blind.p_miss_base = 1.0;
    CHECK(synth_detect(ann, blind, cam, body, g).empty());
    CHECK(miss_probability(DetectorConfig{}, 15.0) == doctest::Approx(0.15));
}

TEST_CASE("realized miss rate follows the configuration") {
    CameraModel cam;
    BodyModel body;
    DetectorConfig cfg = DetectorConfig::noise_free();
    cfg.p_miss_base = 0.2;
    const auto ann = rasterize_visibility({1, {0, 0, 0}}, std::vector<AgentPose>{{2, {4, 0, 0}}}, cam, body, {});
    std::mt19937_64 g(9);
    const int n = 20000;
    int missed = 0;
    for (int i = 0; i < n; ++i) missed += synth_detect(ann, cfg, cam, body, g).empty() ? 1 : 0;
    CHECK(std::abs(missed / double(n) - 0.2) <= 3 * std::sqrt(0.2 * 0.8 / n));
}

TEST_CASE("zero-noise tracking reproduces the input") {
    // Three agents walking in parallel; detections are exact.
    MultiObjectTracker mot(exact_tracker());
    for (int t = 0; t < 8; ++t) {
        std::vector<Detection> dets;
        for (int a = 0; a < 3; ++a) dets.push_back(exact_detection(t, {0.5 * t, 1.5 * a}));
        mot.step(t, dets);
    }
    const auto tracks = mot.confirmed_tracks();
    REQUIRE(tracks.size() == 3);
    std::set<int> ids;
    for (const auto& h : tracks) {
        ids.insert(h.track_id);
        CHECK(h.points.size() == 8);
        const double y = h.points.front().state(1);
        for (const auto& p : h.points) {
            CHECK(std::abs(p.state(0) - 0.5 * p.t) < 1e-6);
            CHECK(std::abs(p.state(1) - y) < 1e-6);
        }
    }
    CHECK(ids.size() == 3);
}

TEST_CASE("no detections give no tracks") {
    MultiObjectTracker mot(exact_tracker());
    for (int t = 0; t < 8; ++t) mot.step(t, {});
    CHECK(mot.confirmed_tracks().empty());
}

TEST_CASE("a long gap splits a track into two with one identity") {
    testing::Formation f;
    f.offsets = {{0, 0}, {4, 0.4}};
    f.steps = 20;
    Recording rec = build_recording(testing::formation_records(f), "r");
    for (auto& t : rec.tracks) t = derive_headings(std::move(t));
    RecordingIndex idx(rec);

    MultiObjectTracker mot(exact_tracker());
    for (int t = 0; t < 8; ++t) {
        std::vector<Detection> dets;
        if (t < 3 || t > 5) dets.push_back(exact_detection(t, idx.pose_of(2, t)->position()));
        mot.step(t, dets);
    }
    const auto tracks = mot.confirmed_tracks();
    REQUIRE(tracks.size() == 2);
    for (const auto& h : tracks) {
        Tracklet tl;
        tl.id = -h.track_id;
        for (const auto& p : h.points) tl.obs.push_back({p.t, {p.state(0), p.state(1)}});
        CHECK(assign_identity(tl, idx, 0, AgentId{1}, 1.0) == AgentId{2});
    }
    CHECK(tracks[0].points.back().t == 2);
    CHECK(tracks[1].points.front().t == 6);
}

TEST_CASE("track ids are unique and yaw stays wrapped") {
    std::mt19937_64 g(21);
    TrackerConfig cfg;
    MultiObjectTracker mot(cfg);
    for (int t = 0; t < 40; ++t) {
        std::vector<Detection> dets;
        const int n = static_cast<int>(uniform01(g) * 6);
        for (int i = 0; i < n; ++i)
            dets.push_back(exact_detection(t, {uniform01(g) * 6, uniform01(g) * 6}, (uniform01(g) - 0.5) * 2 * kPi));
        mot.step(t, dets);
        std::set<int> live;
        for (const auto& s : mot.live_tracks()) {
            CHECK(live.insert(s.track_id).second);
            CHECK(s.mean(3) > -kPi);
            CHECK(s.mean(3) <= kPi);
        }
    }
}

TEST_CASE("covariance estimation") {
    CameraModel cam;
    BodyModel body;
    testing::Formation f;
    f.offsets = {{0, 0}, {3, 0}};
    f.steps = 10001;
    Recording rec = build_recording(testing::formation_records(f), "line");
    for (auto& t : rec.tracks) t = derive_headings(std::move(t));
    const std::vector<Recording> train{rec};

    DetectorConfig det = DetectorConfig::noise_free();
    det.sigma_range_abs = 0.1;
    det.seed = 5;
    const auto est = estimate_covariances(train, det, cam, body, 0.4);
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) CHECK(std::abs(est.Q(i, j)) < 1e-9);
    CHECK(est.observation_samples >= 10000);
    CHECK(est.R(0, 0) == doctest::Approx(0.01).epsilon(0.05));
    CHECK(std::abs(est.R(1, 1)) < 1e-12);
    const auto again = estimate_covariances(train, det, cam, body, 0.4);
    CHECK(again.Q == est.Q);
    CHECK(again.R == est.R);

    f.steps = 20;
    Recording small = build_recording(testing::formation_records(f), "short");
    for (auto& t : small.tracks) t = derive_headings(std::move(t));
    CHECK_THROWS_AS(estimate_covariances(std::vector<Recording>{small}, det, cam, body, 0.4), EstimationError);
}

TEST_CASE("configuration checks") {
    DetectorConfig d;
    d.p_miss_base = 2;
    CHECK_THROWS_AS(d.validate(), ConfigError);
    TrackerConfig t;
    t.min_hits = 0;
    CHECK_THROWS_AS(MultiObjectTracker{t}, ConfigError);
}

}

#include <algorithm>
#include <random>

#include "doctest.h"
#include "fpvbench/predict.hpp"

using namespace fpvbench;

namespace {

Tracklet line_tracklet(int n, Vec2 start, Vec2 step) {
    Tracklet t;
    t.id = 4;
    for (int i = 0; i < n; ++i) t.obs.push_back({8 - n + i, start + static_cast<double>(i) * step});
    return t;
}

Eigen::MatrixXd random_states(std::mt19937_64& g, int n, int d) {
    Eigen::MatrixXd s(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) s(i, j) = uniform01(g) * 4 - 2;
    return s;
}

std::vector<Vec2> random_positions(std::mt19937_64& g, int n) {
    std::vector<Vec2> p;
    for (int i = 0; i < n; ++i) p.push_back({uniform01(g) * 10, uniform01(g) * 10});
    return p;
}

}  // namespace

TEST_SUITE("predict") {

TEST_CASE("constant velocity continues the last motion") {
    PredictorConfig cfg;
    const auto p = predict_cv(line_tracklet(8, {0, 0}, {1, 0}), 8, 12, cfg, StreamKey(0));
    REQUIRE(p.samples.size() == 20);
    REQUIRE(p.samples[0].size() == 12);
    for (int i = 0; i < 12; ++i) {
        CHECK(p.samples[0][static_cast<std::size_t>(i)].x == doctest::Approx(8.0 + i));
        CHECK(p.samples[0][static_cast<std::size_t>(i)].y == doctest::Approx(0.0));
    }
    CHECK(p.agent_id == 4);
}

TEST_CASE("a single observation stands still") {
    PredictorConfig cfg;
    const auto p = predict_cv(line_tracklet(1, {3, -2}, {1, 0}), 8, 12, cfg, StreamKey(0));
    for (const auto& q : p.samples[0]) CHECK(q == Vec2{3, -2});
}

TEST_CASE("sampling is deterministic and independent of K") {
    PredictorConfig cfg;
    cfg.k = 1;
    const auto tr = line_tracklet(5, {0, 0}, {0.4, 0.2});
    CHECK(predict_cv(tr, 8, 12, cfg, StreamKey(9)) == predict_cv(tr, 8, 12, cfg, StreamKey(9)));
    PredictorConfig many;
    many.k = 5;
    PredictorConfig more;
    more.k = 9;
    const auto a = predict_cv(tr, 8, 12, many, StreamKey(9));
    const auto b = predict_cv(tr, 8, 12, more, StreamKey(9));
    for (std::size_t i = 0; i < a.samples.size(); ++i) CHECK(a.samples[i] == b.samples[i]);
}

TEST_CASE("constant velocity is translation equivariant") {
    std::mt19937_64 g(2);
    PredictorConfig cfg;
    for (int trial = 0; trial < 200; ++trial) {
        Tracklet t;
        t.id = 1;
        const int n = 1 + static_cast<int>(uniform01(g) * 8);
        for (int i = 0; i < n; ++i) t.obs.push_back({i, {uniform01(g) * 5, uniform01(g) * 5}});
        const Vec2 shift{uniform01(g) * 100 - 50, uniform01(g) * 100 - 50};
        Tracklet moved = t;
        for (auto& o : moved.obs) o.p = o.p + shift;
        const StreamKey key(static_cast<std::uint64_t>(trial));
        const auto a = predict_cv(t, 8, 12, cfg, key);
        const auto b = predict_cv(moved, 8, 12, cfg, key);
        for (std::size_t k = 0; k < a.samples.size(); ++k)
            for (std::size_t i = 0; i < 12; ++i) CHECK(distance(a.samples[k][i] + shift, b.samples[k][i]) < 1e-9);
    }
}

TEST_CASE("oracle replays the truth") {
    Scene s;
    s.tracklets = {line_tracklet(8, {0, 0}, {1, 0})};
    s.tracklets[0].gt_id = 4;
    s.truth = {{4, {}}};
    for (int t = 8; t < 20; ++t) s.truth[0].future.push_back({t, {static_cast<double>(t), 1.0}});
    const auto p = predict_oracle(s.tracklets[0], s, PredictorConfig{}, StreamKey(0));
    const Trajectory expected = [&] {
        Trajectory e;
        for (const auto& f : s.truth[0].future) e.push_back(f.p);
        return e;
    }();
    CHECK(p.samples[0] == expected);
    // Without an identity it falls back to constant velocity.
    s.tracklets[0].gt_id.reset();
    CHECK(predict_oracle(s.tracklets[0], s, PredictorConfig{}, StreamKey(0)).samples[0][0] == Vec2{8, 0});
}

TEST_CASE("layer norm") {
    Eigen::VectorXd v(3);
    v << 1, 2, 3;
    const auto out = layer_norm(v, {}, {}, 1e-12);
    CHECK(out(0) == doctest::Approx(-1.2247).epsilon(1e-4));
    CHECK(std::abs(out(1)) < 1e-9);
    CHECK(out(2) == doctest::Approx(1.2247).epsilon(1e-4));
    CHECK(layer_norm(Eigen::VectorXd::Constant(4, 2.5)).isZero());
    CHECK_THROWS_AS(layer_norm(Eigen::VectorXd::Ones(1)), ConfigError);
}

TEST_CASE("layer norm normalization contract and scale invariance") {
    std::mt19937_64 g(4);
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = 2 + static_cast<int>(uniform01(g) * 30);
        Eigen::VectorXd v(n), gain(n), bias(n);
        for (int i = 0; i < n; ++i) {
            v(i) = uniform01(g) * 10 - 5;
            gain(i) = 1.0;
            bias(i) = uniform01(g);
        }
        const double c = 0.01 + uniform01(g) * 100;
        const auto a = layer_norm(v, {}, {}, 1e-12);
        CHECK((layer_norm(Eigen::VectorXd(c * v), {}, {}, 1e-12) - a).cwiseAbs().maxCoeff() < 1e-6);
        const auto b = layer_norm(v, gain, bias, 1e-12);
        CHECK(b.mean() == doctest::Approx(bias.mean()));
        const double var = (b - bias).squaredNorm() / n;
        CHECK(var == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("social pooling examples") {
    StateMatrix one{Eigen::MatrixXd::Ones(1, 3), {{0, 0}}};
    CHECK(social_pool(one).states == one.states);

    Eigen::MatrixXd s(2, 2);
    s << 1, 2, 3, 4;
    const StateMatrix two{s, {{0, 0}, {3, 1}}};
    const auto out = social_pool(two);
    CHECK(out.states.row(0).isApprox(s.row(0) + s.row(1)));
    CHECK(out.states.row(1).isApprox(s.row(1) + s.row(0)));
}

TEST_CASE("social pooling properties") {
    std::mt19937_64 g(6);
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = 1 + static_cast<int>(uniform01(g) * 7);
        const StateMatrix in{random_states(g, n, 3), random_positions(g, n)};
        const auto w = social_weights(in.positions);
        for (int i = 0; i < n; ++i) {
            const double sum = w.row(i).sum();
            CHECK((sum == 0.0 || std::abs(sum - 1.0) < 1e-12));
            CHECK(w(i, i) == 0.0);
        }
        const auto out = social_pool(in);
        // Pooled part lies in the per-coordinate hull of the neighbors.
        for (int i = 0; i < n && n > 1; ++i) {
            for (int d = 0; d < 3; ++d) {
                double lo = 1e300, hi = -1e300;
                for (int j = 0; j < n; ++j) {
                    if (j == i) continue;
                    lo = std::min(lo, in.states(j, d));
                    hi = std::max(hi, in.states(j, d));
                }
                const double pooled = out.states(i, d) - in.states(i, d);
                CHECK(pooled >= lo - 1e-9);
                CHECK(pooled <= hi + 1e-9);
            }
        }
        // Translation leaves weights unchanged.
        const Vec2 shift{uniform01(g) * 50, -uniform01(g) * 50};
        auto moved = in.positions;
        for (auto& p : moved) p = p + shift;
        CHECK((social_weights(moved) - w).cwiseAbs().maxCoeff() < 1e-9);
        // Permutation equivariance.
        std::vector<int> perm(static_cast<std::size_t>(n));
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), g);
        StateMatrix p_in{Eigen::MatrixXd(n, 3), std::vector<Vec2>(static_cast<std::size_t>(n))};
        for (int i = 0; i < n; ++i) {
            p_in.states.row(i) = in.states.row(perm[static_cast<std::size_t>(i)]);
            p_in.positions[static_cast<std::size_t>(i)] = in.positions[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
        }
        const auto p_out = social_pool(p_in);
        for (int i = 0; i < n; ++i)
            CHECK((p_out.states.row(i) - out.states.row(perm[static_cast<std::size_t>(i)])).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("min over k") {
    const std::vector<Vec2> gt{{0, 0}, {1, 0}};
    PredictionSet p;
    p.samples = {{{0, 0.5}, {1, 0.5}}, {{0, 0.2}, {1, 0.2}}, {{0, 0}, {1, 0}}};
    auto m = min_over_k(p, gt);
    CHECK(m.index == 2);
    CHECK(m.ade == 0.0);
    CHECK(m.fde == 0.0);
    p.samples.pop_back();
    m = min_over_k(p, gt);
    CHECK(m.index == 1);
    CHECK(m.ade == doctest::Approx(0.2));
    p.samples = {{{0, 0}, {1, 1}}};
    m = min_over_k(p, gt);
    CHECK(m.ade == doctest::Approx(0.5));
    CHECK(m.fde == doctest::Approx(1.0));
    CHECK_THROWS_AS(min_over_k(PredictionSet{}, gt), DataError);
}

}

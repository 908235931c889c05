#include "doctest.h"
#include "fpvbench/scenegen.hpp"
#include "support.hpp"

using namespace fpvbench;

namespace {

AgentTrack straight(AgentId id, Step start, int len, Vec2 p0, Vec2 v = {0.5, 0}) {
    AgentTrack t;
    t.agent_id = id;
    t.handle = static_cast<int>(id);
    t.start_step = start;
    for (int i = 0; i < len; ++i) {
        t.positions.push_back(p0 + static_cast<double>(i) * v);
        t.headings.push_back(std::atan2(v.y, v.x));
    }
    return t;
}

Recording recording_of(std::vector<AgentTrack> tracks) {
    Recording r;
    r.name = "rec";
    r.tracks = std::move(tracks);
    return r;
}

}  // namespace

TEST_SUITE("scenegen") {

TEST_CASE("window enumeration") {
    Recording r = recording_of({straight(1, 0, 20, {0, 0})});
    CHECK(enumerate_windows(RecordingIndex(r), 20) == std::vector<Step>{0});
    r = recording_of({straight(1, 0, 21, {0, 0})});
    CHECK(enumerate_windows(RecordingIndex(r), 20) == std::vector<Step>{0, 1});
    CHECK(enumerate_windows(RecordingIndex(recording_of({})), 20).empty());
    Fold empty;
    CHECK(enumerate_windows(empty, 20).empty());
}

TEST_CASE("BEV scenes keep only full-length agents") {
    Recording r = recording_of({straight(1, 0, 20, {0, 0}), straight(2, 0, 20, {0, 1}), straight(3, 0, 20, {0, 2}),
                                straight(4, 3, 17, {0, 3}), straight(5, 0, 12, {0, 4})});
    RecordingIndex idx(r);
    auto sc = build_bev_scene("F", idx, 0);
    REQUIRE(sc);
    CHECK(sc->tracklets.size() == 3);
    CHECK(sc->truth.size() == 3);
    CHECK(sc->tracklets[0].obs.size() == 8);
    CHECK(sc->truth[0].future.size() == 12);
    CHECK_FALSE(sc->ego_id);

    r = recording_of({straight(1, 0, 20, {0, 0}), straight(2, 0, 19, {0, 1})});
    CHECK_FALSE(build_bev_scene("F", RecordingIndex(r), 0));
}

TEST_CASE("an interior gap disqualifies an agent") {
    Recording r = recording_of({straight(1, 0, 20, {0, 0}), straight(2, 0, 20, {0, 1}), straight(3, 0, 9, {0, 2}),
                                straight(3, 10, 10, {5, 2})});
    auto sc = build_bev_scene("F", RecordingIndex(r), 0);
    REQUIRE(sc);
    CHECK(sc->tracklets.size() == 2);
}

TEST_CASE("FPV-GT visibility thresholds") {
    // Ego 1 walks +x; agent 2 ahead is always visible; agent 3 ahead only
    // for two steps; agent 4 stays behind the ego.
    std::vector<AgentTrack> tracks{straight(1, 0, 20, {0, 0}), straight(2, 0, 20, {4, 0.5}),
                                   straight(4, 0, 20, {-6, 0})};
    AgentTrack t3 = straight(3, 0, 20, {6, -1});
    for (int i = 2; i < 20; ++i) t3.positions[static_cast<std::size_t>(i)] = {-30, -30};
    tracks.push_back(t3);
    Recording r = recording_of(tracks);
    RecordingIndex idx(r);
    auto bev = build_bev_scene("F", idx, 0);
    REQUIRE(bev);
    REQUIRE(bev->tracklets.size() == 4);
    RenderSettings render;
    const auto keys = required_annotations(std::span<const Scene>(&*bev, 1));
    CHECK(keys.size() == 4 * 8);
    const auto ann = render_annotations(idx, keys, render);
    const auto scenes = build_fpv_gt_scenes(*bev, idx, ann, VisibilityParams{});
    REQUIRE(scenes.size() == 4);
    const Scene& s1 = scenes[0];
    CHECK(s1.ego_id == AgentId{1});
    CHECK(s1.variant == Variant::kFpvGt);
    REQUIRE(s1.tracklets.size() == 2);
    CHECK(s1.tracklets[0].id == 1);
    CHECK(s1.tracklets[0].obs.size() == 8);
    CHECK(s1.tracklets[1].id == 2);
    // Observations and futures are the raw positions.
    for (const auto& o : s1.tracklets[1].obs) CHECK(o.p == idx.pose_of(2, o.t)->position());
    const TruthFuture* f2 = s1.truth_of(2);
    REQUIRE(f2);
    CHECK(f2->future.size() == 12);
    for (const auto& p : f2->future) CHECK(p.p == idx.pose_of(2, p.t)->position());

    // Cumulative reading with k = 2 admits agent 3.
    VisibilityParams loose;
    loose.min_steps = 2;
    loose.contiguous = false;
    const auto s_loose = build_fpv_gt_scenes(*bev, idx, ann, loose);
    CHECK(s_loose[0].tracklets.size() == 3);

    // Pixel threshold just above the observed count excludes the agent.
    const long px = ann.at({1, 0}).pixels_of(2);
    VisibilityParams strict;
    strict.min_pixels = px + 1000000;
    CHECK(build_fpv_gt_scenes(*bev, idx, ann, strict)[0].tracklets.size() == 1);
    CHECK(build_fpv_gt_scenes(*bev, idx, ann, strict)[0].ego_only);
}

TEST_CASE("missing annotations are a data-integrity error") {
    Recording r = recording_of({straight(1, 0, 20, {0, 0}), straight(2, 0, 20, {3, 0})});
    RecordingIndex idx(r);
    auto bev = build_bev_scene("F", idx, 0);
    REQUIRE(bev);
    AnnotationIndex none;
    CHECK_THROWS_AS(build_fpv_gt_scenes(*bev, idx, none, VisibilityParams{}), DataIntegrityError);
}

TEST_CASE("FPV amplification and invariants on a formation") {
    testing::Formation f;
    Recording rec = build_recording(testing::formation_records(f), "formation");
    for (auto& t : rec.tracks) t = derive_headings(std::move(t));
    RecordingIndex idx(rec);
    std::vector<Scene> bev;
    for (Step s : enumerate_windows(idx, 20))
        if (auto sc = build_bev_scene("F", idx, s)) bev.push_back(std::move(*sc));
    CHECK(bev.size() == 21);
    const auto ann = render_annotations(idx, required_annotations(bev), RenderSettings{}, 2);
    std::vector<Scene> fpv;
    for (const auto& b : bev) {
        auto s = build_fpv_gt_scenes(b, idx, ann, VisibilityParams{});
        fpv.insert(fpv.end(), s.begin(), s.end());
    }
    CHECK(count_scenes(fpv).tracklets >= count_scenes(bev).tracklets);
    for (const auto& s : fpv) {
        for (const auto& t : s.tracklets) CHECK_FALSE(t.obs.empty());
        CHECK(s.tracklets.front().id == *s.ego_id);
    }
}

TEST_CASE("statistics csv") {
    FoldStatistics st;
    st.fold = "ETH";
    st.by_variant[Variant::kBev] = {70, 181};
    st.by_variant[Variant::kFpvGt] = {181, 900};
    const std::vector<FoldStatistics> rows{st};
    CHECK(statistics_csv(rows) == "fold,scenes,bev,fpv_gt,fpv_noisy,fpv_det\nETH,70,181,900,,\n");
    CHECK(count_scenes({}) == VariantCounts{});
}

}

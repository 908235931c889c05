#include "fpvbench/io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace fpvbench {

namespace {

json opt_id(const std::optional<AgentId>& id) { return id ? json(*id) : json(nullptr); }

std::optional<AgentId> get_opt_id(const json& j) {
    if (j.is_null()) return std::nullopt;
    return j.get<AgentId>();
}

json timed(const std::vector<TimedPos>& v) {
    json a = json::array();
    for (const auto& p : v) a.push_back({p.t, p.p.x, p.p.y});
    return a;
}

std::vector<TimedPos> get_timed(const json& j) {
    std::vector<TimedPos> out;
    out.reserve(j.size());
    for (const auto& e : j) out.push_back({e.at(0).get<int>(), {e.at(1).get<double>(), e.at(2).get<double>()}});
    return out;
}

json rect_json(const PixelRect& r) { return {r.u_min, r.v_min, r.u_max, r.v_max}; }

PixelRect get_rect(const json& j) {
    return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(), j.at(3).get<double>()};
}

json box_json(const BevBox& b) { return {b.cx, b.cy, b.w, b.l, b.yaw}; }

BevBox get_box(const json& j) {
    return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(), j.at(3).get<double>(),
            j.at(4).get<double>()};
}

double round_to(double v, double q) { return std::round(v / q) * q; }

json key_json(const SceneKey& k) {
    return {{"fold", k.fold}, {"recording", k.recording}, {"window_start", k.window_start}, {"ego_id", opt_id(k.ego_id)}};
}

SceneKey get_key(const json& j) {
    return {j.at("fold").get<std::string>(), j.at("recording").get<std::string>(), j.at("window_start").get<Step>(),
            get_opt_id(j.at("ego_id"))};
}

std::string_view reason_name(RemovalReason r) {
    return r == RemovalReason::kTrackletDrop ? "tracklet_drop" : "no_observations";
}

}  // namespace

json to_json(const Scene& s) {
    json j = key_json(s.key());
    j["t_obs"] = s.t_obs;
    j["t_pred"] = s.t_pred;
    j["variant"] = std::string(to_string(s.variant));
    j["ego_only"] = s.ego_only;
    json tr = json::array();
    for (const auto& t : s.tracklets) {
        tr.push_back({{"id", t.id}, {"gt_id", opt_id(t.gt_id)}, {"score", t.score}, {"obs", timed(t.obs)}});
    }
    j["tracklets"] = std::move(tr);
    json truth = json::array();
    for (const auto& f : s.truth) truth.push_back({{"id", f.agent_id}, {"future", timed(f.future)}});
    j["truth"] = std::move(truth);
    json removed = json::array();
    for (const auto& r : s.removed) removed.push_back({{"id", r.agent_id}, {"reason", reason_name(r.reason)}});
    j["removed"] = std::move(removed);
    return j;
}

Scene scene_from_json(const json& j) {
    Scene s;
    const SceneKey k = get_key(j);
    s.fold = k.fold;
    s.recording = k.recording;
    s.window_start = k.window_start;
    s.ego_id = k.ego_id;
    s.t_obs = j.at("t_obs").get<int>();
    s.t_pred = j.at("t_pred").get<int>();
    const auto v = parse_variant(j.at("variant").get<std::string>());
    if (!v) throw DataError("unknown variant " + j.at("variant").dump());
    s.variant = *v;
    s.ego_only = j.at("ego_only").get<bool>();
    for (const auto& t : j.at("tracklets")) {
        s.tracklets.push_back(
            {t.at("id").get<AgentId>(), get_opt_id(t.at("gt_id")), get_timed(t.at("obs")), t.at("score").get<double>()});
    }
    for (const auto& f : j.at("truth")) s.truth.push_back({f.at("id").get<AgentId>(), get_timed(f.at("future"))});
    for (const auto& r : j.at("removed")) {
        const auto name = r.at("reason").get<std::string>();
        s.removed.push_back({r.at("id").get<AgentId>(),
                             name == "tracklet_drop" ? RemovalReason::kTrackletDrop : RemovalReason::kNoObservations});
    }
    return s;
}

json to_json(const EgoFrameAnnotation& a) {
    json vis = json::array();
    for (const auto& v : a.visible) {
        vis.push_back({{"id", v.agent_id},
                       {"pose", {v.world_pose.x, v.world_pose.y, v.world_pose.heading}},
                       {"cam", {v.cam_pose.x, v.cam_pose.y, v.cam_pose.z, v.cam_pose.relative_yaw}},
                       {"pixels", v.pixel_count},
                       {"bbox", rect_json(v.bbox2d)}});
    }
    return {{"ego_id", a.ego_id},
            {"step", a.step},
            {"ego_pose", {a.ego_pose.x, a.ego_pose.y, a.ego_pose.heading}},
            {"visible", std::move(vis)}};
}

EgoFrameAnnotation annotation_from_json(const json& j) {
    EgoFrameAnnotation a;
    a.ego_id = j.at("ego_id").get<AgentId>();
    a.step = j.at("step").get<Step>();
    const auto& ep = j.at("ego_pose");
    a.ego_pose = {ep.at(0).get<double>(), ep.at(1).get<double>(), ep.at(2).get<double>()};
    for (const auto& v : j.at("visible")) {
        VisibleAgent va;
        va.agent_id = v.at("id").get<AgentId>();
        const auto& p = v.at("pose");
        va.world_pose = {p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>()};
        const auto& c = v.at("cam");
        va.cam_pose = {c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>(), c.at(3).get<double>()};
        va.pixel_count = v.at("pixels").get<long>();
        va.bbox2d = get_rect(v.at("bbox"));
        a.visible.push_back(va);
    }
    return a;
}

json to_json(const PredictionSet& p, const SceneKey& key) {
    json j = key_json(key);
    j["agent_id"] = p.agent_id;
    j["gt_id"] = opt_id(p.gt_id);
    json samples = json::array();
    for (const auto& s : p.samples) {
        json flat = json::array();
        for (const auto& q : s) {
            flat.push_back(round_to(q.x, 1e-4));
            flat.push_back(round_to(q.y, 1e-4));
        }
        samples.push_back(std::move(flat));
    }
    j["samples"] = std::move(samples);
    return j;
}

PredictionSet prediction_from_json(const json& j, SceneKey* key) {
    if (key) *key = get_key(j);
    PredictionSet p;
    p.agent_id = j.at("agent_id").get<AgentId>();
    p.gt_id = get_opt_id(j.at("gt_id"));
    for (const auto& flat : j.at("samples")) {
        if (flat.size() % 2) throw DataError("prediction sample with odd coordinate count");
        Trajectory t;
        t.reserve(flat.size() / 2);
        for (std::size_t i = 0; i < flat.size(); i += 2) t.push_back({flat[i].get<double>(), flat[i + 1].get<double>()});
        p.samples.push_back(std::move(t));
    }
    return p;
}

namespace {

json objects_json(const std::vector<TrackedObject>& v) {
    json a = json::array();
    for (const auto& o : v) {
        a.push_back({{"id", o.id}, {"box", box_json(o.box)}, {"score", o.score},
                     {"rect", o.rect ? rect_json(*o.rect) : json(nullptr)}});
    }
    return a;
}

std::vector<TrackedObject> get_objects(const json& j) {
    std::vector<TrackedObject> out;
    for (const auto& o : j) {
        TrackedObject t;
        t.id = o.at("id").get<AgentId>();
        t.box = get_box(o.at("box"));
        t.score = o.at("score").get<double>();
        if (!o.at("rect").is_null()) t.rect = get_rect(o.at("rect"));
        out.push_back(t);
    }
    return out;
}

}  // namespace

json to_json(const PerceptionRecord& r) {
    json j = key_json(r.key);
    json frames = json::array();
    for (const auto& f : r.frames) {
        frames.push_back({{"step", f.step},
                          {"truth", objects_json(f.truth)},
                          {"tracks", objects_json(f.tracks)},
                          {"detections", objects_json(f.detections)}});
    }
    j["frames"] = std::move(frames);
    return j;
}

PerceptionRecord perception_from_json(const json& j) {
    PerceptionRecord r;
    r.key = get_key(j);
    for (const auto& f : j.at("frames")) {
        r.frames.push_back({f.at("step").get<Step>(), get_objects(f.at("truth")), get_objects(f.at("tracks")),
                            get_objects(f.at("detections"))});
    }
    return r;
}

JsonlWriter::JsonlWriter(const std::filesystem::path& path, const ArtifactHeader& header) : path_(path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    out_.open(path, std::ios::binary | std::ios::trunc);
    if (!out_) throw DataError("cannot write " + path.string());
    json h = {{"schema", "fpvbench"},
              {"kind", header.kind},
              {"version", header.version},
              {"config_hash", header.config_hash},
              {"meta", header.meta}};
    out_ << h.dump() << '\n';
}

void JsonlWriter::write(const json& row) { out_ << row.dump() << '\n'; }

void JsonlWriter::close() {
    if (!out_.is_open()) return;
    out_.close();
    if (!out_) throw DataError("write failed: " + path_.string());
}

JsonlWriter::~JsonlWriter() {
    if (out_.is_open()) out_.close();
}

void write_jsonl(const std::filesystem::path& path, const ArtifactHeader& header, const std::vector<json>& rows) {
    JsonlWriter w(path, header);
    for (const auto& r : rows) w.write(r);
    w.close();
}

ArtifactHeader read_jsonl(const std::filesystem::path& path, const std::string& kind,
                          const std::function<void(const json&)>& fn) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::string line;
    std::size_t lineno = 0;
    ArtifactHeader header;
    try {
        if (!std::getline(in, line)) throw SchemaError(path.string() + ": missing header");
        ++lineno;
        const json h = json::parse(line);
        if (!h.is_object() || h.value("schema", "") != "fpvbench") {
            throw SchemaError(path.string() + ": not an fpvbench artifact");
        }
        header.kind = h.at("kind").get<std::string>();
        header.version = h.at("version").get<int>();
        header.config_hash = h.at("config_hash").get<std::string>();
        header.meta = h.value("meta", json::object());
        if (header.kind != kind) {
            throw SchemaError(path.string() + ": expected a '" + kind + "' artifact, found '" + header.kind + "'");
        }
        if (header.version != kSchemaVersion) {
            throw SchemaError(path.string() + ": schema version " + std::to_string(header.version) +
                              " needs migration to version " + std::to_string(kSchemaVersion) +
                              "; regenerate it with this build");
        }
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            fn(json::parse(line));
        }
    } catch (const json::exception& e) {
        throw ParseError(lineno, path.string() + ": " + e.what());
    }
    return header;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace fpvbench

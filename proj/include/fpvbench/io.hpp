// JSON-lines artifacts. Every file starts with a header line naming the
// artifact kind, schema version and the hash of the config that produced it.

#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "fpvbench/egocam.hpp"
#include "fpvbench/perceive.hpp"
#include "fpvbench/predict.hpp"
#include "fpvbench/scenegen.hpp"

namespace fpvbench {

using nlohmann::json;

inline constexpr int kSchemaVersion = 1;

struct ArtifactHeader {
    std::string kind;
    int version{kSchemaVersion};
    std::string config_hash;
    json meta = json::object();
};

json to_json(const Scene& s);
Scene scene_from_json(const json& j);

json to_json(const EgoFrameAnnotation& a);
EgoFrameAnnotation annotation_from_json(const json& j);

/// Coordinates are rounded to 0.1 mm on output.
json to_json(const PredictionSet& p, const SceneKey& key);
PredictionSet prediction_from_json(const json& j, SceneKey* key = nullptr);

// Per FPV-Det scene: tracker output, ground truth and detections per frame.
struct TrackedObject {
    AgentId id{0};
    BevBox box;
    double score{1.0};
    std::optional<PixelRect> rect;
};

struct PerceptionFrame {
    Step step{0};  // absolute
    std::vector<TrackedObject> truth;
    std::vector<TrackedObject> tracks;
    std::vector<TrackedObject> detections;
};

struct PerceptionRecord {
    SceneKey key;
    std::vector<PerceptionFrame> frames;
};

json to_json(const PerceptionRecord& r);
PerceptionRecord perception_from_json(const json& j);

/// Streams header + one compact JSON document per line.
class JsonlWriter {
public:
    JsonlWriter(const std::filesystem::path& path, const ArtifactHeader& header);
    void write(const json& row);
    /// Flushes and reports write failures; called by the destructor otherwise.
    void close();
    ~JsonlWriter();
    JsonlWriter(const JsonlWriter&) = delete;
    JsonlWriter& operator=(const JsonlWriter&) = delete;

private:
    std::filesystem::path path_;
    std::ofstream out_;
};

void write_jsonl(const std::filesystem::path& path, const ArtifactHeader& header, const std::vector<json>& rows);

/// Streams records to `fn`. Header kind/version mismatches raise SchemaError,
/// malformed lines raise ParseError naming the file.
ArtifactHeader read_jsonl(const std::filesystem::path& path, const std::string& kind,
                          const std::function<void(const json&)>& fn);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace fpvbench

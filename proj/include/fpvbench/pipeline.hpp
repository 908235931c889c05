// Pipeline stages behind the command-line subcommands. Each stage reads its
// upstream artifacts from the output tree and writes its own.

#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "fpvbench/config.hpp"
#include "fpvbench/io.hpp"

namespace fpvbench {

namespace fs = std::filesystem;

struct FoldSpec {
    std::string name;
    std::vector<fs::path> test;
    std::vector<fs::path> train;  // empty: every other fold's test files
};

struct Manifest {
    fs::path path;
    double step_period{0.4};
    std::vector<FoldSpec> folds;
    [[nodiscard]] const FoldSpec& fold(const std::string& name) const;
};

Manifest load_manifest(const fs::path& path);
Fold load_fold(const Manifest& m, const FoldSpec& spec, int slerp_window);
std::vector<Recording> load_training(const Manifest& m, const std::string& fold, int slerp_window);

/// Folds selected by the config, in manifest order.
std::vector<std::string> selected_folds(const RunConfig& cfg, const Manifest& m);

struct Layout {
    fs::path root;
    [[nodiscard]] fs::path variant_dir(const std::string& fold, Variant v) const;
    [[nodiscard]] fs::path scenes(const std::string& fold, Variant v) const;
    [[nodiscard]] fs::path predictions(const std::string& fold, Variant v, Predictor p) const;
    [[nodiscard]] fs::path reports(const std::string& fold, Variant v) const;
    [[nodiscard]] fs::path annotations(const std::string& fold, const std::string& recording) const;
    [[nodiscard]] fs::path tracking(const std::string& fold) const;
};

// In-memory products of scene generation for one fold.
struct GeneratedFold {
    std::string name;
    std::vector<Scene> bev;
    std::vector<Scene> fpv_gt;
    std::vector<std::pair<std::string, AnnotationIndex>> annotations;  // per recording
};

GeneratedFold generate_fold(const RunConfig& cfg, const Fold& fold, bool with_fpv);

std::vector<Scene> read_scenes(const fs::path& path);
AnnotationIndex read_annotations(const fs::path& path);

void cmd_generate(const RunConfig& cfg, std::ostream* log = nullptr);
void cmd_degrade(const RunConfig& cfg, std::ostream* log = nullptr);
void cmd_track(const RunConfig& cfg, std::ostream* log = nullptr);
void cmd_predict(const RunConfig& cfg, std::ostream* log = nullptr);
std::vector<EvalReport> cmd_evaluate(const RunConfig& cfg, std::ostream* log = nullptr);
std::vector<FoldStatistics> cmd_stats(const RunConfig& cfg, std::ostream* log = nullptr);

/// Writes the effective experiment parameters to <out>/config.json.
void echo_config(const RunConfig& cfg);

/// generate, degrade, track, predict, evaluate, stats.
void run_all(const RunConfig& cfg, std::ostream* log = nullptr);

}  // namespace fpvbench

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "tsmark/detector.hpp"
#include "tsmark/embedder.hpp"
#include "tsmark/metrics.hpp"
#include "tsmark/series.hpp"

namespace tsmark {

struct DetectConfig {
    DetectMethod method = DetectMethod::zscore;
    double gamma = 2.0;
    int top_k = 5;
};

struct DatasetRef {
    std::string name;
    std::string path;
};

/// Everything a reproducible run needs: file references, embedding and
/// detection settings, the seed for the clean/watermarked mix, and the
/// mix ratio (fraction watermarked, default 0.5).
struct ExperimentManifest {
    std::string model_path;
    std::string book_path;
    std::vector<DatasetRef> datasets;
    EmbedConfig embed;
    DetectConfig detect;
    std::uint64_t seed = 0;
    double mix_ratio = 0.5;
    std::string notes;
};

ExperimentManifest parse_manifest(const std::string& json_text);
ExperimentManifest load_manifest(const std::string& path);
std::string manifest_to_json(const ExperimentManifest& manifest);

/// One detection row of the plot-ready CSV.
struct WindowRow {
    std::string dataset;
    std::size_t index = 0;
    bool label = false; // watermarked?
    double z = 0.0;
    double max_sim = 0.0;
    bool decision = false;
    int best_patch_index = -1;
    int best_token_id = -1;
};

struct DatasetBreakdown {
    std::string name;
    std::size_t n_windows = 0;
    std::size_t n_watermarked = 0;
    double mse_clean = 0.0;
    double mse_wm = 0.0;
    double mae_clean = 0.0;
    double mae_wm = 0.0;
    F1Result f1;
    RatioResult ratio;
    double clean_positive_rate = 0.0;
};

struct EvalReport {
    double mse_clean = 0.0;
    double mse_wm = 0.0;
    double mae_clean = 0.0;
    double mae_wm = 0.0;
    F1Result f1;
    RatioResult ratio;
    double clean_positive_rate = 0.0;
    ExperimentManifest config; // echo
    std::vector<DatasetBreakdown> per_dataset;
    std::vector<WindowRow> rows;
};

/// Builds the mixed watermarked/clean pool, detects over it, and computes
/// every metric. Deterministic given the manifest: the pool assignment is
/// a seeded shuffle and all reductions are index-ordered. MSE/MAE are
/// measured in normalized units against the unwatermarked horizons.
EvalReport run_experiment(const ExperimentManifest& manifest);

std::string report_to_json(const EvalReport& report);
void write_report_json(const std::string& path, const EvalReport& report);
void write_report_csv(const std::string& path, const EvalReport& report);

/// Default seed for CLI commands: TSMARK_SEED when set, else 0.
std::uint64_t default_seed();

} // namespace tsmark

#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "tsmark/book.hpp"
#include "tsmark/encoder.hpp"

namespace tsmark {

enum class NoiseMode { hard, soft };
enum class NoiseOptimizer { projected_gd, projected_adam };

std::string to_string(NoiseMode mode);
NoiseMode noise_mode_from_string(const std::string& s);
std::string to_string(NoiseOptimizer opt);
NoiseOptimizer noise_optimizer_from_string(const std::string& s);

struct EmbedConfig {
    int alpha = 1;          // number of watermarked patches
    double eta = 0.01;      // l-inf noise budget, normalized units
    double step = 0.1;      // optimizer learning rate
    int iters = 20;
    NoiseOptimizer optimizer = NoiseOptimizer::projected_adam;
    double lambda_soft = 0.1; // l2 penalty weight, soft mode only
    NoiseMode mode = NoiseMode::hard;

    void validate() const;
};

/// One watermarked segment: the patch it came from, the horizon index
/// range that received noise, the cold token it was steered toward, and
/// the optimized noise itself.
struct PlanEntry {
    int patch_index = 0;
    std::size_t seg_begin = 0;
    std::size_t seg_end = 0; // exclusive, <= horizon length
    int target_token_id = 0;
    double initial_sim = 0.0;
    double final_sim = 0.0;
    std::vector<double> epsilon; // length P; entries past seg_end are never applied
};

struct WatermarkPlan {
    std::vector<PlanEntry> entries;
    EmbedConfig config;
    std::string model_fingerprint;
};

struct NoiseResult {
    Eigen::VectorXd epsilon;
    std::vector<double> sim_trace; // iters+1 values, [0] = initial similarity
    bool degenerate = false;

    double initial_sim() const { return sim_trace.front(); }
    double final_sim() const { return sim_trace.back(); }
};

/// Selects the alpha highest-similarity (patch, book token) pairs over the
/// horizon's disjoint patch grid, each patch used at most once. Ties break
/// by (higher similarity, lower patch index, lower token id). Returns
/// (patch_index, token_id) pairs in selection order.
std::vector<std::pair<int, int>> select_locations(const std::vector<double>& horizon,
                                                  const PatchEncoderModel& model,
                                                  const TokenTable& table,
                                                  const WatermarkBook& book, int alpha);

/// Projected gradient descent on the alignment loss under the hard l-inf
/// budget: every update is followed by element-wise clipping to [-eta,
/// eta], so the returned noise always satisfies the constraint exactly.
/// Throws NumericError on a non-finite gradient.
NoiseResult optimize_noise_hard(const Eigen::VectorXd& segment, const Eigen::VectorXd& target,
                                const PatchEncoderModel& model, const EmbedConfig& cfg);

/// Unconstrained descent on the penalized loss L(eps) + lambda * |eps|_2
/// (subgradient 0 at eps = 0). No projection: the noise may exceed eta.
NoiseResult optimize_noise_soft(const Eigen::VectorXd& segment, const Eigen::VectorXd& target,
                                const PatchEncoderModel& model, const EmbedConfig& cfg);

struct EmbedResult {
    std::vector<double> horizon; // watermarked copy
    WatermarkPlan plan;
};

/// Full insertion: select locations, optimize noise per selected segment,
/// and add each noise vector to its segment range. Indices outside the
/// selected ranges are bit-identical to the input; padded tail positions
/// receive no noise. The horizon must already be normalized.
EmbedResult embed(const std::vector<double>& horizon, const PatchEncoderModel& model,
                  const TokenTable& table, const WatermarkBook& book, const EmbedConfig& cfg);

/// Plan audit file: JSON with the entries, a config echo, and the model
/// fingerprint.
std::string plan_to_json(const WatermarkPlan& plan);
WatermarkPlan plan_from_json(const std::string& text);
void save_plan(const std::string& path, const WatermarkPlan& plan);
WatermarkPlan load_plan(const std::string& path);

} // namespace tsmark

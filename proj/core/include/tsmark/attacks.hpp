#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tsmark/book.hpp"
#include "tsmark/embedder.hpp"
#include "tsmark/encoder.hpp"
#include "tsmark/series.hpp"

namespace tsmark {

enum class FswStartRule { fixed, max_energy };

std::string to_string(FswStartRule rule);
FswStartRule fsw_start_rule_from_string(const std::string& s);

/// Forecasting-signal watermarking baseline: adds a predefined sine
/// pattern directly to a segment of the forecast signal.
struct FswConfig {
    double amplitude = 0.5;
    int period = 24;      // samples
    int segment_len = 24; // samples, <= horizon length
    FswStartRule start_rule = FswStartRule::fixed;
    std::size_t fixed_start = 0;

    void validate() const;
};

/// Adds amplitude * sin(2*pi*t/period), t = 0..segment_len-1, at the
/// chosen segment. max_energy picks the segment with the largest sum of
/// squares.
std::vector<double> fsw_embed(const std::vector<double>& horizon, const FswConfig& cfg);

struct FswDetection {
    bool decision = false;
    double max_correlation = 0.0;
    std::size_t best_offset = 0;
};

/// Matched filter: slides the sine template over the candidate and reports
/// the max zero-mean normalized cross-correlation; decision = max > threshold.
/// Degenerate windows (norm below floor) correlate 0.
FswDetection fsw_detect(const std::vector<double>& candidate, const FswConfig& cfg,
                        double threshold);

/// The distillation student: a single linear map from history to horizon.
struct LinearForecaster {
    Eigen::MatrixXd weights;   // L x K
    Eigen::VectorXd intercept; // L

    std::vector<double> predict(const std::vector<double>& history) const;
};

/// Fits weights and intercept by ridge-regularized least squares over
/// (history, horizon) pairs, minimizing sum |A h + c - y|^2 + reg |A|_F^2
/// via the normal equations (the intercept is not penalized).
/// Deterministic and permutation-invariant. A singular system with reg = 0
/// throws NumericError suggesting reg > 0.
LinearForecaster distill_train(const std::vector<TimeSeriesWindow>& pairs, double reg);

struct TraceabilityReport {
    double distilled_positive_rate = 0.0;
    double clean_positive_rate = 0.0;
    double watermarked_positive_rate = 0.0;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    double gamma = 0.0;
    double ridge = 0.0;
    EmbedConfig embed_config;
};

/// Simulates the distillation attack: watermark every training horizon,
/// fit the student on (history, watermarked horizon) pairs, run it on the
/// held-out histories, and report z-score positive rates for the student's
/// outputs, the clean held-out horizons, and directly watermarked held-out
/// horizons. Windows must already be normalized.
TraceabilityReport distill_and_probe(const PatchEncoderModel& model, const TokenTable& table,
                                     const WatermarkBook& book,
                                     const std::vector<TimeSeriesWindow>& train,
                                     const std::vector<TimeSeriesWindow>& test,
                                     const EmbedConfig& embed_cfg, double gamma,
                                     double ridge = 1e-3);

std::string traceability_to_json(const TraceabilityReport& report);
void save_traceability(const std::string& path, const TraceabilityReport& report);

} // namespace tsmark

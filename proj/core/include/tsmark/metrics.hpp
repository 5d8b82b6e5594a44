#pragma once

#include <vector>

#include "tsmark/errors.hpp"

namespace tsmark {

/// Mean squared / absolute error over all samples. Throws DataError on
/// length mismatch or empty input.
double mse(const std::vector<double>& pred, const std::vector<double>& truth);
double mae(const std::vector<double>& pred, const std::vector<double>& truth);
double mse(const std::vector<std::vector<double>>& pred, const std::vector<std::vector<double>>& truth);
double mae(const std::vector<std::vector<double>>& pred, const std::vector<std::vector<double>>& truth);

struct F1Result {
    double f1 = 0.0;
    double precision = 0.0;
    double recall = 0.0;
};

/// Positive class = watermarked. Precision, recall, and f1 are 0 whenever
/// their denominator is 0.
F1Result f1_score(const std::vector<bool>& decisions, const std::vector<bool>& labels);

/// F1 / (mse_wm - mse_clean). The ratio is unbounded when the denominator
/// is at or below 1e-12.
struct RatioResult {
    double value = 0.0;
    bool unbounded = false;
};

RatioResult f1_over_delta_mse(double f1, double mse_wm, double mse_clean);

} // namespace tsmark

#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "tsmark/encoder.hpp"
#include "tsmark/series.hpp"

namespace tsmark {

/// What population the calibration statistics describe.
/// per_window_max matches the detection statistic (one max-similarity
/// value per window); per_pair pools every (patch, token) similarity and
/// is kept for ablation.
enum class StatMode { per_window_max, per_pair };

std::string to_string(StatMode mode);
StatMode stat_mode_from_string(const std::string& s);

/// The owner-held watermark book: mined cold-token ids plus the
/// calibration statistics used by z-score detection. patch_len and
/// window_len pin the detection patching convention (disjoint, stride =
/// patch_len) that embedding and detection must share.
struct WatermarkBook {
    static constexpr double kSigmaFloor = 1e-8;

    std::vector<int> cold_token_ids;
    double mu = 0.0;
    double sigma = 1.0;
    StatMode stat_mode = StatMode::per_window_max;
    std::string model_fingerprint;
    std::size_t calibration_size = 0;
    int patch_len = 0;
    std::size_t window_len = 0;

    int size() const { return static_cast<int>(cold_token_ids.size()); }

    /// Structural checks: at least one unique id, sigma > 0, fingerprint
    /// present. Throws DataError.
    void validate() const;
};

/// Accumulates, for every token i, the total cosine similarity between
/// token i and every horizon patch in the corpus (disjoint patch grid),
/// then returns the M ids with the smallest totals. Ties break toward the
/// lower token id. Order-independent over the corpus.
std::vector<int> mine_cold_tokens(const PatchEncoderModel& model, const TokenTable& table,
                                  const std::vector<TimeSeriesWindow>& corpus, int M);

/// Calibrates (mu, sigma) for the book token set on a clean corpus.
/// per_window_max: one statistic per window, the max similarity over
/// (patch, book token) pairs; mu/sigma are its mean and sample std (n-1),
/// sigma floored. per_pair: mean and sample std over every individual
/// similarity. Warns to stderr below 30 windows.
std::pair<double, double> calibrate_stats(const PatchEncoderModel& model, const TokenTable& table,
                                          const std::vector<int>& book_ids,
                                          const std::vector<TimeSeriesWindow>& corpus,
                                          StatMode mode = StatMode::per_window_max);

/// mine_cold_tokens + calibrate_stats + convention metadata in one step.
/// The corpus windows must already be normalized.
WatermarkBook build_book(const PatchEncoderModel& model, const TokenTable& table,
                         const std::vector<TimeSeriesWindow>& corpus, int M,
                         StatMode mode = StatMode::per_window_max);

/// Book file: JSON {cold_token_ids, mu, sigma, stat_mode,
/// model_fingerprint, calibration_size, M, patching}. Round-trips exactly;
/// load validates the structural invariants.
void save_book(const std::string& path, const WatermarkBook& book);
WatermarkBook load_book(const std::string& path);

/// Hard error if the book was built against a different encoder: detection
/// with the wrong encoder is meaningless.
void verify_book_model(const WatermarkBook& book, const PatchEncoderModel& model);

} // namespace tsmark

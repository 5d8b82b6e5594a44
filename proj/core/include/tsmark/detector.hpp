#pragma once

#include <string>
#include <vector>

#include "tsmark/book.hpp"
#include "tsmark/encoder.hpp"

namespace tsmark {

enum class DetectMethod { zscore, topk };

std::string to_string(DetectMethod m);
DetectMethod detect_method_from_string(const std::string& s);

struct DetectionResult {
    double z_score = 0.0;
    double max_similarity = 0.0;
    bool decision = false;
    int best_patch_index = -1;
    int best_token_id = -1;
    DetectMethod method = DetectMethod::zscore;
    double gamma = 0.0; // threshold echo (zscore)
    int top_k = 0;      // K echo (topk)
};

/// z-score test: patchify the candidate on the same disjoint grid the
/// embedder used, take the max similarity s over (patch, book token)
/// pairs, and report z = (s - mu) / sigma with decision z > gamma.
/// Candidates longer than the calibration window are covered by the same
/// patch grid, which is equivalent to scanning length-window_len windows
/// at stride P and taking the max z. Throws DataError when the candidate
/// is shorter than one patch or the fingerprint mismatches.
DetectionResult detect_zscore(const std::vector<double>& candidate, const PatchEncoderModel& model,
                              const TokenTable& table, const WatermarkBook& book, double gamma);

/// Naive top-K test: for each patch, rank the full vocabulary by
/// similarity and decide positive iff any book token appears in some
/// patch's top K. z_score and max_similarity report the max book
/// similarity for diagnostics.
DetectionResult detect_topk(const std::vector<double>& candidate, const PatchEncoderModel& model,
                            const TokenTable& table, const WatermarkBook& book, int k);

/// CLI-facing JSON: {method, z, max_sim, decision, best_patch_index,
/// best_token_id, gamma}.
std::string detection_to_json(const DetectionResult& result);

} // namespace tsmark

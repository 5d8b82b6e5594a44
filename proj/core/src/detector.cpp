#include "tsmark/detector.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include <json.hpp>

#include "internal_io.hpp"

namespace tsmark {

using nlohmann::json;

std::string to_string(DetectMethod m) { return m == DetectMethod::zscore ? "zscore" : "topk"; }

DetectMethod detect_method_from_string(const std::string& s) {
    if (s == "zscore") return DetectMethod::zscore;
    if (s == "topk") return DetectMethod::topk;
    throw ConfigError("unknown detection method: " + s);
}

namespace {

std::vector<Patch> candidate_patches(const std::vector<double>& candidate,
                                     const PatchEncoderModel& model) {
    if (candidate.size() < static_cast<std::size_t>(model.patch_len()))
        throw DataError("series shorter than patch length");
    // The disjoint grid over the whole candidate. For candidates longer
    // than the calibration window this equals scanning window-sized views
    // at stride P and keeping the best, since those views share the grid.
    return patchify(candidate, PatchConfig{model.patch_len(), model.patch_len()});
}

} // namespace

DetectionResult detect_zscore(const std::vector<double>& candidate, const PatchEncoderModel& model,
                              const TokenTable& table, const WatermarkBook& book, double gamma) {
    verify_book_model(book, model);
    auto patches = candidate_patches(candidate, model);
    Eigen::MatrixXd sims = sim_matrix(patches, model, table, book.cold_token_ids);

    DetectionResult result;
    result.method = DetectMethod::zscore;
    result.gamma = gamma;
    Eigen::Index best_patch = 0, best_token = 0;
    result.max_similarity = sims.maxCoeff(&best_patch, &best_token);
    result.best_patch_index = static_cast<int>(best_patch);
    result.best_token_id = book.cold_token_ids[static_cast<std::size_t>(best_token)];
    result.z_score = (result.max_similarity - book.mu) / book.sigma;
    result.decision = result.z_score > gamma;
    return result;
}

DetectionResult detect_topk(const std::vector<double>& candidate, const PatchEncoderModel& model,
                            const TokenTable& table, const WatermarkBook& book, int k) {
    verify_book_model(book, model);
    if (k < 1 || k > table.vocab_size())
        throw ConfigError("top-K must satisfy 1 <= K <= vocab_size");
    auto patches = candidate_patches(candidate, model);
    Eigen::MatrixXd sims = sim_matrix(patches, model, table); // full vocabulary

    std::set<int> book_ids(book.cold_token_ids.begin(), book.cold_token_ids.end());

    DetectionResult result;
    result.method = DetectMethod::topk;
    result.top_k = k;
    result.max_similarity = -2.0;

    std::vector<int> order(static_cast<std::size_t>(table.vocab_size()));
    for (Eigen::Index j = 0; j < sims.rows(); ++j) {
        // Track the max book similarity for diagnostics.
        for (int id : book.cold_token_ids) {
            double s = sims(j, id);
            if (s > result.max_similarity) {
                result.max_similarity = s;
                result.best_patch_index = static_cast<int>(j);
                result.best_token_id = id;
            }
        }
        // Top-K over the full vocabulary, ties toward the lower id.
        std::iota(order.begin(), order.end(), 0);
        std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](int a, int b) {
            if (sims(j, a) != sims(j, b)) return sims(j, a) > sims(j, b);
            return a < b;
        });
        for (int r = 0; r < k; ++r) {
            if (book_ids.count(order[static_cast<std::size_t>(r)]) > 0) {
                result.decision = true;
                break;
            }
        }
    }
    result.z_score = result.max_similarity;
    return result;
}

std::string detection_to_json(const DetectionResult& result) {
    json j{{"method", to_string(result.method)},
           {"z", result.z_score},
           {"max_sim", result.max_similarity},
           {"decision", result.decision},
           {"best_patch_index", result.best_patch_index},
           {"best_token_id", result.best_token_id},
           {"gamma", result.gamma}};
    if (result.method == DetectMethod::topk) j["k"] = result.top_k;
    return j.dump();
}

} // namespace tsmark

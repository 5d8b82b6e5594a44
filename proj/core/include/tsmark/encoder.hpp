#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "tsmark/series.hpp"

namespace tsmark {

/// Norm below which a vector is treated as degenerate inside cosine
/// similarity: the similarity is 0 and gradients vanish rather than
/// producing NaNs.
constexpr double kCosineNormFloor = 1e-12;

/// The protected model's token embedding table, one row per vocabulary
/// token.
struct TokenTable {
    static constexpr double kRowNormFloor = 1e-8;

    Eigen::MatrixXd embeddings; // vocab x d

    int vocab_size() const { return static_cast<int>(embeddings.rows()); }
    int dim() const { return static_cast<int>(embeddings.cols()); }

    /// Rejects tables with non-finite entries or structurally zero rows.
    void validate() const;
};

/// Linear stand-in for the protected model's time-series encoder:
/// encode(x) = W x + b. The fingerprint is a content hash over (W, b,
/// token table) and must match between book construction, embedding, and
/// detection.
struct PatchEncoderModel {
    Eigen::MatrixXd weight; // d x P
    Eigen::VectorXd bias;   // d
    PatchConfig patch_cfg;  // stride == patch_len: disjoint patch grid
    std::string fingerprint;

    int dim() const { return static_cast<int>(weight.rows()); }
    int patch_len() const { return static_cast<int>(weight.cols()); }

    void validate() const;
};

/// e = W x + b. Throws DataError on patch length mismatch.
Eigen::VectorXd encode(const PatchEncoderModel& model, const Eigen::VectorXd& patch);
Eigen::VectorXd encode(const PatchEncoderModel& model, const std::vector<double>& patch);

/// Cosine similarity with norms floored at kCosineNormFloor; a degenerate
/// vector yields 0. Throws DataError on length mismatch.
double cosine_sim(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

/// Similarity matrix: entry (j, i) = cosine_sim(encode(patch_j), token_i)
/// over the whole table, or over the token_ids subset.
Eigen::MatrixXd sim_matrix(const std::vector<Patch>& patches, const PatchEncoderModel& model,
                           const TokenTable& table);
Eigen::MatrixXd sim_matrix(const std::vector<Patch>& patches, const PatchEncoderModel& model,
                           const TokenTable& table, const std::vector<int>& token_ids);

struct AlignmentGradient {
    Eigen::VectorXd grad;    // dL/d(eps), length P
    double sim = 0.0;        // cosine at the evaluation point
    bool degenerate = false; // encoded vector fell below the norm floor
};

/// Closed-form gradient of the alignment loss L(eps) = 1 - sim(W(x+eps)+b,
/// target) with respect to eps. With e = W(x+eps)+b:
///   grad_e sim = target/(|e||target|) - sim * e/|e|^2
///   dL/d(eps)  = -W^T grad_e sim
/// A degenerate e returns a zero gradient with the degenerate flag set.
/// Throws DataError if the target itself is degenerate.
AlignmentGradient grad_alignment_loss(const Eigen::VectorXd& segment, const Eigen::VectorXd& eps,
                                      const Eigen::VectorXd& target, const PatchEncoderModel& model);

/// Synthetic protected-model fixture. The embedding space is split into a
/// warm subspace, where encoded patches of typical synthetic data land,
/// and an orthogonal cold subspace reachable only through a small
/// high-frequency leakage term in W. Warm tokens are biased toward the
/// mean embedding direction; cold tokens live in the cold subspace, so
/// their accumulated similarity over a clean corpus stays near zero while
/// bounded noise can still steer an embedding toward a chosen cold token.
struct SyntheticProtectedModel {
    PatchEncoderModel model;
    TokenTable table;
    std::vector<int> warm_ids;
    std::vector<int> cold_ids_truth;
};

SyntheticProtectedModel make_synthetic_protected_model(std::uint64_t seed, int vocab_size, int d,
                                                       int patch_len, double warm_fraction);

/// Hex digest (FNV-1a 64) over the canonical text serialization of the
/// weights and table. Changes iff any value changes.
std::string compute_fingerprint(const Eigen::MatrixXd& weight, const Eigen::VectorXd& bias,
                                const TokenTable& table);

/// Model file: JSON {d, P, vocab_size, W (row-major), b, token_embeddings
/// (row-major), fingerprint}. Load recomputes and checks the fingerprint.
void save_model(const std::string& path, const PatchEncoderModel& model, const TokenTable& table);
std::pair<PatchEncoderModel, TokenTable> load_model(const std::string& path);

} // namespace tsmark

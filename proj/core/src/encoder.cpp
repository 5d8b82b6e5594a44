#include "tsmark/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "internal_io.hpp"

namespace tsmark {

using nlohmann::json;

void TokenTable::validate() const {
    if (embeddings.rows() < 1 || embeddings.cols() < 1)
        throw DataError("token table must be non-empty");
    if (!embeddings.allFinite()) throw DataError("token table contains non-finite entries");
    for (Eigen::Index i = 0; i < embeddings.rows(); ++i) {
        if (embeddings.row(i).norm() < kRowNormFloor)
            throw DataError("token table row " + std::to_string(i) + " is structurally zero");
    }
}

void PatchEncoderModel::validate() const {
    if (dim() < 2) throw DataError("encoder dimension must be >= 2");
    if (patch_len() < 1) throw DataError("encoder patch length must be >= 1");
    if (bias.size() != weight.rows()) throw DataError("encoder bias/weight dimension mismatch");
    if (!weight.allFinite() || !bias.allFinite())
        throw DataError("encoder weights contain non-finite entries");
    patch_cfg.validate();
}

Eigen::VectorXd encode(const PatchEncoderModel& model, const Eigen::VectorXd& patch) {
    if (patch.size() != model.weight.cols())
        throw DataError("patch length " + std::to_string(patch.size()) +
                        " does not match encoder patch length " + std::to_string(model.patch_len()));
    return model.weight * patch + model.bias;
}

Eigen::VectorXd encode(const PatchEncoderModel& model, const std::vector<double>& patch) {
    return encode(model, Eigen::Map<const Eigen::VectorXd>(patch.data(),
                                                           static_cast<Eigen::Index>(patch.size())));
}

double cosine_sim(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    if (a.size() != b.size()) throw DataError("cosine_sim: vector length mismatch");
    double na = a.norm();
    double nb = b.norm();
    if (na < kCosineNormFloor || nb < kCosineNormFloor) return 0.0;
    return a.dot(b) / (na * nb);
}

namespace {

// Rows normalized to unit length; degenerate rows become zero so their
// similarities are 0 by convention.
Eigen::MatrixXd normalized_rows(const Eigen::MatrixXd& m) {
    Eigen::MatrixXd out = m;
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        double n = out.row(i).norm();
        if (n < kCosineNormFloor)
            out.row(i).setZero();
        else
            out.row(i) /= n;
    }
    return out;
}

Eigen::MatrixXd encode_all(const std::vector<Patch>& patches, const PatchEncoderModel& model) {
    Eigen::MatrixXd embeddings(static_cast<Eigen::Index>(patches.size()), model.dim());
    for (std::size_t j = 0; j < patches.size(); ++j)
        embeddings.row(static_cast<Eigen::Index>(j)) = encode(model, patches[j].values).transpose();
    return embeddings;
}

} // namespace

Eigen::MatrixXd sim_matrix(const std::vector<Patch>& patches, const PatchEncoderModel& model,
                           const TokenTable& table) {
    if (table.vocab_size() == 0) throw DataError("sim_matrix: empty token set");
    Eigen::MatrixXd e_hat = normalized_rows(encode_all(patches, model));
    Eigen::MatrixXd v_hat = normalized_rows(table.embeddings);
    return e_hat * v_hat.transpose();
}

Eigen::MatrixXd sim_matrix(const std::vector<Patch>& patches, const PatchEncoderModel& model,
                           const TokenTable& table, const std::vector<int>& token_ids) {
    if (token_ids.empty()) throw DataError("sim_matrix: empty token set");
    Eigen::MatrixXd subset(static_cast<Eigen::Index>(token_ids.size()), table.dim());
    for (std::size_t i = 0; i < token_ids.size(); ++i) {
        int id = token_ids[i];
        if (id < 0 || id >= table.vocab_size())
            throw DataError("token id " + std::to_string(id) + " out of range");
        subset.row(static_cast<Eigen::Index>(i)) = table.embeddings.row(id);
    }
    Eigen::MatrixXd e_hat = normalized_rows(encode_all(patches, model));
    Eigen::MatrixXd v_hat = normalized_rows(subset);
    return e_hat * v_hat.transpose();
}

AlignmentGradient grad_alignment_loss(const Eigen::VectorXd& segment, const Eigen::VectorXd& eps,
                                      const Eigen::VectorXd& target,
                                      const PatchEncoderModel& model) {
    if (segment.size() != model.weight.cols() || eps.size() != model.weight.cols())
        throw DataError("grad_alignment_loss: segment/eps length mismatch");
    if (target.size() != model.weight.rows())
        throw DataError("grad_alignment_loss: target dimension mismatch");
    double nv = target.norm();
    if (nv < kCosineNormFloor) throw DataError("grad_alignment_loss: degenerate target token");

    AlignmentGradient out;
    Eigen::VectorXd e = model.weight * (segment + eps) + model.bias;
    double ne = e.norm();
    if (ne < kCosineNormFloor) {
        out.grad = Eigen::VectorXd::Zero(segment.size());
        out.sim = 0.0;
        out.degenerate = true;
        return out;
    }
    out.sim = e.dot(target) / (ne * nv);
    Eigen::VectorXd grad_e = target / (ne * nv) - out.sim * e / (ne * ne);
    out.grad = -(model.weight.transpose() * grad_e);
    return out;
}

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

void fnv_update(std::uint64_t& h, const std::string& s) {
    for (unsigned char c : s) {
        h ^= c;
        h *= kFnvPrime;
    }
}

} // namespace

std::string compute_fingerprint(const Eigen::MatrixXd& weight, const Eigen::VectorXd& bias,
                                const TokenTable& table) {
    std::uint64_t h = kFnvOffset;
    std::ostringstream head;
    head << "tsmark/model/v1\n" << weight.rows() << ' ' << weight.cols() << ' '
         << table.vocab_size() << ' ' << table.dim() << '\n';
    fnv_update(h, head.str());
    for (Eigen::Index i = 0; i < weight.rows(); ++i)
        for (Eigen::Index j = 0; j < weight.cols(); ++j)
            fnv_update(h, detail::format_double(weight(i, j)) + ";");
    fnv_update(h, "|b|");
    for (Eigen::Index i = 0; i < bias.size(); ++i)
        fnv_update(h, detail::format_double(bias(i)) + ";");
    fnv_update(h, "|V|");
    for (Eigen::Index i = 0; i < table.embeddings.rows(); ++i)
        for (Eigen::Index j = 0; j < table.embeddings.cols(); ++j)
            fnv_update(h, detail::format_double(table.embeddings(i, j)) + ";");

    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

SyntheticProtectedModel make_synthetic_protected_model(std::uint64_t seed, int vocab_size, int d,
                                                       int patch_len, double warm_fraction) {
    if (d < 4) throw ConfigError("fixture requires d >= 4");
    if (patch_len < 2) throw ConfigError("fixture requires patch_len >= 2");
    if (vocab_size < 3) throw ConfigError("fixture requires vocab_size >= 3");
    if (warm_fraction <= 0.0 || warm_fraction >= 1.0)
        throw ConfigError("warm_fraction must be in (0, 1)");
    int n_warm_tokens = static_cast<int>(std::floor(warm_fraction * vocab_size));
    if (n_warm_tokens < 2) throw ConfigError("warm subset smaller than 2 tokens");

    // Geometry constants. The mean embedding direction dominates the
    // encoded-patch norm; the cold leakage kappa keeps clean cold
    // similarities near zero while leaving cold tokens reachable by
    // optimized noise.
    const double mean_level = 6.0;
    const double warm_spread = 0.6;
    const double cold_leak = 0.25;

    int warm_dims = std::max(2, (3 * d) / 8);
    int cold_dims = std::max(1, std::min(d / 4, patch_len / 2));
    if (1 + warm_dims + cold_dims > d) warm_dims = d - 1 - cold_dims;
    if (warm_dims < 1) throw ConfigError("fixture dimension too small for subspace split");

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    // Random orthonormal frame: col 0 is the mean direction, the next
    // warm_dims columns span the warm subspace, the following cold_dims
    // columns span the cold subspace.
    Eigen::MatrixXd a(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) a(i, j) = gauss(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    Eigen::MatrixXd q = qr.householderQ();

    Eigen::VectorXd mean_dir = q.col(0);
    Eigen::MatrixXd warm_basis = q.middleCols(1, warm_dims);
    Eigen::MatrixXd cold_basis = q.middleCols(1 + warm_dims, cold_dims);

    // Warm mixing: generic random rows, excited by any patch content.
    Eigen::MatrixXd warm_mix(warm_dims, patch_len);
    double warm_row_scale = 1.0 / std::sqrt(static_cast<double>(patch_len));
    for (int i = 0; i < warm_dims; ++i)
        for (int j = 0; j < patch_len; ++j) warm_mix(i, j) = warm_row_scale * gauss(rng);

    // Cold mixing: the highest-frequency DCT rows, barely excited by the
    // smooth synthetic corpus but fully exposed to arbitrary noise shapes.
    Eigen::MatrixXd cold_mix(cold_dims, patch_len);
    for (int i = 0; i < cold_dims; ++i) {
        int freq = patch_len - 1 - i;
        for (int t = 0; t < patch_len; ++t)
            cold_mix(i, t) = std::cos(std::numbers::pi * freq * (t + 0.5) / patch_len);
        cold_mix.row(i) /= cold_mix.row(i).norm();
    }

    PatchEncoderModel model;
    model.weight = warm_basis * warm_mix + cold_leak * (cold_basis * cold_mix);
    model.bias = mean_level * mean_dir;
    model.patch_cfg = PatchConfig{patch_len, patch_len};

    // Random id assignment so warm/cold membership is uncorrelated with
    // token order.
    std::vector<int> ids(static_cast<std::size_t>(vocab_size));
    std::iota(ids.begin(), ids.end(), 0);
    std::shuffle(ids.begin(), ids.end(), rng);

    SyntheticProtectedModel out;
    out.warm_ids.assign(ids.begin(), ids.begin() + n_warm_tokens);
    out.cold_ids_truth.assign(ids.begin() + n_warm_tokens, ids.end());
    std::sort(out.warm_ids.begin(), out.warm_ids.end());
    std::sort(out.cold_ids_truth.begin(), out.cold_ids_truth.end());

    Eigen::MatrixXd embeddings(vocab_size, d);
    std::vector<bool> is_warm(static_cast<std::size_t>(vocab_size), false);
    for (int id : out.warm_ids) is_warm[static_cast<std::size_t>(id)] = true;
    for (int id = 0; id < vocab_size; ++id) {
        Eigen::VectorXd v;
        if (is_warm[static_cast<std::size_t>(id)]) {
            Eigen::VectorXd z(warm_dims);
            for (int k = 0; k < warm_dims; ++k) z(k) = gauss(rng);
            v = mean_dir + warm_spread * (warm_basis * z);
        } else {
            Eigen::VectorXd z(cold_dims);
            for (int k = 0; k < cold_dims; ++k) z(k) = gauss(rng);
            if (z.norm() < kCosineNormFloor) z.setOnes();
            v = cold_basis * z;
        }
        embeddings.row(id) = (v / v.norm()).transpose();
    }
    out.table.embeddings = std::move(embeddings);
    out.table.validate();

    out.model = std::move(model);
    out.model.fingerprint = compute_fingerprint(out.model.weight, out.model.bias, out.table);
    out.model.validate();
    return out;
}

void save_model(const std::string& path, const PatchEncoderModel& model, const TokenTable& table) {
    model.validate();
    table.validate();
    if (table.dim() != model.dim())
        throw DataError("token table dimension does not match encoder dimension");

    std::vector<double> w_flat;
    w_flat.reserve(static_cast<std::size_t>(model.weight.size()));
    for (Eigen::Index i = 0; i < model.weight.rows(); ++i)
        for (Eigen::Index j = 0; j < model.weight.cols(); ++j) w_flat.push_back(model.weight(i, j));
    std::vector<double> b_flat(model.bias.data(), model.bias.data() + model.bias.size());
    std::vector<double> v_flat;
    v_flat.reserve(static_cast<std::size_t>(table.embeddings.size()));
    for (Eigen::Index i = 0; i < table.embeddings.rows(); ++i)
        for (Eigen::Index j = 0; j < table.embeddings.cols(); ++j)
            v_flat.push_back(table.embeddings(i, j));

    json j{{"d", model.dim()},
           {"P", model.patch_len()},
           {"vocab_size", table.vocab_size()},
           {"W", w_flat},
           {"b", b_flat},
           {"token_embeddings", v_flat},
           {"fingerprint", compute_fingerprint(model.weight, model.bias, table)}};
    detail::write_file(path, j.dump(2) + "\n");
}

std::pair<PatchEncoderModel, TokenTable> load_model(const std::string& path) {
    json j;
    try {
        j = json::parse(detail::read_file(path));
    } catch (const json::exception& e) {
        throw DataError("invalid model JSON in " + path + ": " + e.what());
    }
    try {
        int d = j.at("d").get<int>();
        int p = j.at("P").get<int>();
        int vocab = j.at("vocab_size").get<int>();
        auto w_flat = j.at("W").get<std::vector<double>>();
        auto b_flat = j.at("b").get<std::vector<double>>();
        auto v_flat = j.at("token_embeddings").get<std::vector<double>>();
        if (w_flat.size() != static_cast<std::size_t>(d) * static_cast<std::size_t>(p))
            throw DataError("model file W has wrong size");
        if (b_flat.size() != static_cast<std::size_t>(d))
            throw DataError("model file b has wrong size");
        if (v_flat.size() != static_cast<std::size_t>(vocab) * static_cast<std::size_t>(d))
            throw DataError("model file token_embeddings has wrong size");

        PatchEncoderModel model;
        model.weight.resize(d, p);
        for (int i = 0; i < d; ++i)
            for (int k = 0; k < p; ++k)
                model.weight(i, k) = w_flat[static_cast<std::size_t>(i) * p + k];
        model.bias = Eigen::Map<const Eigen::VectorXd>(b_flat.data(), d);
        model.patch_cfg = PatchConfig{p, p};

        TokenTable table;
        table.embeddings.resize(vocab, d);
        for (int i = 0; i < vocab; ++i)
            for (int k = 0; k < d; ++k)
                table.embeddings(i, k) = v_flat[static_cast<std::size_t>(i) * d + k];

        model.fingerprint = compute_fingerprint(model.weight, model.bias, table);
        std::string stored = j.at("fingerprint").get<std::string>();
        if (stored != model.fingerprint)
            throw DataError("model file fingerprint mismatch in " + path +
                            " (stored " + stored + ", computed " + model.fingerprint + ")");
        model.validate();
        table.validate();
        return {std::move(model), std::move(table)};
    } catch (const json::exception& e) {
        throw DataError("model schema error in " + path + ": " + e.what());
    }
}

} // namespace tsmark

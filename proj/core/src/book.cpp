#include "tsmark/book.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>

#include <json.hpp>

#include "internal_io.hpp"
#include "tsmark/parallel.hpp"

namespace tsmark {

using nlohmann::json;

std::string to_string(StatMode mode) {
    return mode == StatMode::per_window_max ? "per_window_max" : "per_pair";
}

StatMode stat_mode_from_string(const std::string& s) {
    if (s == "per_window_max") return StatMode::per_window_max;
    if (s == "per_pair") return StatMode::per_pair;
    throw ConfigError("unknown stat_mode: " + s);
}

void WatermarkBook::validate() const {
    if (cold_token_ids.empty()) throw DataError("watermark book has no tokens");
    std::vector<int> sorted = cold_token_ids;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw DataError("watermark book has duplicate token ids");
    if (sorted.front() < 0) throw DataError("watermark book has negative token ids");
    if (!(sigma > 0.0)) throw DataError("watermark book sigma must be > 0");
    if (model_fingerprint.empty()) throw DataError("watermark book missing model fingerprint");
    if (patch_len < 1) throw DataError("watermark book missing patch convention");
    if (window_len < static_cast<std::size_t>(patch_len))
        throw DataError("watermark book window_len shorter than patch_len");
}

namespace {

// Disjoint patch grid shared by mining, calibration, embedding, and
// detection.
PatchConfig grid(const PatchEncoderModel& model) {
    return PatchConfig{model.patch_len(), model.patch_len()};
}

} // namespace

std::vector<int> mine_cold_tokens(const PatchEncoderModel& model, const TokenTable& table,
                                  const std::vector<TimeSeriesWindow>& corpus, int M) {
    if (corpus.empty()) throw DataError("mine_cold_tokens: empty corpus");
    if (M < 1) throw ConfigError("mine_cold_tokens: M must be >= 1");
    if (M >= table.vocab_size())
        throw ConfigError("mine_cold_tokens: M must be smaller than the vocabulary");

    // Per-chunk partial sums, reduced in chunk order: bit-stable for any
    // worker count.
    const std::size_t chunk = 32;
    std::size_t n_chunks = (corpus.size() + chunk - 1) / chunk;
    std::vector<Eigen::VectorXd> partial(n_chunks);
    parallel_for(n_chunks, [&](std::size_t c) {
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(table.vocab_size());
        std::size_t lo = c * chunk;
        std::size_t hi = std::min(corpus.size(), lo + chunk);
        for (std::size_t w = lo; w < hi; ++w) {
            auto patches = patchify(corpus[w].horizon, grid(model));
            Eigen::MatrixXd sims = sim_matrix(patches, model, table);
            acc += sims.colwise().sum().transpose();
        }
        partial[c] = std::move(acc);
    });

    Eigen::VectorXd accumulated = Eigen::VectorXd::Zero(table.vocab_size());
    for (const auto& p : partial) accumulated += p;

    std::vector<int> ids(static_cast<std::size_t>(table.vocab_size()));
    std::iota(ids.begin(), ids.end(), 0);
    std::stable_sort(ids.begin(), ids.end(), [&](int a, int b) {
        if (accumulated(a) != accumulated(b)) return accumulated(a) < accumulated(b);
        return a < b;
    });
    ids.resize(static_cast<std::size_t>(M));
    return ids;
}

std::pair<double, double> calibrate_stats(const PatchEncoderModel& model, const TokenTable& table,
                                          const std::vector<int>& book_ids,
                                          const std::vector<TimeSeriesWindow>& corpus,
                                          StatMode mode) {
    if (corpus.empty()) throw DataError("calibrate_stats: empty corpus");
    if (book_ids.empty()) throw DataError("calibrate_stats: empty book");
    if (corpus.size() < 30)
        std::cerr << "tsmark: warning: calibrating on only " << corpus.size()
                  << " windows; statistics may be unstable\n";

    std::vector<std::vector<double>> per_window(corpus.size());
    parallel_for(corpus.size(), [&](std::size_t w) {
        auto patches = patchify(corpus[w].horizon, grid(model));
        Eigen::MatrixXd sims = sim_matrix(patches, model, table, book_ids);
        if (mode == StatMode::per_window_max) {
            per_window[w] = {sims.maxCoeff()};
        } else {
            std::vector<double> vals;
            vals.reserve(static_cast<std::size_t>(sims.size()));
            for (Eigen::Index j = 0; j < sims.rows(); ++j)
                for (Eigen::Index i = 0; i < sims.cols(); ++i) vals.push_back(sims(j, i));
            per_window[w] = std::move(vals);
        }
    });

    std::vector<double> samples;
    for (const auto& vals : per_window) samples.insert(samples.end(), vals.begin(), vals.end());

    double n = static_cast<double>(samples.size());
    double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
    double sq = 0.0;
    for (double s : samples) sq += (s - mean) * (s - mean);
    double sigma = samples.size() > 1 ? std::sqrt(sq / (n - 1.0)) : 0.0;
    if (sigma < WatermarkBook::kSigmaFloor) sigma = WatermarkBook::kSigmaFloor;
    return {mean, sigma};
}

WatermarkBook build_book(const PatchEncoderModel& model, const TokenTable& table,
                         const std::vector<TimeSeriesWindow>& corpus, int M, StatMode mode) {
    WatermarkBook book;
    book.cold_token_ids = mine_cold_tokens(model, table, corpus, M);
    auto [mu, sigma] = calibrate_stats(model, table, book.cold_token_ids, corpus, mode);
    book.mu = mu;
    book.sigma = sigma;
    book.stat_mode = mode;
    book.model_fingerprint = model.fingerprint;
    book.calibration_size = corpus.size();
    book.patch_len = model.patch_len();
    book.window_len = corpus.front().horizon.size();
    book.validate();
    return book;
}

void save_book(const std::string& path, const WatermarkBook& book) {
    book.validate();
    json j{{"cold_token_ids", book.cold_token_ids},
           {"mu", book.mu},
           {"sigma", book.sigma},
           {"stat_mode", to_string(book.stat_mode)},
           {"model_fingerprint", book.model_fingerprint},
           {"calibration_size", book.calibration_size},
           {"M", book.cold_token_ids.size()},
           {"patching",
            json{{"mode", "disjoint"}, {"patch_len", book.patch_len}, {"window_len", book.window_len}}}};
    detail::write_file(path, j.dump(2) + "\n");
}

WatermarkBook load_book(const std::string& path) {
    json j;
    try {
        j = json::parse(detail::read_file(path));
    } catch (const json::exception& e) {
        throw DataError("invalid book JSON in " + path + ": " + e.what());
    }
    try {
        WatermarkBook book;
        book.cold_token_ids = j.at("cold_token_ids").get<std::vector<int>>();
        book.mu = j.at("mu").get<double>();
        book.sigma = j.at("sigma").get<double>();
        book.stat_mode = stat_mode_from_string(j.at("stat_mode").get<std::string>());
        book.model_fingerprint = j.at("model_fingerprint").get<std::string>();
        book.calibration_size = j.at("calibration_size").get<std::size_t>();
        const json& patching = j.at("patching");
        if (patching.at("mode").get<std::string>() != "disjoint")
            throw DataError("unsupported patching mode in book file " + path);
        book.patch_len = patching.at("patch_len").get<int>();
        book.window_len = patching.at("window_len").get<std::size_t>();
        if (j.at("M").get<std::size_t>() != book.cold_token_ids.size())
            throw DataError("book file M disagrees with cold_token_ids length in " + path);
        book.validate();
        return book;
    } catch (const json::exception& e) {
        throw DataError("book schema error in " + path + ": " + e.what());
    }
}

void verify_book_model(const WatermarkBook& book, const PatchEncoderModel& model) {
    if (book.model_fingerprint != model.fingerprint)
        throw DataError("watermark book fingerprint " + book.model_fingerprint +
                        " does not match encoder fingerprint " + model.fingerprint +
                        "; detection with the wrong encoder is meaningless");
    if (book.patch_len != model.patch_len())
        throw DataError("watermark book patch convention (P=" + std::to_string(book.patch_len) +
                        ") does not match encoder patch length " +
                        std::to_string(model.patch_len()));
}

} // namespace tsmark

#include "tsmark/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numbers>

#include <json.hpp>

#include "internal_io.hpp"
#include "tsmark/detector.hpp"
#include "tsmark/parallel.hpp"

namespace tsmark {

using nlohmann::json;

std::string to_string(FswStartRule rule) {
    return rule == FswStartRule::fixed ? "fixed" : "max_energy";
}

FswStartRule fsw_start_rule_from_string(const std::string& s) {
    if (s == "fixed") return FswStartRule::fixed;
    if (s == "max_energy") return FswStartRule::max_energy;
    throw ConfigError("unknown FSW start rule: " + s);
}

void FswConfig::validate() const {
    if (amplitude < 0.0) throw ConfigError("FSW amplitude must be >= 0");
    if (period < 2) throw ConfigError("FSW period must be >= 2 samples");
    if (segment_len < 1) throw ConfigError("FSW segment_len must be >= 1");
}

namespace {

double sine_template(const FswConfig& cfg, std::size_t t) {
    return cfg.amplitude *
           std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / cfg.period);
}

std::size_t choose_start(const std::vector<double>& horizon, const FswConfig& cfg) {
    std::size_t seg = static_cast<std::size_t>(cfg.segment_len);
    if (cfg.start_rule == FswStartRule::fixed) {
        if (cfg.fixed_start + seg > horizon.size())
            throw ConfigError("FSW fixed segment exceeds the horizon");
        return cfg.fixed_start;
    }
    // max_energy: the segment with the largest sum of squares.
    std::size_t best = 0;
    double best_energy = -1.0;
    for (std::size_t s = 0; s + seg <= horizon.size(); ++s) {
        double e = 0.0;
        for (std::size_t t = 0; t < seg; ++t) e += horizon[s + t] * horizon[s + t];
        if (e > best_energy) {
            best_energy = e;
            best = s;
        }
    }
    return best;
}

} // namespace

std::vector<double> fsw_embed(const std::vector<double>& horizon, const FswConfig& cfg) {
    cfg.validate();
    if (static_cast<std::size_t>(cfg.segment_len) > horizon.size())
        throw DataError("FSW segment longer than the horizon");
    std::size_t start = choose_start(horizon, cfg);
    std::vector<double> out = horizon;
    for (std::size_t t = 0; t < static_cast<std::size_t>(cfg.segment_len); ++t)
        out[start + t] += sine_template(cfg, t);
    return out;
}

FswDetection fsw_detect(const std::vector<double>& candidate, const FswConfig& cfg,
                        double threshold) {
    cfg.validate();
    std::size_t seg = static_cast<std::size_t>(cfg.segment_len);
    if (candidate.size() < seg) throw DataError("series shorter than FSW segment");

    std::vector<double> tmpl(seg);
    double tmpl_mean = 0.0;
    for (std::size_t t = 0; t < seg; ++t) {
        tmpl[t] = sine_template(cfg, t);
        tmpl_mean += tmpl[t];
    }
    tmpl_mean /= static_cast<double>(seg);
    double tmpl_norm = 0.0;
    for (std::size_t t = 0; t < seg; ++t) {
        tmpl[t] -= tmpl_mean;
        tmpl_norm += tmpl[t] * tmpl[t];
    }
    tmpl_norm = std::sqrt(tmpl_norm);

    FswDetection det;
    for (std::size_t s = 0; s + seg <= candidate.size(); ++s) {
        double mean = 0.0;
        for (std::size_t t = 0; t < seg; ++t) mean += candidate[s + t];
        mean /= static_cast<double>(seg);
        double dot = 0.0, norm_sq = 0.0;
        for (std::size_t t = 0; t < seg; ++t) {
            double c = candidate[s + t] - mean;
            dot += c * tmpl[t];
            norm_sq += c * c;
        }
        double denom = std::sqrt(norm_sq) * tmpl_norm;
        double corr = denom < kCosineNormFloor ? 0.0 : dot / denom;
        if (corr > det.max_correlation || s == 0) {
            det.max_correlation = corr;
            det.best_offset = s;
        }
    }
    det.decision = det.max_correlation > threshold;
    return det;
}

std::vector<double> LinearForecaster::predict(const std::vector<double>& history) const {
    if (history.size() != static_cast<std::size_t>(weights.cols()))
        throw DataError("history length does not match forecaster input size");
    Eigen::Map<const Eigen::VectorXd> h(history.data(), weights.cols());
    Eigen::VectorXd y = weights * h + intercept;
    return std::vector<double>(y.data(), y.data() + y.size());
}

LinearForecaster distill_train(const std::vector<TimeSeriesWindow>& pairs, double reg) {
    if (pairs.empty()) throw DataError("distill_train: empty training set");
    if (reg < 0.0) throw ConfigError("distill_train: reg must be >= 0");
    std::size_t k = pairs.front().history.size();
    std::size_t l = pairs.front().horizon.size();
    for (const auto& w : pairs)
        if (w.history.size() != k || w.horizon.size() != l)
            throw DataError("distill_train: inconsistent window lengths");
    if (pairs.size() < k + l)
        std::cerr << "tsmark: warning: distilling from only " << pairs.size()
                  << " pairs; recommend at least " << (k + l) << "\n";

    // Normal equations over augmented inputs [h; 1]; the intercept column
    // is not regularized. Accumulated in index order for determinism.
    Eigen::Index n = static_cast<Eigen::Index>(k) + 1;
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(n, n);
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(l));
    Eigen::VectorXd x(n);
    for (const auto& w : pairs) {
        for (std::size_t i = 0; i < k; ++i) x(static_cast<Eigen::Index>(i)) = w.history[i];
        x(n - 1) = 1.0;
        gram.noalias() += x * x.transpose();
        rhs.noalias() += x * Eigen::Map<const Eigen::VectorXd>(w.horizon.data(),
                                                               static_cast<Eigen::Index>(l))
                                 .transpose();
    }
    for (Eigen::Index i = 0; i + 1 < n; ++i) gram(i, i) += reg;

    Eigen::MatrixXd solution; // n x L, rows = [A^T; c^T]
    if (reg == 0.0) {
        Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
        if (!lu.isInvertible())
            throw NumericError(
                "distill_train: singular normal equations with reg = 0; use reg > 0");
        solution = lu.solve(rhs);
    } else {
        solution = Eigen::LDLT<Eigen::MatrixXd>(gram).solve(rhs);
    }
    if (!solution.allFinite()) throw NumericError("distill_train: non-finite solution");

    LinearForecaster f;
    f.weights = solution.topRows(n - 1).transpose();
    f.intercept = solution.row(n - 1).transpose();
    return f;
}

TraceabilityReport distill_and_probe(const PatchEncoderModel& model, const TokenTable& table,
                                     const WatermarkBook& book,
                                     const std::vector<TimeSeriesWindow>& train,
                                     const std::vector<TimeSeriesWindow>& test,
                                     const EmbedConfig& embed_cfg, double gamma, double ridge) {
    verify_book_model(book, model);
    if (train.empty() || test.empty())
        throw DataError("distill_and_probe: train and test sets must be non-empty");

    // Watermark every training horizon, as the adversary would receive it.
    std::vector<TimeSeriesWindow> train_wm(train.size());
    parallel_for(train.size(), [&](std::size_t i) {
        train_wm[i] = train[i];
        train_wm[i].horizon = embed(train[i].horizon, model, table, book, embed_cfg).horizon;
    });

    LinearForecaster student = distill_train(train_wm, ridge);

    std::vector<char> distilled_pos(test.size()), clean_pos(test.size()), wm_pos(test.size());
    parallel_for(test.size(), [&](std::size_t i) {
        auto predicted = student.predict(test[i].history);
        distilled_pos[i] = detect_zscore(predicted, model, table, book, gamma).decision ? 1 : 0;
        clean_pos[i] = detect_zscore(test[i].horizon, model, table, book, gamma).decision ? 1 : 0;
        auto wm = embed(test[i].horizon, model, table, book, embed_cfg).horizon;
        wm_pos[i] = detect_zscore(wm, model, table, book, gamma).decision ? 1 : 0;
    });

    auto rate = [](const std::vector<char>& v) {
        std::size_t hits = 0;
        for (char c : v) hits += static_cast<std::size_t>(c);
        return static_cast<double>(hits) / static_cast<double>(v.size());
    };

    TraceabilityReport report;
    report.distilled_positive_rate = rate(distilled_pos);
    report.clean_positive_rate = rate(clean_pos);
    report.watermarked_positive_rate = rate(wm_pos);
    report.n_train = train.size();
    report.n_test = test.size();
    report.gamma = gamma;
    report.ridge = ridge;
    report.embed_config = embed_cfg;
    return report;
}

std::string traceability_to_json(const TraceabilityReport& report) {
    json j{{"distilled_positive_rate", report.distilled_positive_rate},
           {"clean_positive_rate", report.clean_positive_rate},
           {"watermarked_positive_rate", report.watermarked_positive_rate},
           {"n_train", report.n_train},
           {"n_test", report.n_test},
           {"gamma", report.gamma},
           {"ridge", report.ridge},
           {"embed_config",
            json{{"alpha", report.embed_config.alpha},
                 {"eta", report.embed_config.eta},
                 {"step", report.embed_config.step},
                 {"iters", report.embed_config.iters},
                 {"optimizer", to_string(report.embed_config.optimizer)},
                 {"lambda_soft", report.embed_config.lambda_soft},
                 {"mode", to_string(report.embed_config.mode)}}}};
    return j.dump(2) + "\n";
}

void save_traceability(const std::string& path, const TraceabilityReport& report) {
    detail::write_file(path, traceability_to_json(report));
}

} // namespace tsmark

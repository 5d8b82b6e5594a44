#include "tsmark/metrics.hpp"

#include <cmath>
#include <cstddef>

namespace tsmark {

namespace {

void check_pair(std::size_t a, std::size_t b) {
    if (a != b) throw DataError("metric input length mismatch");
    if (a == 0) throw DataError("metric input is empty");
}

} // namespace

double mse(const std::vector<double>& pred, const std::vector<double>& truth) {
    check_pair(pred.size(), truth.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        double d = pred[i] - truth[i];
        acc += d * d;
    }
    return acc / static_cast<double>(pred.size());
}

double mae(const std::vector<double>& pred, const std::vector<double>& truth) {
    check_pair(pred.size(), truth.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) acc += std::abs(pred[i] - truth[i]);
    return acc / static_cast<double>(pred.size());
}

double mse(const std::vector<std::vector<double>>& pred,
           const std::vector<std::vector<double>>& truth) {
    check_pair(pred.size(), truth.size());
    double acc = 0.0;
    std::size_t n = 0;
    for (std::size_t w = 0; w < pred.size(); ++w) {
        check_pair(pred[w].size(), truth[w].size());
        for (std::size_t i = 0; i < pred[w].size(); ++i) {
            double d = pred[w][i] - truth[w][i];
            acc += d * d;
        }
        n += pred[w].size();
    }
    return acc / static_cast<double>(n);
}

double mae(const std::vector<std::vector<double>>& pred,
           const std::vector<std::vector<double>>& truth) {
    check_pair(pred.size(), truth.size());
    double acc = 0.0;
    std::size_t n = 0;
    for (std::size_t w = 0; w < pred.size(); ++w) {
        check_pair(pred[w].size(), truth[w].size());
        for (std::size_t i = 0; i < pred[w].size(); ++i) acc += std::abs(pred[w][i] - truth[w][i]);
        n += pred[w].size();
    }
    return acc / static_cast<double>(n);
}

F1Result f1_score(const std::vector<bool>& decisions, const std::vector<bool>& labels) {
    check_pair(decisions.size(), labels.size());
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < decisions.size(); ++i) {
        if (decisions[i] && labels[i]) ++tp;
        if (decisions[i] && !labels[i]) ++fp;
        if (!decisions[i] && labels[i]) ++fn;
    }
    F1Result r;
    r.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    r.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    r.f1 = r.precision + r.recall > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
                                        : 0.0;
    return r;
}

RatioResult f1_over_delta_mse(double f1, double mse_wm, double mse_clean) {
    if (mse_wm < mse_clean - 1e-12)
        throw DataError("f1_over_delta_mse: watermarked MSE below clean MSE");
    RatioResult r;
    double delta = mse_wm - mse_clean;
    if (delta <= 1e-12) {
        r.unbounded = true;
        return r;
    }
    r.value = f1 / delta;
    return r;
}

} // namespace tsmark

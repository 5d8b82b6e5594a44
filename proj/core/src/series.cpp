#include "tsmark/series.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <random>
#include <sstream>

#include <json.hpp>

#include "internal_io.hpp"

namespace tsmark {

using nlohmann::json;

void PatchConfig::validate() const {
    if (patch_len < 1) throw ConfigError("patch_len must be >= 1");
    if (stride < 1 || stride > patch_len)
        throw ConfigError("stride must satisfy 1 <= stride <= patch_len");
}

void TimeSeriesWindow::validate() const {
    if (history.empty() || horizon.empty())
        throw DataError("window history and horizon must be non-empty");
    for (double v : history)
        if (!std::isfinite(v)) throw DataError("non-finite sample in window history");
    for (double v : horizon)
        if (!std::isfinite(v)) throw DataError("non-finite sample in window horizon");
}

std::size_t patch_count(std::size_t n, const PatchConfig& cfg) {
    cfg.validate();
    if (n < static_cast<std::size_t>(cfg.patch_len))
        throw DataError("series shorter than patch length");
    std::size_t p = static_cast<std::size_t>(cfg.patch_len);
    std::size_t s = static_cast<std::size_t>(cfg.stride);
    return (n - p + s - 1) / s + 1; // ceil((n-P)/S) + 1
}

std::vector<Patch> patchify(const std::vector<double>& values, const PatchConfig& cfg) {
    std::size_t n = values.size();
    std::size_t count = patch_count(n, cfg);
    std::size_t p = static_cast<std::size_t>(cfg.patch_len);
    std::size_t s = static_cast<std::size_t>(cfg.stride);

    std::vector<Patch> patches(count);
    for (std::size_t j = 0; j < count; ++j) {
        Patch& patch = patches[j];
        patch.begin = j * s;
        patch.end = std::min(patch.begin + p, n);
        patch.values.resize(p);
        for (std::size_t t = 0; t < p; ++t) {
            std::size_t idx = patch.begin + t;
            patch.values[t] = idx < n ? values[idx] : values[n - 1];
        }
    }
    return patches;
}

std::vector<double> normalize(const std::vector<double>& values, const NormStats& stats) {
    std::vector<double> out(values.size());
    double s = stats.floored_std();
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - stats.mean) / s;
    return out;
}

std::vector<double> denormalize(const std::vector<double>& values, const NormStats& stats) {
    std::vector<double> out(values.size());
    double s = stats.floored_std();
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = values[i] * s + stats.mean;
    return out;
}

TimeSeriesWindow normalize(const TimeSeriesWindow& window, const NormStats& stats) {
    TimeSeriesWindow out = window;
    out.history = normalize(window.history, stats);
    out.horizon = normalize(window.horizon, stats);
    return out;
}

TimeSeriesWindow denormalize(const TimeSeriesWindow& window, const NormStats& stats) {
    TimeSeriesWindow out = window;
    out.history = denormalize(window.history, stats);
    out.horizon = denormalize(window.horizon, stats);
    return out;
}

NormStats compute_stats(const std::vector<TimeSeriesWindow>& windows) {
    if (windows.empty()) throw DataError("cannot compute stats on an empty corpus");
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& w : windows) {
        for (double v : w.history) sum += v;
        for (double v : w.horizon) sum += v;
        n += w.history.size() + w.horizon.size();
    }
    double mean = sum / static_cast<double>(n);
    double sq = 0.0;
    for (const auto& w : windows) {
        for (double v : w.history) sq += (v - mean) * (v - mean);
        for (double v : w.horizon) sq += (v - mean) * (v - mean);
    }
    NormStats stats;
    stats.mean = mean;
    stats.std_dev = std::sqrt(sq / static_cast<double>(n));
    if (stats.std_dev < NormStats::kStdFloor) stats.std_dev = NormStats::kStdFloor;
    return stats;
}

void SyntheticConfig::validate() const {
    if (sinusoids_min < 1 || sinusoids_max < sinusoids_min)
        throw ConfigError("sinusoid count range invalid");
    if (period_min < 2.0 || period_max < period_min)
        throw ConfigError("period range invalid (need 2 <= min <= max)");
    if (amplitude_min < 0.0 || amplitude_max < amplitude_min)
        throw ConfigError("amplitude range invalid");
    if (trend_slope_max < 0.0) throw ConfigError("trend_slope_max must be >= 0");
    if (level_max < 0.0) throw ConfigError("level_max must be >= 0");
    if (noise_std < 0.0) throw ConfigError("noise_std must be >= 0");
}

Dataset generate_synthetic_dataset(std::uint64_t seed, std::size_t n_windows,
                                   std::size_t history_len, std::size_t horizon_len,
                                   const SyntheticConfig& cfg) {
    cfg.validate();
    if (n_windows < 1) throw ConfigError("n_windows must be >= 1");
    if (history_len < 1 || horizon_len < 1)
        throw ConfigError("history and horizon lengths must be >= 1");

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> sin_count(cfg.sinusoids_min, cfg.sinusoids_max);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    Dataset ds;
    ds.seed = seed;
    ds.history_len = history_len;
    ds.horizon_len = horizon_len;
    ds.components = cfg;
    ds.windows.resize(n_windows);

    std::size_t total = history_len + horizon_len;
    for (std::size_t w = 0; w < n_windows; ++w) {
        int ns = sin_count(rng);
        double level = cfg.level_max > 0.0 ? (2.0 * unit(rng) - 1.0) * cfg.level_max : 0.0;
        double slope =
            cfg.trend_slope_max > 0.0 ? (2.0 * unit(rng) - 1.0) * cfg.trend_slope_max : 0.0;

        std::vector<double> amp(ns), period(ns), phase(ns);
        for (int k = 0; k < ns; ++k) {
            amp[k] = cfg.amplitude_min + unit(rng) * (cfg.amplitude_max - cfg.amplitude_min);
            period[k] = cfg.period_min + unit(rng) * (cfg.period_max - cfg.period_min);
            phase[k] = unit(rng) * 2.0 * std::numbers::pi;
        }

        std::vector<double> values(total);
        for (std::size_t t = 0; t < total; ++t) {
            double v = level + slope * static_cast<double>(t);
            for (int k = 0; k < ns; ++k)
                v += amp[k] * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / period[k] +
                                       phase[k]);
            if (cfg.noise_std > 0.0) v += cfg.noise_std * gauss(rng);
            values[t] = v;
        }

        TimeSeriesWindow& win = ds.windows[w];
        win.history.assign(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(history_len));
        win.horizon.assign(values.begin() + static_cast<std::ptrdiff_t>(history_len), values.end());
        win.channel_id = static_cast<int>(w);
        win.origin_index = static_cast<std::int64_t>(history_len);
    }

    ds.stats = compute_stats(ds.windows);
    return ds;
}

namespace {

json synthetic_config_to_json(const SyntheticConfig& c) {
    return json{{"sinusoids_min", c.sinusoids_min},
                {"sinusoids_max", c.sinusoids_max},
                {"period_min", c.period_min},
                {"period_max", c.period_max},
                {"amplitude_min", c.amplitude_min},
                {"amplitude_max", c.amplitude_max},
                {"trend_slope_max", c.trend_slope_max},
                {"level_max", c.level_max},
                {"noise_std", c.noise_std}};
}

SyntheticConfig synthetic_config_from_json(const json& j) {
    SyntheticConfig c;
    c.sinusoids_min = j.at("sinusoids_min").get<int>();
    c.sinusoids_max = j.at("sinusoids_max").get<int>();
    c.period_min = j.at("period_min").get<double>();
    c.period_max = j.at("period_max").get<double>();
    c.amplitude_min = j.at("amplitude_min").get<double>();
    c.amplitude_max = j.at("amplitude_max").get<double>();
    c.trend_slope_max = j.at("trend_slope_max").get<double>();
    c.level_max = j.at("level_max").get<double>();
    c.noise_std = j.at("noise_std").get<double>();
    return c;
}

} // namespace

void save_dataset(const std::string& path, const Dataset& dataset) {
    json windows = json::array();
    for (const auto& w : dataset.windows) {
        windows.push_back(json{{"channel_id", w.channel_id},
                               {"origin_index", w.origin_index},
                               {"history", w.history},
                               {"horizon", w.horizon}});
    }
    json j{{"manifest",
            json{{"seed", dataset.seed},
                 {"K", dataset.history_len},
                 {"L", dataset.horizon_len},
                 {"n_windows", dataset.windows.size()},
                 {"components", synthetic_config_to_json(dataset.components)},
                 {"norm_stats", json{{"mean", dataset.stats.mean}, {"std", dataset.stats.std_dev}}}}},
           {"windows", windows}};
    detail::write_file(path, j.dump(2) + "\n");
}

Dataset load_dataset(const std::string& path) {
    json j;
    try {
        j = json::parse(detail::read_file(path));
    } catch (const json::exception& e) {
        throw DataError("invalid dataset JSON in " + path + ": " + e.what());
    }
    try {
        Dataset ds;
        const json& m = j.at("manifest");
        ds.seed = m.at("seed").get<std::uint64_t>();
        ds.history_len = m.at("K").get<std::size_t>();
        ds.horizon_len = m.at("L").get<std::size_t>();
        ds.components = synthetic_config_from_json(m.at("components"));
        ds.stats.mean = m.at("norm_stats").at("mean").get<double>();
        ds.stats.std_dev = m.at("norm_stats").at("std").get<double>();
        for (const auto& wj : j.at("windows")) {
            TimeSeriesWindow w;
            w.channel_id = wj.at("channel_id").get<int>();
            w.origin_index = wj.at("origin_index").get<std::int64_t>();
            w.history = wj.at("history").get<std::vector<double>>();
            w.horizon = wj.at("horizon").get<std::vector<double>>();
            w.validate();
            ds.windows.push_back(std::move(w));
        }
        return ds;
    } catch (const json::exception& e) {
        throw DataError("dataset schema error in " + path + ": " + e.what());
    }
}

std::vector<std::vector<double>> load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open file: " + path);

    std::string line;
    std::size_t line_no = 0;
    std::size_t n_cols = 0;
    std::vector<std::vector<double>> channels;

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line_no == 1) {
            n_cols = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
            if (n_cols < 2)
                throw DataError("CSV needs a timestamp column plus at least one channel (line 1)");
            channels.resize(n_cols - 1);
            continue;
        }
        if (line.empty()) continue;

        std::size_t col = 0;
        std::size_t pos = 0;
        while (true) {
            std::size_t next = line.find(',', pos);
            std::string cell = line.substr(pos, next == std::string::npos ? next : next - pos);
            if (col >= n_cols)
                throw DataError("ragged CSV row: extra column at line " + std::to_string(line_no));
            if (col > 0) { // first column is the timestamp, ignored
                char* endp = nullptr;
                const char* c = cell.c_str();
                double v = std::strtod(c, &endp);
                while (endp && *endp == ' ') ++endp;
                if (cell.empty() || endp == c || (endp && *endp != '\0'))
                    throw DataError("non-numeric cell '" + cell + "' at line " +
                                    std::to_string(line_no));
                channels[col - 1].push_back(v);
            }
            ++col;
            if (next == std::string::npos) break;
            pos = next + 1;
        }
        if (col != n_cols)
            throw DataError("ragged CSV row: expected " + std::to_string(n_cols) +
                            " columns, got " + std::to_string(col) + " at line " +
                            std::to_string(line_no));
    }
    if (line_no == 0) throw DataError("empty CSV file: " + path);
    return channels;
}

void save_csv(const std::string& path, const std::vector<std::vector<double>>& channels) {
    if (channels.empty()) throw DataError("cannot save CSV with no channels");
    std::size_t n = channels.front().size();
    for (const auto& ch : channels)
        if (ch.size() != n) throw DataError("cannot save CSV: channels differ in length");

    std::ostringstream out;
    out << "timestamp";
    for (std::size_t c = 0; c < channels.size(); ++c) out << ",ch" << c;
    out << "\n";
    for (std::size_t t = 0; t < n; ++t) {
        out << t;
        for (const auto& ch : channels) out << ',' << detail::format_double(ch[t]);
        out << "\n";
    }
    detail::write_file(path, out.str());
}

} // namespace tsmark

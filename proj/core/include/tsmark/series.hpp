#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "tsmark/errors.hpp"

namespace tsmark {

/// Patch geometry: a series is cut into windows of patch_len samples taken
/// every stride samples. stride > patch_len would drop samples and is
/// rejected.
struct PatchConfig {
    int patch_len = 16;
    int stride = 16;

    void validate() const;
};

/// Per-channel z-normalization statistics. The std is floored so constant
/// channels normalize to zero instead of blowing up.
struct NormStats {
    static constexpr double kStdFloor = 1e-8;

    double mean = 0.0;
    double std_dev = 1.0;

    double floored_std() const { return std_dev < kStdFloor ? kStdFloor : std_dev; }
};

/// One forecasting instance: an observed history and the horizon that
/// follows it, contiguous in the source series (horizon starts at
/// origin_index).
struct TimeSeriesWindow {
    std::vector<double> history;
    std::vector<double> horizon;
    int channel_id = 0;
    std::int64_t origin_index = 0;

    void validate() const;
};

/// A patch plus the index range it covers in the unpadded series.
/// end - begin is less than values.size() exactly when the tail was padded
/// by repeating the last observed value.
struct Patch {
    std::vector<double> values;
    std::size_t begin = 0;
    std::size_t end = 0;
};

/// Number of patches produced for a series of length n: ceil((n-P)/S) + 1.
std::size_t patch_count(std::size_t n, const PatchConfig& cfg);

/// Cuts values into patch_count patches. Patch j covers [j*stride,
/// j*stride + patch_len); if the final patch overruns, the input is
/// right-padded with its last value. Throws DataError when n < patch_len.
std::vector<Patch> patchify(const std::vector<double>& values, const PatchConfig& cfg);

std::vector<double> normalize(const std::vector<double>& values, const NormStats& stats);
std::vector<double> denormalize(const std::vector<double>& values, const NormStats& stats);
TimeSeriesWindow normalize(const TimeSeriesWindow& window, const NormStats& stats);
TimeSeriesWindow denormalize(const TimeSeriesWindow& window, const NormStats& stats);

/// Computes z-normalization statistics over every sample (history and
/// horizon) of the given windows.
NormStats compute_stats(const std::vector<TimeSeriesWindow>& windows);

/// Shape of the synthetic windows: each is a sum of random sinusoids, a
/// linear trend, a constant level, and Gaussian noise.
struct SyntheticConfig {
    int sinusoids_min = 2;
    int sinusoids_max = 4;
    double period_min = 24.0;
    double period_max = 96.0;
    double amplitude_min = 0.5;
    double amplitude_max = 1.5;
    double trend_slope_max = 0.01;
    double level_max = 1.0;
    double noise_std = 0.05;

    void validate() const;
};

struct Dataset {
    std::uint64_t seed = 0;
    std::size_t history_len = 0;
    std::size_t horizon_len = 0;
    SyntheticConfig components;
    std::vector<TimeSeriesWindow> windows;
    NormStats stats;
};

/// Deterministic in seed: the same arguments always produce the same
/// dataset, bit for bit.
Dataset generate_synthetic_dataset(std::uint64_t seed, std::size_t n_windows,
                                   std::size_t history_len, std::size_t horizon_len,
                                   const SyntheticConfig& cfg = {});

/// Dataset file: JSON {manifest: {seed, K, L, n_windows, components,
/// norm_stats}, windows: [...]}. Round-trips exactly.
void save_dataset(const std::string& path, const Dataset& dataset);
Dataset load_dataset(const std::string& path);

/// CSV with a header row; the first column is a timestamp (ignored by the
/// math), remaining columns are channels. Parse errors name the 1-based
/// file line.
std::vector<std::vector<double>> load_csv(const std::string& path);
void save_csv(const std::string& path, const std::vector<std::vector<double>>& channels);

} // namespace tsmark

#pragma once

// Learning-curve emitter: raw per-episode train returns and their trailing
// moving average, written as a standalone SVG file.

#include <filesystem>
#include <vector>

namespace cgrl {

/// Trailing mean over the last `window` values (fewer at the start).
std::vector<double> moving_average(const std::vector<double>& values, int window);

/// max(1, round(fraction * n)).
int smoothing_window(std::size_t n, double fraction);

/// Throws InvalidInput when the metrics file has no rows.
void emit_plot(const std::filesystem::path& metrics_path, const std::filesystem::path& svg_path,
               double window_fraction = 0.025);

}  // namespace cgrl

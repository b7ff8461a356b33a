#pragma once

// Per-episode training metrics as comma-separated text with a fixed header.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

namespace cgrl {

struct MetricsRow {
  long iteration = 0;  // primitive environment steps so far
  long episode = 0;
  std::string mode;
  double train_return = 0.0;
  std::optional<double> eval_return;   // only on rows where an evaluation ran
  std::optional<double> success_rate;
  std::optional<double> selector_accuracy;
  std::vector<long> choice_histogram;  // evaluator choices this episode, by node id
  double penalties_total = 0.0;
  double wall_ms = 0.0;
};

std::string metrics_header(const std::vector<std::string>& node_names);
std::string format_metrics_row(const MetricsRow& row);

/// Appends rows to a CSV file, flushing after every row.
class MetricsWriter {
 public:
  MetricsWriter(const std::filesystem::path& path, const std::vector<std::string>& node_names);
  void append(const MetricsRow& row);

 private:
  std::ofstream out_;
  std::size_t columns_;
  long last_iteration_ = 0;
};

/// Throws InvalidInput on a malformed file.
std::vector<MetricsRow> read_metrics(const std::filesystem::path& path);

}  // namespace cgrl

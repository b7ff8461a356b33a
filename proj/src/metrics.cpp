#include "cgrl/metrics.hpp"

#include <boost/algorithm/string.hpp>

#include <cmath>
#include <cstdio>

#include "cgrl/errors.hpp"

namespace cgrl {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

std::optional<double> opt(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return std::stod(s);
}

}  // namespace

std::string metrics_header(const std::vector<std::string>& node_names) {
  std::string h = "iteration,episode,mode,train_return,eval_return,success_rate,selector_accuracy";
  for (const auto& n : node_names) h += ",choice_" + n;
  h += ",penalties_total,wall_ms";
  return h;
}

std::string format_metrics_row(const MetricsRow& r) {
  std::string line = std::to_string(r.iteration) + "," + std::to_string(r.episode) + "," + r.mode +
                     "," + fmt(r.train_return) + "," + fmt(r.eval_return) + "," +
                     fmt(r.success_rate) + "," + fmt(r.selector_accuracy);
  for (long c : r.choice_histogram) line += "," + std::to_string(c);
  line += "," + fmt(r.penalties_total) + "," + fmt(r.wall_ms);
  return line;
}

MetricsWriter::MetricsWriter(const std::filesystem::path& path,
                             const std::vector<std::string>& node_names)
    : out_(path, std::ios::trunc), columns_(node_names.size()) {
  if (!out_) throw InvalidInput("cannot open metrics file " + path.string());
  out_ << metrics_header(node_names) << '\n';
  out_.flush();
}

void MetricsWriter::append(const MetricsRow& row) {
  if (row.choice_histogram.size() != columns_)
    throw InvalidInput("metrics row has the wrong number of choice columns");
  if (row.iteration < last_iteration_) throw InvalidInput("metrics iterations must not decrease");
  for (double v : {row.train_return, row.penalties_total, row.eval_return.value_or(0.0),
                   row.success_rate.value_or(0.0), row.selector_accuracy.value_or(0.0)})
    if (!std::isfinite(v)) throw NonFiniteError("non-finite metric at iteration " +
                                                std::to_string(row.iteration));
  last_iteration_ = row.iteration;
  out_ << format_metrics_row(row) << '\n';
  out_.flush();
}

std::vector<MetricsRow> read_metrics(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("metrics file not found: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw InvalidInput("metrics file is empty");
  std::vector<std::string> header;
  boost::split(header, line, boost::is_any_of(","));
  if (header.size() < 9 || header[0] != "iteration" || header[3] != "train_return")
    throw InvalidInput("metrics file has an unexpected header");
  const std::size_t n_choice = header.size() - 9;
  std::vector<MetricsRow> rows;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    boost::split(f, line, boost::is_any_of(","));
    if (f.size() != header.size())
      throw InvalidInput("metrics line " + std::to_string(line_no) + " has " +
                         std::to_string(f.size()) + " fields, expected " +
                         std::to_string(header.size()));
    try {
      MetricsRow r;
      r.iteration = std::stol(f[0]);
      r.episode = std::stol(f[1]);
      r.mode = f[2];
      r.train_return = std::stod(f[3]);
      r.eval_return = opt(f[4]);
      r.success_rate = opt(f[5]);
      r.selector_accuracy = opt(f[6]);
      for (std::size_t i = 0; i < n_choice; ++i) r.choice_histogram.push_back(std::stol(f[7 + i]));
      r.penalties_total = std::stod(f[7 + n_choice]);
      r.wall_ms = std::stod(f[8 + n_choice]);
      rows.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw InvalidInput("metrics line " + std::to_string(line_no) + " does not parse");
    }
  }
  return rows;
}

}  // namespace cgrl

#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "sagin/experiment.hpp"

namespace sagin {

class ReportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class PlotMetric { Throughput, LossRate, MeanDelay };

std::string to_string(PlotMetric m);

// Header plus one line per row in canonical order; throughput as integer bit/s,
// loss rate and delay with 6 decimals.
std::string emit_csv(const SweepResult& result);
void write_csv(const SweepResult& result, const std::filesystem::path& path);
SweepResult parse_csv(const std::string& text);

// Standalone SVG: one polyline per policy (mean over seeds), y axis from 0 to
// the largest plotted value. Needs at least two distinct source counts.
std::string emit_plot(const SweepResult& result, PlotMetric metric);
void write_plot(const SweepResult& result, PlotMetric metric, const std::filesystem::path& path);

}  // namespace sagin

#include "sagin/report.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>

namespace sagin {

std::string to_string(PlotMetric m) {
  switch (m) {
    case PlotMetric::Throughput: return "throughput";
    case PlotMetric::LossRate: return "loss_rate";
    case PlotMetric::MeanDelay: return "mean_delay";
  }
  return "?";
}

namespace {

constexpr const char* kHeader = "policy,n_sources,seed,throughput_bps,loss_rate,mean_delay_s";

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ReportError(fmt::format("cannot open {} for writing", path.string()));
  out << text;
  out.close();
  if (!out) throw ReportError(fmt::format("failed writing {}", path.string()));
}

template <class T>
T parse_number(const std::string& field, std::size_t line) {
  T v{};
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw ReportError(fmt::format("line {}: bad number '{}'", line, field));
  }
  return v;
}

}  // namespace

std::string emit_csv(const SweepResult& result) {
  if (result.rows.empty()) throw ReportError("no rows to write");
  auto rows = result.rows;
  std::sort(rows.begin(), rows.end(), row_less);
  std::string out = std::string(kHeader) + "\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{:.0f},{:.6f},{:.6f}\n", r.policy, r.n_sources, r.seed,
                       r.throughput_bps, r.loss_rate, r.mean_delay_s);
  }
  return out;
}

void write_csv(const SweepResult& result, const std::filesystem::path& path) {
  write_file(path, emit_csv(result));
}

SweepResult parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kHeader) throw ReportError("missing or unexpected CSV header");
  SweepResult result;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 6) throw ReportError(fmt::format("line {}: expected 6 fields", lineno));
    SweepRow r;
    r.policy = f[0];
    r.n_sources = parse_number<std::uint32_t>(f[1], lineno);
    r.seed = parse_number<std::uint64_t>(f[2], lineno);
    r.throughput_bps = parse_number<double>(f[3], lineno);
    r.loss_rate = parse_number<double>(f[4], lineno);
    r.mean_delay_s = parse_number<double>(f[5], lineno);
    result.rows.push_back(std::move(r));
  }
  return result;
}

namespace {

double metric_of(const SweepRow& r, PlotMetric m) {
  switch (m) {
    case PlotMetric::Throughput: return r.throughput_bps;
    case PlotMetric::LossRate: return r.loss_rate;
    case PlotMetric::MeanDelay: return r.mean_delay_s;
  }
  return 0.0;
}

std::string axis_label(PlotMetric m) {
  switch (m) {
    case PlotMetric::Throughput: return "network throughput (Gbps)";
    case PlotMetric::LossRate: return "packet loss rate";
    case PlotMetric::MeanDelay: return "mean delay (s)";
  }
  return "";
}

double display_scale(PlotMetric m) { return m == PlotMetric::Throughput ? 1e-9 : 1.0; }

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

}  // namespace

std::string emit_plot(const SweepResult& result, PlotMetric metric) {
  std::set<std::uint32_t> ns;
  // policy -> n -> (sum, count)
  std::map<std::string, std::map<std::uint32_t, std::pair<double, int>>> series;
  for (const auto& r : result.rows) {
    ns.insert(r.n_sources);
    auto& cell = series[r.policy][r.n_sources];
    cell.first += metric_of(r, metric) * display_scale(metric);
    cell.second += 1;
  }
  if (ns.size() < 2) throw ReportError("a plot needs at least two distinct source counts");

  double y_max = 0.0;
  for (const auto& [policy, pts] : series) {
    for (const auto& [n, acc] : pts) y_max = std::max(y_max, acc.first / acc.second);
  }
  if (y_max <= 0.0) y_max = 1.0;
  const double x_min = *ns.begin();
  const double x_max = *ns.rbegin();

  const double W = 640, H = 420, left = 80, right = 20, top = 30, bottom = 60;
  const double pw = W - left - right, ph = H - top - bottom;
  auto px = [&](double x) { return left + (x - x_min) / (x_max - x_min) * pw; };
  auto py = [&](double y) { return top + ph - y / y_max * ph; };

  std::string svg;
  svg += fmt::format(
      "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\">\n",
      W, H);
  svg += fmt::format("<rect x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"white\"/>\n", W, H);
  svg += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"black\"/>\n", left,
                     top + ph, left + pw);
  svg += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n", left, top,
                     top + ph);
  for (int i = 0; i <= 4; ++i) {
    const double y = y_max * i / 4;
    svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" font-size=\"11\" text-anchor=\"end\">{:.4g}</text>\n",
                       left - 6, py(y) + 4, y);
  }
  for (std::uint32_t n : ns) {
    svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
                       px(n), top + ph + 16, n);
  }
  svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" font-size=\"13\" text-anchor=\"middle\">number of source nodes</text>\n",
                     left + pw / 2, H - 14);
  svg += fmt::format(
      "<text x=\"16\" y=\"{0:.1f}\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 {0:.1f})\">{1}</text>\n",
      top + ph / 2, escape(axis_label(metric)));

  std::size_t k = 0;
  for (const auto& [policy, pts] : series) {
    const char* color = kColors[k % std::size(kColors)];
    std::string points;
    for (const auto& [n, acc] : pts) {
      if (!points.empty()) points += ' ';
      points += fmt::format("{:.2f},{:.2f}", px(n), py(acc.first / acc.second));
    }
    svg += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"2\" points=\"{}\"/>\n", color,
                       points);
    const double ly = top + 10 + 18 * k;
    svg += fmt::format("<line x1=\"{0:.1f}\" y1=\"{1:.1f}\" x2=\"{2:.1f}\" y2=\"{1:.1f}\" stroke=\"{3}\" stroke-width=\"2\"/>\n",
                       left + 12, ly, left + 32, color);
    svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" font-size=\"12\">{}</text>\n", left + 38, ly + 4,
                       escape(policy));
    ++k;
  }
  svg += "</svg>\n";
  return svg;
}

void write_plot(const SweepResult& result, PlotMetric metric, const std::filesystem::path& path) {
  write_file(path, emit_plot(result, metric));
}

}  // namespace sagin

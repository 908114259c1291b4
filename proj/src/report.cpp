// SPDX-License-Identifier: Apache-2.0
#include "ncd/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

namespace ncd::exp {

namespace fs = std::filesystem;

bool equivalent_size(const std::vector<double>& sizes, const std::vector<double>& accuracies, double accuracy,
                     double& size) {
  if (sizes.size() != accuracies.size()) throw Error(ErrorCode::kDimensionMismatch, "curve sizes and accuracies differ");
  if (sizes.size() == 1 && accuracies[0] == accuracy) {
    size = sizes[0];
    return true;
  }
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    const double a0 = accuracies[i], a1 = accuracies[i + 1];
    if (accuracy < std::min(a0, a1) || accuracy > std::max(a0, a1)) continue;
    const double t = a1 == a0 ? 0.0 : (accuracy - a0) / (a1 - a0);
    size = sizes[i] + t * (sizes[i + 1] - sizes[i]);
    return true;
  }
  return false;
}

namespace {

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(6) << v;
  return s.str();
}

std::string escape(const std::string& text) {
  std::string out;
  for (char c : text) {
    if (c == '&') out += "&amp;";
    else if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else out += c;
  }
  return out;
}

using Table = std::vector<std::map<std::string, double>>;

Table read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<std::string> header;
  for (std::stringstream ss(line); std::getline(ss, line, ',');) header.push_back(line);
  Table table;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::map<std::string, double> row;
    std::stringstream ss(line);
    std::string cell;
    for (std::size_t c = 0; std::getline(ss, cell, ','); ++c) {
      if (c >= header.size()) throw Error(ErrorCode::kParse, path.string() + ": too many columns");
      try {
        row[header[c]] = std::stod(cell);
      } catch (const std::exception&) {
        throw Error(ErrorCode::kParse, path.string() + ": bad number '" + cell + "'");
      }
    }
    table.push_back(std::move(row));
  }
  return table;
}

struct Stat {
  double mean = 0.0, ci95 = 0.0;
  std::size_t n = 0;
};

Stat stat(const std::vector<double>& values) {
  Stat s;
  s.n = values.size();
  if (values.empty()) return s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(s.n);
  if (s.n > 1) {
    double var = 0.0;
    for (double v : values) var += (v - s.mean) * (v - s.mean);
    var /= static_cast<double>(s.n - 1);
    s.ci95 = 1.96 * std::sqrt(var / static_cast<double>(s.n));
  }
  return s;
}

/// metric -> dataset size -> values over seeds
using Curves = std::map<std::string, std::map<double, std::vector<double>>>;

}  // namespace

std::string svg_plot(const std::string& title, const std::string& xLabel, const std::string& yLabel,
                     const std::vector<Series>& series) {
  constexpr double kWidth = 640, kHeight = 420, kLeft = 70, kRight = 150, kTop = 40, kBottom = 60;
  double xMin = INFINITY, xMax = -INFINITY, yMin = INFINITY, yMax = -INFINITY;
  for (const Series& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      xMin = std::min(xMin, s.x[i]);
      xMax = std::max(xMax, s.x[i]);
      yMin = std::min(yMin, s.y[i]);
      yMax = std::max(yMax, s.y[i]);
    }
  if (!std::isfinite(xMin)) xMin = 0, xMax = 1, yMin = 0, yMax = 1;
  if (xMax == xMin) xMin -= 0.5, xMax += 0.5;
  if (yMax == yMin) yMin -= 0.5, yMax += 0.5;
  const double pad = 0.05 * (yMax - yMin);
  yMin -= pad;
  yMax += pad;
  const double plotW = kWidth - kLeft - kRight, plotH = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - xMin) / (xMax - xMin) * plotW; };
  auto py = [&](double y) { return kTop + (1.0 - (y - yMin) / (yMax - yMin)) * plotH; };
  static const char* colours[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
      << "</text>\n"
      << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + plotH << "\" x2=\"" << kLeft + plotW << "\" y2=\""
      << kTop + plotH << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << kTop + plotH
      << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double xv = xMin + t * (xMax - xMin) / 4, yv = yMin + t * (yMax - yMin) / 4;
    svg << "<text x=\"" << px(xv) << "\" y=\"" << kTop + plotH + 18 << "\" text-anchor=\"middle\">" << fmt(xv)
        << "</text>\n"
        << "<text x=\"" << kLeft - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">" << fmt(yv) << "</text>\n"
        << "<line x1=\"" << kLeft << "\" y1=\"" << py(yv) << "\" x2=\"" << kLeft + plotW << "\" y2=\"" << py(yv)
        << "\" stroke=\"#dddddd\"/>\n";
  }
  svg << "<text x=\"" << kLeft + plotW / 2 << "\" y=\"" << kHeight - 15 << "\" text-anchor=\"middle\">"
      << escape(xLabel) << "</text>\n"
      << "<text transform=\"translate(18," << kTop + plotH / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
      << escape(yLabel) << "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const Series& s = series[k];
    const char* colour = colours[k % 6];
    svg << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) svg << (i ? " " : "") << px(s.x[i]) << ',' << py(s.y[i]);
    svg << "\"/>\n";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      svg << "<circle cx=\"" << px(s.x[i]) << "\" cy=\"" << py(s.y[i]) << "\" r=\"3\" fill=\"" << colour << "\"/>\n";
    const double ly = kTop + 10 + 18 * static_cast<double>(k);
    svg << "<line x1=\"" << kLeft + plotW + 12 << "\" y1=\"" << ly << "\" x2=\"" << kLeft + plotW + 32 << "\" y2=\""
        << ly << "\" stroke=\"" << colour << "\" stroke-width=\"2\"/>\n"
        << "<text x=\"" << kLeft + plotW + 38 << "\" y=\"" << ly + 4 << "\">" << escape(s.name) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void report(const std::vector<std::string>& runDirs, const std::string& outDir) {
  if (runDirs.empty()) throw Error(ErrorCode::kInvalidArgument, "report needs at least one run directory");
  fs::create_directories(outDir);

  std::map<std::string, Curves> curves;  // method -> curves
  std::map<std::string, std::vector<std::uint64_t>> seeds;
  for (const std::string& dir : runDirs) {
    const ExperimentConfig config = ExperimentConfig::load((fs::path(dir) / "config.txt").string());
    const std::string method = to_string(config.method);
    seeds[method].push_back(config.seeds.empty() ? 0 : config.seeds.front());
    Curves& c = curves[method];
    for (const auto& row : read_csv(fs::path(dir) / "detection.csv")) {
      c["accuracy"][row.at("dataset_size")].push_back(row.at("accuracy"));
      c["false_negative_rate"][row.at("dataset_size")].push_back(row.at("false_negative_rate"));
    }
    if (fs::exists(fs::path(dir) / "handling.csv"))
      for (const auto& row : read_csv(fs::path(dir) / "handling.csv")) {
        c["success_rate"][row.at("dataset_size")].push_back(row.at("success_rate"));
        c["mean_reduction"][row.at("dataset_size")].push_back(row.at("mean_reduction"));
      }
  }

  std::ofstream curvesCsv(fs::path(outDir) / "curves.csv");
  curvesCsv << "method,metric,dataset_size,mean,ci95,runs\n" << std::setprecision(10);
  std::map<std::string, std::vector<Series>> plots;
  for (const auto& [method, metrics] : curves)
    for (const auto& [metric, bySize] : metrics) {
      Series series{method, {}, {}};
      for (const auto& [size, values] : bySize) {
        const Stat s = stat(values);
        curvesCsv << method << ',' << metric << ',' << size << ',' << s.mean << ',' << s.ci95 << ',' << s.n << '\n';
        series.x.push_back(size);
        series.y.push_back(s.mean);
      }
      plots[metric].push_back(std::move(series));
    }
  if (!curvesCsv) throw Error(ErrorCode::kIo, "cannot write curves.csv");

  auto final_values = [&](const std::string& method, const std::string& metric) -> std::vector<double> {
    const auto& m = curves.at(method);
    const auto it = m.find(metric);
    if (it == m.end() || it->second.empty()) return {};
    return it->second.rbegin()->second;
  };
  const char* baseline = curves.count("supv") ? "supv" : nullptr;

  std::ofstream summary(fs::path(outDir) / "summary.csv");
  summary << "method,runs,final_dataset_size,accuracy,accuracy_ci95,false_negative_rate,false_negative_rate_ci95,"
             "success_rate,success_rate_ci95,equivalent_dataset_size\n"
          << std::setprecision(10);
  for (const auto& [method, metrics] : curves) {
    const Stat acc = stat(final_values(method, "accuracy"));
    const Stat fnr = stat(final_values(method, "false_negative_rate"));
    const Stat success = stat(final_values(method, "success_rate"));
    const double finalSize = metrics.at("accuracy").rbegin()->first;
    std::string equivalent = "n/a";
    if (baseline && method != baseline) {
      std::vector<double> sizes, accs;
      for (const auto& [size, values] : curves.at(baseline).at("accuracy")) {
        sizes.push_back(size);
        accs.push_back(stat(values).mean);
      }
      double size = 0.0;
      equivalent = equivalent_size(sizes, accs, acc.mean, size) ? fmt(size) : "beyond measured range";
    }
    summary << method << ',' << seeds.at(method).size() << ',' << finalSize << ',' << acc.mean << ',' << acc.ci95 << ','
            << fnr.mean << ',' << fnr.ci95 << ',';
    if (success.n) summary << success.mean << ',' << success.ci95;
    else summary << ',';
    summary << ',' << equivalent << '\n';
  }
  if (!summary) throw Error(ErrorCode::kIo, "cannot write summary.csv");

  const std::map<std::string, std::string> labels{{"accuracy", "accuracy"},
                                                  {"false_negative_rate", "false negative rate"},
                                                  {"success_rate", "handling success rate"},
                                                  {"mean_reduction", "mean relative PD reduction"}};
  for (const auto& [metric, series] : plots) {
    std::ofstream svg(fs::path(outDir) / (metric + ".svg"));
    svg << svg_plot(labels.at(metric) + " vs dataset size", "dataset size", labels.at(metric), series);
    if (!svg) throw Error(ErrorCode::kIo, "cannot write " + metric + ".svg");
  }
}

}  // namespace ncd::exp

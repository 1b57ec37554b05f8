// Copyright (c) 2026 cosal contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <filesystem>
#include <fstream>
#include <string>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "cosal/core/error.hpp"
#include "cosal/metrics/report.hpp"

namespace cosal::harness {

inline void write_pr_csv(const std::array<metrics::PrPoint, 256>& curve,
                         const std::filesystem::path& path) {
  metrics::MetricReport rep;
  rep.pr_curve = curve;
  std::ofstream os(path);
  check<IngestionError>(os.good(), "cannot open PR csv for writing: ", path.string());
  os << rep.pr_to_csv();
  check<IngestionError>(os.good(), "failed writing PR csv: ", path.string());
}

/// Reads back exactly what write_pr_csv / MetricReport::pr_to_csv emit:
/// a header plus 256 rows of %.17g values, which round-trip bit-exactly.
inline std::array<metrics::PrPoint, 256> read_pr_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  check<IngestionError>(is.good(), "cannot open PR csv: ", path.string());
  std::string line;
  check<ValidationError>(static_cast<bool>(std::getline(is, line)) &&
                             line == "threshold,precision,recall",
                         "PR csv ", path.string(), " is missing its header");
  std::array<metrics::PrPoint, 256> curve{};
  for (int k = 0; k < 256; ++k) {
    check<ValidationError>(static_cast<bool>(std::getline(is, line)), "PR csv ", path.string(),
                           " ends after ", k, " rows; expected 256");
    const std::size_t c1 = line.find(',');
    const std::size_t c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
    check<ValidationError>(c2 != std::string::npos, "malformed PR csv row: ", line);
    auto& pt = curve[static_cast<std::size_t>(k)];
    pt.threshold = std::stod(line.substr(0, c1));
    pt.precision = std::stod(line.substr(c1 + 1, c2 - c1 - 1));
    pt.recall = std::stod(line.substr(c2 + 1));
  }
  return curve;
}

/// Renders precision (y) against recall (x) as a PNG: axes from 0 to 1 with
/// quarter gridlines, the curve as a connected polyline.
inline void render_pr_plot(const std::array<metrics::PrPoint, 256>& curve,
                           const std::filesystem::path& path, int size = 512) {
  check<ConfigError>(size >= 128, "render_pr_plot: size must be >= 128");
  const int margin = size / 8;
  const int span = size - 2 * margin;
  cv::Mat canvas(size, size, CV_8UC3, cv::Scalar(255, 255, 255));

  auto to_px = [&](double recall, double precision) {
    const int x = margin + static_cast<int>(std::lround(recall * span));
    const int y = size - margin - static_cast<int>(std::lround(precision * span));
    return cv::Point(x, y);
  };

  for (int q = 0; q <= 4; ++q) {
    const double t = q / 4.0;
    cv::line(canvas, to_px(t, 0.0), to_px(t, 1.0), cv::Scalar(220, 220, 220), 1);
    cv::line(canvas, to_px(0.0, t), to_px(1.0, t), cv::Scalar(220, 220, 220), 1);
  }
  cv::line(canvas, to_px(0.0, 0.0), to_px(1.0, 0.0), cv::Scalar(0, 0, 0), 2);
  cv::line(canvas, to_px(0.0, 0.0), to_px(0.0, 1.0), cv::Scalar(0, 0, 0), 2);
  cv::putText(canvas, "recall", cv::Point(size / 2 - 24, size - margin / 3),
              cv::FONT_HERSHEY_SIMPLEX, 0.5, cv::Scalar(0, 0, 0), 1);
  cv::putText(canvas, "precision", cv::Point(4, margin / 2), cv::FONT_HERSHEY_SIMPLEX, 0.5,
              cv::Scalar(0, 0, 0), 1);

  for (std::size_t k = 1; k < curve.size(); ++k) {
    cv::line(canvas, to_px(curve[k - 1].recall, curve[k - 1].precision),
             to_px(curve[k].recall, curve[k].precision), cv::Scalar(60, 60, 200), 2);
  }
  check<IngestionError>(cv::imwrite(path.string(), canvas),
                        "render_pr_plot: cannot write ", path.string());
}

/// CLI back end: re-import a PR csv produced by evaluation, then write the
/// canonical csv and the rendered plot.
inline void export_pr(const std::filesystem::path& report_csv, const std::filesystem::path& out_csv,
                      const std::filesystem::path& out_plot) {
  auto curve = read_pr_csv(report_csv);
  write_pr_csv(curve, out_csv);
  render_pr_plot(curve, out_plot);
}

}  // namespace cosal::harness

// SPDX-License-Identifier: Apache-2.0
#pragma once

// CSV emission with a provenance header, and a small deterministic SVG line
// plotter (mean curve with a shaded +/- std band). The CSV is the source of
// truth; the SVG is a byte-stable function of the numbers it is given.

#include <string>
#include <vector>

#include "paramflow/oracle.hpp"

namespace pf::cli {

std::string provenance_line(std::uint64_t seed, const std::string& config_hash);

void write_curve_csv(const std::string& path, const oracle::CurveStats& stats,
                     const std::string& provenance);

oracle::CurveStats read_curve_csv(const std::string& path);

// CSV rows of (iteration, loss, wall seconds, gradient norm)
void write_training_csv(const std::string& path, const std::vector<train::LossRow>& rows,
                        const std::string& provenance);

struct PlotOptions {
  std::string title;
  std::string x_label = "t";
  std::string y_label = "relative L2 error";
  int width = 640;
  int height = 420;
  // optional second curve (e.g. a baseline) drawn dashed
  const oracle::CurveStats* second = nullptr;
  std::string second_label;
};

void write_curve_svg(const std::string& path, const oracle::CurveStats& stats,
                     const PlotOptions& opt, const std::string& provenance);

}  // namespace pf::cli

// SPDX-License-Identifier: Apache-2.0
#include "paramflow/csvplot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "paramflow/serialize.hpp"
#include "paramflow/util.hpp"

namespace pf::cli {

namespace {
std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}
std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace

std::string provenance_line(std::uint64_t seed, const std::string& config_hash) {
  std::ostringstream o;
  o << "paramflow " << io::kVersion << " seed=" << seed << " config=" << config_hash;
  return o.str();
}

void write_curve_csv(const std::string& path, const oracle::CurveStats& stats,
                     const std::string& provenance) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("csv: cannot write " + path);
  f << "# " << provenance << "\n";
  f << "t,mean,std,count\n";
  for (std::size_t i = 0; i < stats.t.size(); ++i)
    f << fmt17(stats.t[i]) << "," << fmt17(stats.mean[i]) << "," << fmt17(stats.stddev[i]) << ","
      << stats.count[i] << "\n";
}

oracle::CurveStats read_curve_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("csv: cannot read " + path);
  oracle::CurveStats st;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#' || line[0] == 't') continue;
    std::istringstream ss(line);
    std::string tok;
    double vals[3];
    for (int k = 0; k < 3; ++k) {
      if (!std::getline(ss, tok, ',')) throw std::runtime_error("csv: short row in " + path);
      vals[k] = std::stod(tok);
    }
    int cnt = 1;
    if (std::getline(ss, tok, ',')) cnt = std::stoi(tok);
    st.t.push_back(vals[0]);
    st.mean.push_back(vals[1]);
    st.stddev.push_back(vals[2]);
    st.count.push_back(cnt);
  }
  return st;
}

void write_training_csv(const std::string& path, const std::vector<train::LossRow>& rows,
                        const std::string& provenance) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("csv: cannot write " + path);
  f << "# " << provenance << "\n";
  f << "iteration,loss,wall_seconds,grad_norm\n";
  for (const auto& r : rows)
    f << r.iter << "," << fmt17(r.loss) << "," << fmt(r.wall) << "," << fmt17(r.grad_norm)
      << "\n";
}

void write_curve_svg(const std::string& path, const oracle::CurveStats& stats,
                     const PlotOptions& opt, const std::string& provenance) {
  if (stats.t.empty()) throw std::invalid_argument("svg: empty curve");
  const double ml = 70, mr = 20, mt = 36, mb = 48;
  const double pw = opt.width - ml - mr, ph = opt.height - mt - mb;

  double x0 = stats.t.front(), x1 = stats.t.back();
  if (x1 <= x0) x1 = x0 + 1;
  double y1 = 0.0;
  auto upd = [&](const oracle::CurveStats& s) {
    for (std::size_t i = 0; i < s.t.size(); ++i) y1 = std::max(y1, s.mean[i] + s.stddev[i]);
  };
  upd(stats);
  if (opt.second) upd(*opt.second);
  if (y1 <= 0) y1 = 1.0;
  y1 *= 1.08;

  auto X = [&](double t) { return ml + (t - x0) / (x1 - x0) * pw; };
  auto Y = [&](double v) { return mt + ph - std::clamp(v, 0.0, y1) / y1 * ph; };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opt.width << "\" height=\""
    << opt.height << "\" viewBox=\"0 0 " << opt.width << " " << opt.height << "\">\n";
  s << "<!-- " << provenance << " -->\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  // shaded band
  auto band = [&](const oracle::CurveStats& st, const char* fill) {
    s << "<path fill=\"" << fill << "\" stroke=\"none\" d=\"M";
    for (std::size_t i = 0; i < st.t.size(); ++i)
      s << fmt(X(st.t[i])) << " " << fmt(Y(st.mean[i] + st.stddev[i])) << " L";
    for (std::size_t i = st.t.size(); i-- > 0;)
      s << fmt(X(st.t[i])) << " " << fmt(Y(std::max(0.0, st.mean[i] - st.stddev[i])))
        << (i == 0 ? " Z" : " L");
    s << "\"/>\n";
  };
  auto line = [&](const oracle::CurveStats& st, const char* color, bool dashed) {
    s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.8\"";
    if (dashed) s << " stroke-dasharray=\"6 4\"";
    s << " points=\"";
    for (std::size_t i = 0; i < st.t.size(); ++i)
      s << fmt(X(st.t[i])) << "," << fmt(Y(st.mean[i])) << (i + 1 < st.t.size() ? " " : "");
    s << "\"/>\n";
  };
  band(stats, "#c8c8c8");
  if (opt.second) band(*opt.second, "#e4d3d3");
  line(stats, "#000000", false);
  if (opt.second) line(*opt.second, "#8a3434", true);

  // axes and ticks
  s << "<line x1=\"" << fmt(ml) << "\" y1=\"" << fmt(mt + ph) << "\" x2=\"" << fmt(ml + pw)
    << "\" y2=\"" << fmt(mt + ph) << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << fmt(ml) << "\" y1=\"" << fmt(mt) << "\" x2=\"" << fmt(ml) << "\" y2=\""
    << fmt(mt + ph) << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 5; ++k) {
    double tx = x0 + (x1 - x0) * k / 5, vy = y1 * k / 5;
    s << "<line x1=\"" << fmt(X(tx)) << "\" y1=\"" << fmt(mt + ph) << "\" x2=\"" << fmt(X(tx))
      << "\" y2=\"" << fmt(mt + ph + 5) << "\" stroke=\"black\"/>\n";
    s << "<text x=\"" << fmt(X(tx)) << "\" y=\"" << fmt(mt + ph + 18)
      << "\" font-size=\"11\" text-anchor=\"middle\" font-family=\"sans-serif\">" << fmt(tx)
      << "</text>\n";
    s << "<line x1=\"" << fmt(ml - 5) << "\" y1=\"" << fmt(Y(vy)) << "\" x2=\"" << fmt(ml)
      << "\" y2=\"" << fmt(Y(vy)) << "\" stroke=\"black\"/>\n";
    s << "<text x=\"" << fmt(ml - 8) << "\" y=\"" << fmt(Y(vy) + 4)
      << "\" font-size=\"11\" text-anchor=\"end\" font-family=\"sans-serif\">" << fmt(vy)
      << "</text>\n";
  }
  s << "<text x=\"" << fmt(ml + pw / 2) << "\" y=\"" << fmt(mt + ph + 36)
    << "\" font-size=\"12\" text-anchor=\"middle\" font-family=\"sans-serif\">" << opt.x_label
    << "</text>\n";
  s << "<text x=\"16\" y=\"" << fmt(mt + ph / 2)
    << "\" font-size=\"12\" text-anchor=\"middle\" font-family=\"sans-serif\" transform=\"rotate(-90 "
    << "16 " << fmt(mt + ph / 2) << ")\">" << opt.y_label << "</text>\n";
  s << "<text x=\"" << fmt(ml + pw / 2) << "\" y=\"20\" font-size=\"13\" text-anchor=\"middle\""
    << " font-family=\"sans-serif\">" << opt.title << "</text>\n";
  if (opt.second) {
    s << "<text x=\"" << fmt(ml + pw - 4) << "\" y=\"" << fmt(mt + 14)
      << "\" font-size=\"11\" text-anchor=\"end\" font-family=\"sans-serif\">solid: trained"
      << "  dashed: " << opt.second_label << "</text>\n";
  }
  s << "</svg>\n";

  std::ofstream f(path);
  if (!f) throw std::runtime_error("svg: cannot write " + path);
  f << s.str();
}

}  // namespace pf::cli

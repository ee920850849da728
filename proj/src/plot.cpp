#include "splitgan/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

#include "splitgan/data.hpp"
#include "splitgan/errors.hpp"

namespace splitgan::plot {

namespace {

constexpr double kW = 720, kH = 540, kMargin = 56;

std::string color_for(std::size_t i, std::size_t n) {
  // Golden-angle hue walk keeps neighboring series distinguishable.
  const double hue = std::fmod(137.50776 * static_cast<double>(i), 360.0);
  const double s = 0.72, v = n > 12 ? 0.95 : 0.82;
  const double c = v * s;
  const double x = c * (1.0 - std::abs(std::fmod(hue / 60.0, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  if (hue < 60) { r = c; g = x; }
  else if (hue < 120) { r = x; g = c; }
  else if (hue < 180) { g = c; b = x; }
  else if (hue < 240) { g = x; b = c; }
  else if (hue < 300) { r = x; b = c; }
  else { r = c; b = x; }
  const double m = v - c;
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", static_cast<int>((r + m) * 255),
                static_cast<int>((g + m) * 255), static_cast<int>((b + m) * 255));
  return buf;
}

struct Frame {
  double x0, x1, y0, y1;
  double px(double x) const {
    return kMargin + (x - x0) / (x1 - x0) * (kW - 2 * kMargin);
  }
  double py(double y) const {
    return kH - kMargin - (y - y0) / (y1 - y0) * (kH - 2 * kMargin);
  }
};

Frame pad_frame(double x0, double x1, double y0, double y1) {
  if (x1 - x0 < 1e-12) { x0 -= 1; x1 += 1; }
  if (y1 - y0 < 1e-12) { y0 -= 1; y1 += 1; }
  const double dx = 0.05 * (x1 - x0), dy = 0.05 * (y1 - y0);
  return Frame{x0 - dx, x1 + dx, y0 - dy, y1 + dy};
}

void open_svg(std::ostream& os) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\""
     << kH << "\" viewBox=\"0 0 " << kW << " " << kH << "\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

void draw_axes(std::ostream& os, const Frame& f) {
  os << "<g stroke=\"#404040\" stroke-width=\"1\">\n"
     << "<line x1=\"" << kMargin << "\" y1=\"" << kH - kMargin << "\" x2=\""
     << kW - kMargin << "\" y2=\"" << kH - kMargin << "\"/>\n"
     << "<line x1=\"" << kMargin << "\" y1=\"" << kMargin << "\" x2=\"" << kMargin
     << "\" y2=\"" << kH - kMargin << "\"/>\n</g>\n";
  char buf[160];
  for (int k = 0; k <= 4; ++k) {
    const double xv = f.x0 + (f.x1 - f.x0) * k / 4.0;
    const double yv = f.y0 + (f.y1 - f.y0) * k / 4.0;
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.1f\" y=\"%.1f\" font-size=\"11\" text-anchor=\"middle\" "
                  "fill=\"#404040\">%.4g</text>\n",
                  f.px(xv), kH - kMargin + 16, xv);
    os << buf;
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.1f\" y=\"%.1f\" font-size=\"11\" text-anchor=\"end\" "
                  "fill=\"#404040\">%.4g</text>\n",
                  kMargin - 6, f.py(yv) + 4, yv);
    os << buf;
  }
}

void scatter_plot(const data::LabeledDataset& ds, std::ostream& os) {
  if (ds.dim() > 2 && ds.size() > 0)
    throw ContractError("plot: scatter view supports 2-d data, got dim " +
                        std::to_string(ds.dim()));
  double x0 = 0, x1 = 0, y0 = 0, y1 = 0;
  bool any = false;
  auto take = [&](double x, double y) {
    if (!any) { x0 = x1 = x; y0 = y1 = y; any = true; return; }
    x0 = std::min(x0, x); x1 = std::max(x1, x);
    y0 = std::min(y0, y); y1 = std::max(y1, y);
  };
  for (std::size_t i = 0; i < ds.size(); ++i) take(ds.points.at(i, 0), ds.points.at(i, 1));
  for (std::size_t k = 0; k < ds.modes.count(); ++k)
    take(ds.modes.centers.at(k, 0), ds.modes.centers.at(k, 1));
  Frame f = any ? pad_frame(x0, x1, y0, y1) : pad_frame(-1, 1, -1, 1);

  open_svg(os);
  draw_axes(os, f);

  std::map<std::int32_t, std::size_t> label_slot;  // label -> palette index
  for (std::size_t i = 0; i < ds.size(); ++i)
    label_slot.emplace(ds.current_labels[i], label_slot.size());
  const std::size_t n_labels = label_slot.size();

  char buf[200];
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const std::string col = color_for(label_slot[ds.current_labels[i]], n_labels);
    std::snprintf(buf, sizeof buf,
                  "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"1.8\" fill=\"%s\" "
                  "fill-opacity=\"0.65\"/>\n",
                  f.px(ds.points.at(i, 0)), f.py(ds.points.at(i, 1)), col.c_str());
    os << buf;
  }
  for (std::size_t k = 0; k < ds.modes.count(); ++k) {
    const double cx = f.px(ds.modes.centers.at(k, 0));
    const double cy = f.py(ds.modes.centers.at(k, 1));
    std::snprintf(buf, sizeof buf,
                  "<path d=\"M %.2f %.2f L %.2f %.2f M %.2f %.2f L %.2f %.2f\" "
                  "stroke=\"black\" stroke-width=\"2\"/>\n",
                  cx - 5, cy - 5, cx + 5, cy + 5, cx - 5, cy + 5, cx + 5, cy - 5);
    os << buf;
  }
  std::size_t slot = 0;
  for (const auto& [label, idx] : label_slot) {
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.1f\" y=\"%.1f\" font-size=\"12\" fill=\"%s\">class %d"
                  "</text>\n",
                  kW - kMargin - 90.0, kMargin + 14.0 * static_cast<double>(slot++),
                  color_for(idx, n_labels).c_str(), label);
    os << buf;
  }
  os << "</svg>\n";
}

void curve_plot(const std::string& path, std::ostream& os) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read " + path);
  std::string line;
  if (!std::getline(f, line)) throw ParseError(path + ":1: empty csv");
  std::vector<std::string> names;
  {
    std::stringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) names.push_back(cell);
  }
  if (names.size() < 2 || names[0] != "iteration")
    throw ParseError(path + ":1: expected an 'iteration'-keyed csv header");
  std::vector<double> xs;
  std::vector<std::vector<double>> cols(names.size() - 1);
  std::size_t lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ls(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ls, cell, ',')) {
      char* end = nullptr;
      row.push_back(std::strtod(cell.c_str(), &end));
      if (end == cell.c_str())
        throw ParseError(path + ":" + std::to_string(lineno) + ": bad number '" + cell + "'");
    }
    if (row.size() != names.size())
      throw ParseError(path + ":" + std::to_string(lineno) + ": expected " +
                       std::to_string(names.size()) + " cells");
    xs.push_back(row[0]);
    for (std::size_t c = 1; c < row.size(); ++c) cols[c - 1].push_back(row[c]);
  }

  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (!xs.empty()) {
    x0 = *std::min_element(xs.begin(), xs.end());
    x1 = *std::max_element(xs.begin(), xs.end());
    y0 = y1 = cols[0][0];
    for (const auto& c : cols)
      for (double v : c) {
        y0 = std::min(y0, v);
        y1 = std::max(y1, v);
      }
  }
  Frame fr = pad_frame(x0, x1, y0, y1);
  open_svg(os);
  draw_axes(os, fr);
  char buf[200];
  for (std::size_t c = 0; c < cols.size(); ++c) {
    const std::string col = color_for(c, cols.size());
    if (!xs.empty()) {
      os << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t i = 0; i < xs.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.2f,%.2f ", fr.px(xs[i]), fr.py(cols[c][i]));
        os << buf;
      }
      os << "\"/>\n";
    }
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.1f\" y=\"%.1f\" font-size=\"12\" fill=\"%s\">%s</text>\n",
                  kW - kMargin - 150.0, kMargin + 14.0 * static_cast<double>(c),
                  col.c_str(), names[c + 1].c_str());
    os << buf;
  }
  os << "</svg>\n";
}

}  // namespace

void plot_file(const std::string& in_path, const std::string& out_svg) {
  std::ifstream probe(in_path);
  if (!probe) throw IoError("cannot read " + in_path);
  std::string first;
  std::getline(probe, first);
  probe.close();

  std::ofstream out(out_svg);
  if (!out) throw IoError("cannot write " + out_svg);
  if (first.rfind("#dim=", 0) == 0) {
    scatter_plot(data::load(in_path), out);
  } else if (first.rfind("iteration", 0) == 0) {
    curve_plot(in_path, out);
  } else {
    throw ParseError(in_path + ":1: neither a dataset file nor a metrics csv");
  }
  if (!out) throw IoError("write failed for " + out_svg);
}

}  // namespace splitgan::plot

#pragma once

#include <string>

namespace splitgan::plot {

/// Render an SVG from either a dataset/sample file (scatter colored by label,
/// mode centers overlaid) or a metrics/eval CSV (one line series per column).
/// The input kind is detected from the file's first line.
void plot_file(const std::string& in_path, const std::string& out_svg);

}  // namespace splitgan::plot

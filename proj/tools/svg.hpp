#ifndef ETAD_TOOLS_SVG_HPP
#define ETAD_TOOLS_SVG_HPP

#include <string>
#include <vector>

namespace etad::svg {

struct Series {
    std::string label;
    std::string color;
    std::vector<double> x;
    std::vector<double> y;
    bool bars = false; // bars for empirical mass, polyline for fitted curves
};

// Static comparison chart: light axes, optional bars, polylines, legend.
std::string chart(const std::string& title, const std::string& x_label,
                  const std::string& y_label, const std::vector<Series>& series,
                  int width = 720, int height = 480);

} // namespace etad::svg

#endif

#include "svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace etad::svg {

namespace {

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

} // namespace

std::string chart(const std::string& title, const std::string& x_label,
                  const std::string& y_label, const std::vector<Series>& series, int width,
                  int height) {
    const double ml = 60, mr = 20, mt = 40, mb = 50;
    const double pw = width - ml - mr, ph = height - mt - mb;

    double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
    bool first = true;
    for (const Series& s : series) {
        for (size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            if (first) {
                xmin = xmax = s.x[i];
                ymin = ymax = s.y[i];
                first = false;
            }
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, s.y[i]);
            ymax = std::max(ymax, s.y[i]);
        }
    }
    ymin = std::min(ymin, 0.0);
    if (xmax <= xmin) xmax = xmin + 1;
    if (ymax <= ymin) ymax = ymin + 1;
    ymax *= 1.05;

    auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
    auto py = [&](double y) { return mt + ph - (y - ymin) / (ymax - ymin) * ph; };

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">"
        << title << "</text>\n";

    // axes
    out << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw << "\" y2=\""
        << mt + ph << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << mt + ph
        << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 5; ++i) {
        double xv = xmin + (xmax - xmin) * i / 5.0;
        double yv = ymin + (ymax - ymin) * i / 5.0;
        out << "<text x=\"" << fmt(px(xv)) << "\" y=\"" << mt + ph + 18
            << "\" text-anchor=\"middle\" font-size=\"11\">" << fmt(xv) << "</text>\n";
        out << "<text x=\"" << ml - 6 << "\" y=\"" << fmt(py(yv) + 4)
            << "\" text-anchor=\"end\" font-size=\"11\">" << fmt(yv) << "</text>\n";
    }
    out << "<text x=\"" << ml + pw / 2 << "\" y=\"" << height - 8
        << "\" text-anchor=\"middle\" font-size=\"13\">" << x_label << "</text>\n";
    out << "<text x=\"16\" y=\"" << mt + ph / 2
        << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 16 " << mt + ph / 2
        << ")\">" << y_label << "</text>\n";

    for (const Series& s : series) {
        if (s.bars) {
            double bw = pw / std::max<size_t>(s.x.size(), 1) * 0.6;
            for (size_t i = 0; i < s.x.size(); ++i) {
                double x0 = px(s.x[i]) - bw / 2;
                double y0 = py(s.y[i]);
                out << "<rect x=\"" << fmt(x0) << "\" y=\"" << fmt(y0) << "\" width=\"" << fmt(bw)
                    << "\" height=\"" << fmt(py(ymin) - y0) << "\" fill=\"" << s.color
                    << "\" fill-opacity=\"0.5\"/>\n";
            }
        } else {
            out << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"2\" points=\"";
            for (size_t i = 0; i < s.x.size(); ++i) {
                if (!std::isfinite(s.y[i])) continue;
                out << fmt(px(s.x[i])) << ',' << fmt(py(s.y[i])) << ' ';
            }
            out << "\"/>\n";
        }
    }

    // legend
    double ly = mt + 6;
    for (const Series& s : series) {
        out << "<rect x=\"" << ml + pw - 150 << "\" y=\"" << fmt(ly) << "\" width=\"12\" height=\"12\" fill=\""
            << s.color << "\"/>\n";
        out << "<text x=\"" << ml + pw - 132 << "\" y=\"" << fmt(ly + 10)
            << "\" font-size=\"12\">" << s.label << "</text>\n";
        ly += 18;
    }
    out << "</svg>\n";
    return out.str();
}

} // namespace etad::svg

#include "powergp/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "powergp/errors.hpp"
#include "powergp/util.hpp"

namespace powergp {

namespace {

constexpr int kWidth = 720;
constexpr int kHeight = 480;
constexpr int kMarginLeft = 80;
constexpr int kMarginRight = 30;
constexpr int kMarginTop = 50;
constexpr int kMarginBottom = 60;

std::string px(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

std::string escape_xml(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    for (char c : text) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        default: out += c;
        }
    }
    return out;
}

struct Range {
    double lo = 0.0;
    double hi = 1.0;

    void expand(double v) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    void pad() {
        if (hi == lo) {
            hi = lo + 1.0;
            lo = lo - 1.0;
        } else {
            const double margin = 0.05 * (hi - lo);
            lo -= margin;
            hi += margin;
        }
    }
};

struct Frame {
    Range x, y;

    double sx(double v) const {
        return kMarginLeft + (v - x.lo) / (x.hi - x.lo) * (kWidth - kMarginLeft - kMarginRight);
    }
    double sy(double v) const {
        return kHeight - kMarginBottom -
               (v - y.lo) / (y.hi - y.lo) * (kHeight - kMarginTop - kMarginBottom);
    }
};

void open_svg(std::ostringstream& out, const std::string& title) {
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
        << kHeight << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n";
    out << "<rect width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n";
    out << "<text x=\"" << kWidth / 2 << "\" y=\"28\" font-family=\"sans-serif\" font-size=\"16\""
        << " text-anchor=\"middle\">" << escape_xml(title) << "</text>\n";
}

void draw_axes(std::ostringstream& out, const Frame& frame, const std::string& x_label,
               const std::string& y_label) {
    const double x0 = kMarginLeft;
    const double x1 = kWidth - kMarginRight;
    const double y0 = kHeight - kMarginBottom;
    const double y1 = kMarginTop;
    out << "<line x1=\"" << px(x0) << "\" y1=\"" << px(y0) << "\" x2=\"" << px(x1)
        << "\" y2=\"" << px(y0) << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << px(x0) << "\" y1=\"" << px(y0) << "\" x2=\"" << px(x0)
        << "\" y2=\"" << px(y1) << "\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 5; ++t) {
        const double fx = frame.x.lo + (frame.x.hi - frame.x.lo) * t / 5.0;
        const double fy = frame.y.lo + (frame.y.hi - frame.y.lo) * t / 5.0;
        const double tx = frame.sx(fx);
        const double ty = frame.sy(fy);
        out << "<line x1=\"" << px(tx) << "\" y1=\"" << px(y0) << "\" x2=\"" << px(tx)
            << "\" y2=\"" << px(y0 + 5) << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << px(tx) << "\" y=\"" << px(y0 + 20)
            << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">"
            << tick_label(fx) << "</text>\n";
        out << "<line x1=\"" << px(x0 - 5) << "\" y1=\"" << px(ty) << "\" x2=\"" << px(x0)
            << "\" y2=\"" << px(ty) << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << px(x0 - 8) << "\" y=\"" << px(ty + 4)
            << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">"
            << tick_label(fy) << "</text>\n";
    }
    out << "<text x=\"" << (kMarginLeft + (kWidth - kMarginLeft - kMarginRight) / 2) << "\" y=\""
        << (kHeight - 15) << "\" font-family=\"sans-serif\" font-size=\"13\""
        << " text-anchor=\"middle\">" << escape_xml(x_label) << "</text>\n";
    out << "<text x=\"20\" y=\"" << (kMarginTop + (kHeight - kMarginTop - kMarginBottom) / 2)
        << "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\""
        << " transform=\"rotate(-90 20 "
        << (kMarginTop + (kHeight - kMarginTop - kMarginBottom) / 2) << ")\">"
        << escape_xml(y_label) << "</text>\n";
}

} // namespace

void write_chart_svg(const std::string& path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::vector<Series>& series) {
    Frame frame;
    bool first = true;
    for (const Series& s : series) {
        for (const auto& [x, y] : s.points) {
            if (first) {
                frame.x.lo = frame.x.hi = x;
                frame.y.lo = frame.y.hi = y;
                first = false;
            } else {
                frame.x.expand(x);
                frame.y.expand(y);
            }
        }
    }
    if (first) {
        frame.x = {0.0, 1.0};
        frame.y = {0.0, 1.0};
    }
    frame.x.pad();
    frame.y.pad();

    std::ostringstream out;
    open_svg(out, title);
    draw_axes(out, frame, x_label, y_label);

    int legend_row = 0;
    for (const Series& s : series) {
        if (s.draw_line && s.points.size() > 1) {
            out << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\""
                << " points=\"";
            for (const auto& [x, y] : s.points) {
                out << px(frame.sx(x)) << ',' << px(frame.sy(y)) << ' ';
            }
            out << "\"/>\n";
        }
        if (s.draw_markers) {
            for (const auto& [x, y] : s.points) {
                out << "<circle cx=\"" << px(frame.sx(x)) << "\" cy=\"" << px(frame.sy(y))
                    << "\" r=\"3.5\" fill=\"" << s.color << "\"/>\n";
            }
        }
        if (!s.label.empty()) {
            const double ly = kMarginTop + 14 + 16 * legend_row;
            out << "<rect x=\"" << (kWidth - kMarginRight - 150) << "\" y=\"" << px(ly - 9)
                << "\" width=\"10\" height=\"10\" fill=\"" << s.color << "\"/>\n";
            out << "<text x=\"" << (kWidth - kMarginRight - 135) << "\" y=\"" << px(ly)
                << "\" font-family=\"sans-serif\" font-size=\"11\">" << escape_xml(s.label)
                << "</text>\n";
            ++legend_row;
        }
    }
    out << "</svg>\n";
    write_text_file(path, out.str());
}

void write_histogram_svg(const std::string& path, const std::string& title,
                         const std::string& x_label, std::span<const double> values,
                         int bins, double mu, double sigma) {
    if (values.empty() || bins < 1) {
        throw InvariantViolation("histogram: need values and at least one bin");
    }
    double lo = values[0];
    double hi = values[0];
    for (double v : values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (hi == lo) {
        lo -= 1.0;
        hi += 1.0;
    }
    const double width = (hi - lo) / bins;
    std::vector<double> density(static_cast<std::size_t>(bins), 0.0);
    for (double v : values) {
        int bin = static_cast<int>((v - lo) / width);
        bin = std::clamp(bin, 0, bins - 1);
        density[static_cast<std::size_t>(bin)] += 1.0;
    }
    for (double& d : density) {
        d /= static_cast<double>(values.size()) * width;
    }

    std::vector<Series> series;
    Series bars; // rendered manually below, series used only for the frame
    for (int b = 0; b < bins; ++b) {
        bars.points.push_back({lo + (b + 0.5) * width, density[static_cast<std::size_t>(b)]});
    }

    Frame frame;
    frame.x = {lo, hi};
    double dmax = 0.0;
    for (double d : density) dmax = std::max(dmax, d);
    if (sigma > 0.0) {
        dmax = std::max(dmax, 1.0 / (sigma * std::sqrt(2.0 * 3.14159265358979323846)));
    }
    frame.y = {0.0, dmax <= 0.0 ? 1.0 : dmax};
    frame.x.pad();
    frame.y.pad();
    frame.y.lo = 0.0;

    std::ostringstream out;
    open_svg(out, title);
    draw_axes(out, frame, x_label, "density");
    for (int b = 0; b < bins; ++b) {
        const double x_left = lo + b * width;
        const double d = density[static_cast<std::size_t>(b)];
        const double sx = frame.sx(x_left);
        const double sw = frame.sx(x_left + width) - sx;
        const double sy = frame.sy(d);
        const double sh = frame.sy(0.0) - sy;
        out << "<rect x=\"" << px(sx) << "\" y=\"" << px(sy) << "\" width=\"" << px(sw)
            << "\" height=\"" << px(sh) << "\" fill=\"#9ecae1\" stroke=\"#3182bd\"/>\n";
    }
    if (sigma > 0.0) {
        out << "<polyline fill=\"none\" stroke=\"#d62728\" stroke-width=\"2\" points=\"";
        const int samples = 120;
        for (int s = 0; s <= samples; ++s) {
            const double x = frame.x.lo + (frame.x.hi - frame.x.lo) * s / samples;
            const double z = (x - mu) / sigma;
            const double pdf =
                std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * 3.14159265358979323846));
            out << px(frame.sx(x)) << ',' << px(frame.sy(pdf)) << ' ';
        }
        out << "\"/>\n";
        out << "<text x=\"" << (kWidth - kMarginRight - 150) << "\" y=\"" << (kMarginTop + 14)
            << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#d62728\">normal pdf (mu="
            << tick_label(mu) << ", sigma=" << tick_label(sigma) << ")</text>\n";
    }
    out << "</svg>\n";
    write_text_file(path, out.str());
}

} // namespace powergp

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "cli.hpp"
#include "gnsp/csv.hpp"

namespace gnsp::cli {

namespace {

constexpr double kWidth = 800.0;
constexpr double kHeight = 500.0;
constexpr double kLeft = 80.0;
constexpr double kRight = 170.0;
constexpr double kTop = 30.0;
constexpr double kBottom = 60.0;
constexpr int kTicks = 10;

constexpr std::array<const char*, 10> kPalette = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                                  "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
                                                  "#bcbd22", "#17becf"};

struct Series {
    std::string name;
    std::vector<std::pair<double, double>> points;
};

struct Chart {
    std::string x_label;
    std::string y_label;
    std::vector<Series> series;
};

Series& series_named(std::vector<Series>& all, const std::string& name) {
    for (auto& s : all) {
        if (s.name == name) return s;
    }
    all.push_back({name, {}});
    return all.back();
}

double number(const CsvTable& t, std::size_t row, int col) {
    const double v = parse_double(t.rows[row][static_cast<std::size_t>(col)], t.row_lines[row]);
    if (!std::isfinite(v)) {
        throw CsvError("row " + std::to_string(t.row_lines[row]) + ": non-finite value", t.row_lines[row]);
    }
    return v;
}

// Layouts: gap.csv (one series per probe), spectra CSV (one series per layer),
// otherwise the first column is x and every other column a series.
Chart chart_from(const CsvTable& t) {
    Chart chart;
    const int checkpoint = t.column("checkpoint");
    const int probe = t.column("probe");
    const int gap = t.column("gap");
    const int layer = t.column("layer");
    const int index = t.column("index");
    const int eigenvalue = t.column("eigenvalue");
    if (checkpoint >= 0 && probe >= 0 && gap >= 0) {
        chart.x_label = "checkpoint";
        chart.y_label = "modality gap";
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            series_named(chart.series, t.rows[r][static_cast<std::size_t>(probe)])
                .points.emplace_back(number(t, r, checkpoint), number(t, r, gap));
        }
    } else if (layer >= 0 && index >= 0 && eigenvalue >= 0) {
        chart.x_label = "index";
        chart.y_label = "eigenvalue";
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            series_named(chart.series, "layer " + t.rows[r][static_cast<std::size_t>(layer)])
                .points.emplace_back(number(t, r, index), number(t, r, eigenvalue));
        }
    } else {
        if (t.header.size() < 2) throw CsvError("need at least two columns", 1);
        chart.x_label = t.header[0];
        chart.y_label = "value";
        for (std::size_t c = 1; c < t.header.size(); ++c) chart.series.push_back({t.header[c], {}});
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            const double x = number(t, r, 0);
            for (std::size_t c = 1; c < t.header.size(); ++c) {
                chart.series[c - 1].points.emplace_back(x, number(t, r, static_cast<int>(c)));
            }
        }
    }
    return chart;
}

std::string fmt(double v, const char* spec = "%.2f") {
    std::array<char, 64> buf{};
    std::snprintf(buf.data(), buf.size(), spec, v);
    return buf.data();
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::pair<double, double> padded(double lo, double hi) {
    if (lo == hi) return {lo - 0.5, hi + 0.5};
    return {lo, hi};
}

}  // namespace

std::string render_svg(std::istream& csv, bool log_y) {
    const CsvTable table = read_csv(csv);
    if (table.rows.empty()) throw CsvError("no data rows", 1);
    Chart chart = chart_from(table);

    if (log_y) {
        // Non-positive values have no logarithm and are left out.
        for (auto& s : chart.series) {
            std::erase_if(s.points, [](const auto& p) { return !(p.second > 0.0); });
            for (auto& p : s.points) p.second = std::log10(p.second);
        }
        chart.y_label = "log10 " + chart.y_label;
    }
    double x_lo = std::numeric_limits<double>::infinity();
    double x_hi = -x_lo;
    double y_lo = x_lo;
    double y_hi = -x_lo;
    for (const auto& s : chart.series) {
        for (const auto& [x, y] : s.points) {
            x_lo = std::min(x_lo, x);
            x_hi = std::max(x_hi, x);
            y_lo = std::min(y_lo, y);
            y_hi = std::max(y_hi, y);
        }
    }
    if (!std::isfinite(x_lo)) throw CsvError("no plottable points", 0);
    std::tie(x_lo, x_hi) = padded(x_lo, x_hi);
    std::tie(y_lo, y_hi) = padded(y_lo, y_hi);

    const double plot_w = kWidth - kLeft - kRight;
    const double plot_h = kHeight - kTop - kBottom;
    auto px = [&](double x) { return kLeft + (x - x_lo) / (x_hi - x_lo) * plot_w; };
    auto py = [&](double y) { return kTop + (y_hi - y) / (y_hi - y_lo) * plot_h; };

    std::ostringstream svg;
    svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"500\" viewBox=\"0 0 800 500\">\n"
        << "<rect x=\"0\" y=\"0\" width=\"800\" height=\"500\" fill=\"white\"/>\n"
        << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"black\">\n";
    svg << "<line x1=\"" << fmt(kLeft) << "\" y1=\"" << fmt(kTop + plot_h) << "\" x2=\"" << fmt(kLeft + plot_w)
        << "\" y2=\"" << fmt(kTop + plot_h) << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << fmt(kLeft) << "\" y1=\"" << fmt(kTop) << "\" x2=\"" << fmt(kLeft)
        << "\" y2=\"" << fmt(kTop + plot_h) << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= kTicks; ++i) {
        const double f = static_cast<double>(i) / kTicks;
        const double x = kLeft + f * plot_w;
        const double y = kTop + plot_h - f * plot_h;
        svg << "<line x1=\"" << fmt(x) << "\" y1=\"" << fmt(kTop + plot_h) << "\" x2=\"" << fmt(x)
            << "\" y2=\"" << fmt(kTop + plot_h + 5) << "\" stroke=\"black\"/>\n";
        svg << "<text x=\"" << fmt(x) << "\" y=\"" << fmt(kTop + plot_h + 18)
            << "\" text-anchor=\"middle\">" << fmt(x_lo + f * (x_hi - x_lo), "%.4g") << "</text>\n";
        svg << "<line x1=\"" << fmt(kLeft - 5) << "\" y1=\"" << fmt(y) << "\" x2=\"" << fmt(kLeft)
            << "\" y2=\"" << fmt(y) << "\" stroke=\"black\"/>\n";
        svg << "<text x=\"" << fmt(kLeft - 8) << "\" y=\"" << fmt(y + 4) << "\" text-anchor=\"end\">"
            << fmt(y_lo + f * (y_hi - y_lo), "%.4g") << "</text>\n";
    }
    svg << "<text x=\"" << fmt(kLeft + plot_w / 2) << "\" y=\"" << fmt(kHeight - 15)
        << "\" text-anchor=\"middle\">" << escape(chart.x_label) << "</text>\n";
    svg << "<text x=\"20\" y=\"" << fmt(kTop + plot_h / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 20 "
        << fmt(kTop + plot_h / 2) << ")\">" << escape(chart.y_label) << "</text>\n";

    for (std::size_t i = 0; i < chart.series.size(); ++i) {
        const auto& s = chart.series[i];
        const char* color = kPalette[i % kPalette.size()];
        if (!s.points.empty()) {
            svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
            for (std::size_t k = 0; k < s.points.size(); ++k) {
                if (k) svg << ' ';
                svg << fmt(px(s.points[k].first)) << ',' << fmt(py(s.points[k].second));
            }
            svg << "\"/>\n";
        }
        const double ly = kTop + 10 + 16 * static_cast<double>(i);
        const double lx = kLeft + plot_w + 15;
        svg << "<line x1=\"" << fmt(lx) << "\" y1=\"" << fmt(ly) << "\" x2=\"" << fmt(lx + 20) << "\" y2=\""
            << fmt(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        svg << "<text x=\"" << fmt(lx + 26) << "\" y=\"" << fmt(ly + 4) << "\">" << escape(s.name) << "</text>\n";
    }
    svg << "</g>\n</svg>\n";
    return svg.str();
}

int cmd_plot(const std::filesystem::path& in, const std::filesystem::path& out_svg, bool log_y,
             std::ostream& err) {
    std::ifstream csv(in);
    if (!csv) {
        err << "plot: cannot read " << in.string() << '\n';
        return kExitConfig;
    }
    std::string svg;
    try {
        svg = render_svg(csv, log_y);
    } catch (const CsvError& e) {
        err << "plot: malformed CSV " << in.string() << " (row " << e.row() << "): " << e.what() << '\n';
        return kExitConfig;
    }
    std::ofstream out(out_svg, std::ios::binary);
    out << svg;
    if (!out) {
        err << "plot: cannot write " << out_svg.string() << '\n';
        return kExitRuntime;
    }
    return kExitOk;
}

}  // namespace gnsp::cli

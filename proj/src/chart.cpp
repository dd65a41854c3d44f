#include "cfx/chart.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "cfx/error.hpp"

namespace cfx {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
constexpr int kPaletteSize = 8;

struct Series {
    std::string label;
    std::vector<double> xs;      // raw cost values, > 0
    std::vector<double> means;
    std::vector<double> stds;
};

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string fmt_label(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

// Smallest 1/2/5-decade value >= v; the std panel's y ceiling.
double nice_ceiling(double v) {
    if (v <= 0.0) return 1e-3;
    double mag = std::pow(10.0, std::floor(std::log10(v)));
    for (double m : {1.0, 2.0, 5.0, 10.0}) {
        if (mag * m >= v * (1.0 - 1e-12)) return mag * m;
    }
    return 10.0 * mag;
}

}  // namespace

std::string render_agreement_chart(const std::vector<SweepAggregate>& aggregates,
                                   const ChartOptions& opt) {
    if (aggregates.empty()) throw InputError("chart: no aggregates to plot");

    bool multi_dataset = false;
    for (const auto& a : aggregates) {
        if (a.dataset != aggregates.front().dataset) multi_dataset = true;
    }

    std::vector<Series> series;
    for (const auto& a : aggregates) {
        std::string label = multi_dataset ? a.dataset + "/" + a.strategy : a.strategy;
        Series* s = nullptr;
        for (auto& cand : series) {
            if (cand.label == label) {
                s = &cand;
                break;
            }
        }
        if (!s) {
            series.emplace_back();
            s = &series.back();
            s->label = label;
        }
        double x = opt.use_api_calls ? a.mean_api_calls
                                     : static_cast<double>(a.query_size);
        if (!(x > 0.0)) throw InputError("chart: cost values must be positive");
        s->xs.push_back(x);
        s->means.push_back(a.mean_agreement);
        s->stds.push_back(a.std_agreement);
    }
    for (auto& s : series) {
        std::vector<std::size_t> idx(s.xs.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        std::stable_sort(idx.begin(), idx.end(),
                         [&](std::size_t i, std::size_t j) { return s.xs[i] < s.xs[j]; });
        Series sorted;
        sorted.label = s.label;
        for (std::size_t i : idx) {
            sorted.xs.push_back(s.xs[i]);
            sorted.means.push_back(s.means[i]);
            sorted.stds.push_back(s.stds[i]);
        }
        s = std::move(sorted);
    }

    double xmin = series[0].xs[0], xmax = xmin, std_max = 0.0;
    std::vector<double> distinct_x;
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.xs.size(); ++i) {
            xmin = std::min(xmin, s.xs[i]);
            xmax = std::max(xmax, s.xs[i]);
            std_max = std::max(std_max, s.stds[i]);
            bool seen = false;
            for (double v : distinct_x) {
                if (v == s.xs[i]) seen = true;
            }
            if (!seen) distinct_x.push_back(s.xs[i]);
        }
    }
    std::sort(distinct_x.begin(), distinct_x.end());

    const double tmin = std::log2(xmin), tmax = std::log2(xmax);
    const int margin_l = 64, margin_r = 180, margin_top = 34, margin_bot = 46;
    const int plot_w = opt.width - margin_l - margin_r;
    const int plot_h = opt.panel_height - margin_top - margin_bot;
    const int total_h = 2 * opt.panel_height;

    auto x_pos = [&](double x) {
        if (tmax == tmin) return margin_l + plot_w / 2.0;
        return margin_l + (std::log2(x) - tmin) / (tmax - tmin) * plot_w;
    };

    std::vector<double> ticks;
    if (distinct_x.size() <= 12) {
        ticks = distinct_x;
    } else {
        for (double p = std::pow(2.0, std::ceil(tmin)); p <= xmax * (1 + 1e-12); p *= 2.0)
            ticks.push_back(p);
    }

    const double std_top = nice_ceiling(std_max);

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opt.width
        << "\" height=\"" << total_h << "\" viewBox=\"0 0 " << opt.width << " "
        << total_h << "\">\n";
    svg << "<rect width=\"" << opt.width << "\" height=\"" << total_h
        << "\" fill=\"white\"/>\n";
    if (!opt.title.empty())
        svg << "<text x=\"" << margin_l << "\" y=\"20\" font-family=\"sans-serif\" "
            << "font-size=\"15\" fill=\"#222\">" << opt.title << "</text>\n";

    const char* panel_titles[2] = {"agreement (mean)", "agreement (std)"};
    for (int panel = 0; panel < 2; ++panel) {
        const int top = panel * opt.panel_height + margin_top;
        const int bottom = top + plot_h;
        const double y_lo = 0.0;
        const double y_hi = panel == 0 ? 1.0 : std_top;
        auto y_pos = [&](double y) {
            return bottom - (y - y_lo) / (y_hi - y_lo) * plot_h;
        };

        svg << "<text x=\"" << margin_l << "\" y=\"" << (top - 8)
            << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#444\">"
            << panel_titles[panel] << "</text>\n";

        for (int i = 0; i <= 4; ++i) {
            double y = y_lo + (y_hi - y_lo) * i / 4.0;
            double py = y_pos(y);
            svg << "<line x1=\"" << margin_l << "\" y1=\"" << fmt(py) << "\" x2=\""
                << (margin_l + plot_w) << "\" y2=\"" << fmt(py)
                << "\" stroke=\"#e0e0e0\" stroke-width=\"1\"/>\n";
            svg << "<text x=\"" << (margin_l - 8) << "\" y=\"" << fmt(py + 4)
                << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#444\" "
                << "text-anchor=\"end\">" << fmt_label(y) << "</text>\n";
        }
        for (double t : ticks) {
            double px = x_pos(t);
            svg << "<line x1=\"" << fmt(px) << "\" y1=\"" << bottom << "\" x2=\""
                << fmt(px) << "\" y2=\"" << (bottom + 5)
                << "\" stroke=\"#444\" stroke-width=\"1\"/>\n";
            svg << "<text x=\"" << fmt(px) << "\" y=\"" << (bottom + 18)
                << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#444\" "
                << "text-anchor=\"middle\">" << fmt_label(t) << "</text>\n";
        }
        svg << "<line x1=\"" << margin_l << "\" y1=\"" << bottom << "\" x2=\""
            << (margin_l + plot_w) << "\" y2=\"" << bottom
            << "\" stroke=\"#444\" stroke-width=\"1\"/>\n";
        svg << "<line x1=\"" << margin_l << "\" y1=\"" << top << "\" x2=\"" << margin_l
            << "\" y2=\"" << bottom << "\" stroke=\"#444\" stroke-width=\"1\"/>\n";
        svg << "<text x=\"" << (margin_l + plot_w / 2) << "\" y=\"" << (bottom + 34)
            << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#444\" "
            << "text-anchor=\"middle\">"
            << (opt.use_api_calls ? "api calls" : "queries") << "</text>\n";

        for (std::size_t si = 0; si < series.size(); ++si) {
            const Series& s = series[si];
            const char* color = kPalette[si % kPaletteSize];
            const std::vector<double>& ys = panel == 0 ? s.means : s.stds;
            if (s.xs.size() > 1) {
                svg << "<polyline fill=\"none\" stroke=\"" << color
                    << "\" stroke-width=\"2\" points=\"";
                for (std::size_t i = 0; i < s.xs.size(); ++i) {
                    if (i) svg << " ";
                    svg << fmt(x_pos(s.xs[i])) << "," << fmt(y_pos(ys[i]));
                }
                svg << "\"/>\n";
            }
            for (std::size_t i = 0; i < s.xs.size(); ++i) {
                svg << "<circle cx=\"" << fmt(x_pos(s.xs[i])) << "\" cy=\""
                    << fmt(y_pos(ys[i])) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
            }
        }
    }

    const int legend_x = margin_l + plot_w + 16;
    for (std::size_t si = 0; si < series.size(); ++si) {
        const char* color = kPalette[si % kPaletteSize];
        int ly = margin_top + 10 + static_cast<int>(si) * 20;
        svg << "<line x1=\"" << legend_x << "\" y1=\"" << ly << "\" x2=\""
            << (legend_x + 22) << "\" y2=\"" << ly << "\" stroke=\"" << color
            << "\" stroke-width=\"2\"/>\n";
        svg << "<circle cx=\"" << (legend_x + 11) << "\" cy=\"" << ly
            << "\" r=\"3\" fill=\"" << color << "\"/>\n";
        svg << "<text x=\"" << (legend_x + 28) << "\" y=\"" << (ly + 4)
            << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#222\">"
            << series[si].label << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

std::vector<SweepAggregate> parse_aggregates_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw InputError("aggregates csv: empty input");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "dataset,strategy,query_size,mean_agreement,std_agreement,mean_api_calls")
        throw InputError("aggregates csv: unexpected header '" + line + "'");

    auto parse_real = [](const std::string& cell, int row, const char* what) {
        char* endp = nullptr;
        double v = std::strtod(cell.c_str(), &endp);
        if (cell.empty() || endp != cell.c_str() + cell.size() || !std::isfinite(v))
            throw InputError("aggregates csv: row " + std::to_string(row) + ": bad " +
                             what + " '" + cell + "'");
        return v;
    };

    std::vector<SweepAggregate> out;
    int row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::size_t start = 0;
        for (;;) {
            std::size_t comma = line.find(',', start);
            cells.push_back(line.substr(start, comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (cells.size() != 6)
            throw InputError("aggregates csv: row " + std::to_string(row) + ": expected 6 columns, got " +
                             std::to_string(cells.size()));
        SweepAggregate a;
        a.dataset = cells[0];
        a.strategy = cells[1];
        double qs = parse_real(cells[2], row, "query_size");
        if (qs < 1 || qs != std::floor(qs))
            throw InputError("aggregates csv: row " + std::to_string(row) +
                             ": bad query_size '" + cells[2] + "'");
        a.query_size = static_cast<int>(qs);
        a.mean_agreement = parse_real(cells[3], row, "mean_agreement");
        a.std_agreement = parse_real(cells[4], row, "std_agreement");
        a.mean_api_calls = parse_real(cells[5], row, "mean_api_calls");
        out.push_back(std::move(a));
    }
    if (out.empty()) throw InputError("aggregates csv: no data rows");
    return out;
}

}  // namespace cfx

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include <json.hpp>

#include "arbiter/errors.hpp"
#include "arbiter/experiment_harness.hpp"

namespace arbiter::harness {

using nlohmann::json;

namespace {

std::string fmt(double v, const char* spec = "%.9g") {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

const char* setup_color(const std::string& setup) {
    if (setup == "baseline") return "#1f77b4";
    if (setup == "contrastive") return "#ff7f0e";
    if (setup == "reconstructive") return "#2ca02c";
    if (setup == "combo") return "#d62728";
    return "#7f7f7f";
}

} // namespace

void write_report_csv(const std::string& path, const Report& report) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("report: cannot write " + path);
    out << "setup,subset_size,seed,accuracy,relative_error_rate,checkpoint_path\n";
    for (const auto& cell : report.cells) {
        out << cell.setup << ',' << cell.subset_size << ',' << cell.seed << ','
            << fmt(cell.accuracy) << ',' << fmt(cell.relative_error_rate) << ','
            << cell.checkpoint_path << '\n';
    }
}

void write_report_json(const std::string& path, const Report& report) {
    json cells = json::array();
    for (const auto& cell : report.cells) {
        json c;
        c["setup"] = cell.setup;
        c["subset_size"] = cell.subset_size;
        c["subset_exp"] = cell.subset_exp;
        c["seed"] = cell.seed;
        c["accuracy"] = cell.accuracy;
        c["relative_error_rate"] = cell.relative_error_rate;
        c["checkpoint_path"] = cell.checkpoint_path;
        if (!cell.curve.empty()) {
            json curve = json::array();
            for (const auto& p : cell.curve) {
                curve.push_back(json{{"step", p.step},
                                     {"train_loss", p.train_loss},
                                     {"val_loss", p.val_loss},
                                     {"val_contrastive", p.val_contrastive},
                                     {"val_reconstructive", p.val_reconstructive}});
            }
            c["curve"] = std::move(curve);
        }
        cells.push_back(std::move(c));
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("report: cannot write " + path);
    out << json{{"cells", std::move(cells)}}.dump(2) << '\n';
}

void write_report_svg(const std::string& path, const Report& report) {
    // Mean relative error rate per (setup, subset size), one polyline per
    // setup, log-scaled subset sizes on x.
    std::map<std::string, std::map<long, std::pair<double, int>>> series;
    double y_max = 1.0;
    long x_min = 0, x_max = 0;
    for (const auto& cell : report.cells) {
        auto& [sum, count] = series[cell.setup][cell.subset_size];
        sum += cell.relative_error_rate;
        count += 1;
        y_max = std::max(y_max, cell.relative_error_rate);
        x_min = x_min == 0 ? cell.subset_size : std::min(x_min, cell.subset_size);
        x_max = std::max(x_max, cell.subset_size);
    }
    if (series.empty()) throw Error("report: nothing to plot");
    y_max *= 1.1;

    const double width = 640.0, height = 420.0;
    const double ml = 70.0, mr = 160.0, mt = 30.0, mb = 55.0;
    const double pw = width - ml - mr, ph = height - mt - mb;
    const double lx0 = std::log(static_cast<double>(x_min));
    const double lx1 = std::log(static_cast<double>(std::max(x_max, x_min + 1)));
    auto sx = [&](long size) {
        if (x_max == x_min) return ml + pw / 2.0;
        return ml + pw * (std::log(static_cast<double>(size)) - lx0) / (lx1 - lx0);
    };
    auto sy = [&](double v) { return mt + ph * (1.0 - v / y_max); };

    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("report: cannot write " + path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << ml << "\" y=\"18\" font-family=\"sans-serif\" font-size=\"14\">"
        << "Relative error rate vs training subset size</text>\n";

    // Axes.
    out << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw << "\" y2=\""
        << mt + ph << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << mt + ph
        << "\" stroke=\"black\"/>\n";

    // Y ticks.
    for (int i = 0; i <= 5; ++i) {
        const double v = y_max * i / 5.0;
        out << "<line x1=\"" << ml - 4 << "\" y1=\"" << fmt(sy(v), "%.2f") << "\" x2=\"" << ml
            << "\" y2=\"" << fmt(sy(v), "%.2f") << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << ml - 8 << "\" y=\"" << fmt(sy(v) + 4, "%.2f")
            << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">"
            << fmt(v, "%.2f") << "</text>\n";
    }
    // X ticks at the subset sizes present.
    std::map<long, bool> xticks;
    for (const auto& [setup, points] : series) {
        for (const auto& [size, agg] : points) xticks[size] = true;
    }
    for (const auto& [size, unused] : xticks) {
        out << "<line x1=\"" << fmt(sx(size), "%.2f") << "\" y1=\"" << mt + ph << "\" x2=\""
            << fmt(sx(size), "%.2f") << "\" y2=\"" << mt + ph + 4 << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << fmt(sx(size), "%.2f") << "\" y=\"" << mt + ph + 18
            << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">" << size
            << "</text>\n";
    }
    out << "<text x=\"" << ml + pw / 2 << "\" y=\"" << height - 12
        << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">"
        << "training scenarios</text>\n";

    // Series (sorted by setup name for stable output).
    int legend_row = 0;
    for (const auto& [setup, points] : series) {
        const char* color = setup_color(setup);
        std::string poly;
        for (const auto& [size, agg] : points) {
            const double mean = agg.first / static_cast<double>(agg.second);
            poly += fmt(sx(size), "%.2f");
            poly += ',';
            poly += fmt(sy(mean), "%.2f");
            poly += ' ';
            out << "<circle cx=\"" << fmt(sx(size), "%.2f") << "\" cy=\""
                << fmt(sy(mean), "%.2f") << "\" r=\"3\" fill=\"" << color << "\"/>\n";
        }
        out << "<polyline points=\"" << poly << "\" fill=\"none\" stroke=\"" << color
            << "\" stroke-width=\"2\"/>\n";
        const double ly = mt + 14 + 18.0 * legend_row++;
        out << "<line x1=\"" << ml + pw + 12 << "\" y1=\"" << ly - 4 << "\" x2=\""
            << ml + pw + 34 << "\" y2=\"" << ly - 4 << "\" stroke=\"" << color
            << "\" stroke-width=\"2\"/>\n";
        out << "<text x=\"" << ml + pw + 40 << "\" y=\"" << ly
            << "\" font-family=\"sans-serif\" font-size=\"12\">" << setup << "</text>\n";
    }
    out << "</svg>\n";
}

} // namespace arbiter::harness

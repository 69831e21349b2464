#include "elm/eval/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "elm/common/error.hpp"

namespace elm::eval {

namespace {

constexpr double kWidth = 720, kHeight = 420;
constexpr double kLeft = 70, kRight = 70, kTop = 40, kBottom = 60;

double quantile(std::vector<double> v, double q) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

std::string fmt(double x) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(2) << x;
    return s.str();
}

std::string label_of(const SweepColumn& c) { return fmt(c.alpha); }

const char* class_colour(const std::string& cls) {
    if (cls == "male") return "#3b6fb6";
    if (cls == "female") return "#c8453c";
    return "#9a9a9a";
}

std::ofstream open(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    return out;
}

}  // namespace

void write_sweep_svg(const std::filesystem::path& path, const SweepPlot& plot) {
    std::vector<std::pair<std::string, const SweepColumn*>> cols;
    if (plot.reference) cols.emplace_back("REF", &*plot.reference);
    for (const auto& c : plot.columns) cols.emplace_back(label_of(c), &c);
    if (cols.empty()) throw ValidationError("nothing to plot");
    const bool sex = plot.concept_name == "sex";

    double y_max = 1.0;
    for (const auto& [_, c] : cols) {
        if (sex) {
            std::size_t total = 0;
            for (const auto& [k, v] : c->counts) total += v;
            y_max = std::max(y_max, static_cast<double>(total));
        } else {
            for (double v : c->values) y_max = std::max(y_max, v);
        }
    }
    y_max *= 1.05;
    const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
    const double slot = pw / static_cast<double>(cols.size());
    auto x_at = [&](std::size_t i) { return kLeft + slot * (static_cast<double>(i) + 0.5); };
    auto y_left = [&](double v) { return kTop + ph * (1.0 - v / y_max); };
    auto y_right = [&](double v) { return kTop + ph * (1.0 - std::clamp(v, 0.0, 1.0)); };

    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + ph << "\" x2=\"" << kLeft + pw << "\" y2=\"" << kTop + ph
      << "\" stroke=\"black\"/>\n";
    s << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << kTop + ph
      << "\" stroke=\"black\"/>\n";
    s << "<line x1=\"" << kLeft + pw << "\" y1=\"" << kTop << "\" x2=\"" << kLeft + pw << "\" y2=\"" << kTop + ph
      << "\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 4; ++t) {
        const double v = y_max * t / 4.0, y = y_left(v);
        s << "<text x=\"" << kLeft - 8 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">" << fmt(v) << "</text>\n";
        s << "<text x=\"" << kLeft + pw + 8 << "\" y=\"" << y_right(t / 4.0) + 4 << "\">" << fmt(t / 4.0)
          << "</text>\n";
    }
    s << "<text x=\"" << 18 << "\" y=\"" << kTop + ph / 2 << "\" transform=\"rotate(-90 18 " << kTop + ph / 2
      << ")\" text-anchor=\"middle\">" << (sex ? "trials per sex" : "extracted age (years)") << "</text>\n";
    s << "<text x=\"" << kWidth - 14 << "\" y=\"" << kTop + ph / 2 << "\" transform=\"rotate(90 " << kWidth - 14
      << ' ' << kTop + ph / 2 << ")\" text-anchor=\"middle\">semantic consistency</text>\n";
    s << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 14 << "\" text-anchor=\"middle\">alpha</text>\n";

    const double bar = slot * 0.6;
    for (std::size_t i = 0; i < cols.size(); ++i) {
        const auto& c = *cols[i].second;
        const double x = x_at(i);
        s << "<text x=\"" << x << "\" y=\"" << kTop + ph + 18 << "\" text-anchor=\"middle\">" << cols[i].first
          << "</text>\n";
        if (sex) {
            double base = 0.0;
            for (const char* cls : {"male", "female", "neutral"}) {
                const auto it = c.counts.find(cls);
                const double v = it == c.counts.end() ? 0.0 : static_cast<double>(it->second);
                if (v <= 0) continue;
                s << "<rect x=\"" << x - bar / 2 << "\" y=\"" << y_left(base + v) << "\" width=\"" << bar
                  << "\" height=\"" << y_left(base) - y_left(base + v) << "\" fill=\"" << class_colour(cls)
                  << "\"/>\n";
                base += v;
            }
        } else if (!c.values.empty()) {
            const double q1 = quantile(c.values, 0.25), q2 = quantile(c.values, 0.5), q3 = quantile(c.values, 0.75);
            const double lo = quantile(c.values, 0.0), hi = quantile(c.values, 1.0);
            s << "<line x1=\"" << x << "\" y1=\"" << y_left(lo) << "\" x2=\"" << x << "\" y2=\"" << y_left(hi)
              << "\" stroke=\"#555\"/>\n";
            s << "<rect x=\"" << x - bar / 2 << "\" y=\"" << y_left(q3) << "\" width=\"" << bar << "\" height=\""
              << std::max(0.5, y_left(q1) - y_left(q3)) << "\" fill=\"#8fb3d9\" stroke=\"#555\"/>\n";
            s << "<line x1=\"" << x - bar / 2 << "\" y1=\"" << y_left(q2) << "\" x2=\"" << x + bar / 2 << "\" y2=\""
              << y_left(q2) << "\" stroke=\"black\" stroke-width=\"2\"/>\n";
        }
    }
    // SC overlay skips the REF column, which has no decode
    std::ostringstream pts;
    const std::size_t first = plot.reference ? 1 : 0;
    for (std::size_t i = first; i < cols.size(); ++i)
        pts << (i == first ? "" : " ") << x_at(i) << ',' << y_right(cols[i].second->sc_mean);
    s << "<polyline points=\"" << pts.str() << "\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\"/>\n";
    for (std::size_t i = first; i < cols.size(); ++i)
        s << "<circle cx=\"" << x_at(i) << "\" cy=\"" << y_right(cols[i].second->sc_mean)
          << "\" r=\"3\" fill=\"black\"/>\n";
    if (sex) {
        double lx = kLeft + 10;
        for (const char* cls : {"male", "female", "neutral"}) {
            s << "<rect x=\"" << lx << "\" y=\"" << 12 << "\" width=\"12\" height=\"12\" fill=\"" << class_colour(cls)
              << "\"/><text x=\"" << lx + 16 << "\" y=\"" << 22 << "\">" << cls << "</text>\n";
            lx += 90;
        }
    }
    s << "</svg>\n";
    auto out = open(path);
    out << s.str();
}

void write_sweep_plot_csv(const std::filesystem::path& path, const SweepPlot& plot) {
    auto out = open(path);
    out << std::setprecision(10);
    auto row = [&](const std::string& label, const SweepColumn& c, bool with_sc) {
        if (plot.concept_name == "sex") {
            auto get = [&](const char* k) {
                const auto it = c.counts.find(k);
                return it == c.counts.end() ? std::size_t{0} : it->second;
            };
            out << label << ',' << get("male") << ',' << get("female") << ',' << get("neutral") << ',';
        } else {
            out << label << ',' << c.values.size() << ',' << quantile(c.values, 0.25) << ','
                << quantile(c.values, 0.5) << ',' << quantile(c.values, 0.75) << ',';
        }
        if (with_sc) out << c.sc_mean;
        out << '\n';
    };
    out << (plot.concept_name == "sex" ? "alpha,male,female,neutral,sc_mean\n" : "alpha,n,age_q1,age_median,age_q3,sc_mean\n");
    if (plot.reference) row("REF", *plot.reference, false);
    for (const auto& c : plot.columns) {
        std::ostringstream a;
        a << c.alpha;
        row(a.str(), c, true);
    }
}

}  // namespace elm::eval

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>

#include "csiadv/binary_io.hpp"
#include "csiadv/eval/report.hpp"

namespace csiadv::eval {

namespace {

constexpr std::array<const char*, 6> kPalette{"#1f77b4", "#d62728", "#2ca02c",
                                              "#9467bd", "#ff7f0e", "#8c564b"};

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
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

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  bool empty() const { return lo > hi; }
  // Data span plus 5% on each side; a degenerate span widens to +-0.5.
  Range padded() const {
    if (empty()) return Range{-1.0, 1.0};
    const double span = hi - lo;
    if (span == 0.0) return Range{lo - 0.5, hi + 0.5};
    return Range{lo - 0.05 * span, hi + 0.05 * span};
  }
};

double nice_step(double span) {
  const double raw = span / 6.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (raw <= m * mag) return m * mag;
  }
  return 10.0 * mag;
}

}  // namespace

std::string render_svg(const SweepReport& report, const PlotOptions& options) {
  if (report.points.empty()) throw ContractError("render_plot: empty report");

  Range xr, yr;
  for (const auto& p : report.points) {
    if (p.isr_db) xr.add(*p.isr_db);
    yr.add(p.nmse_db);
  }
  xr = xr.padded();
  yr = yr.padded();

  const double left = 70, right = 190, top = 40, bottom = 60;
  const double pw = options.width - left - right;
  const double ph = options.height - top - bottom;
  auto px = [&](double x) { return left + (x - xr.lo) / (xr.hi - xr.lo) * pw; };
  auto py = [&](double y) { return top + (yr.hi - y) / (yr.hi - yr.lo) * ph; };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(options.width) +
         "\" height=\"" + std::to_string(options.height) + "\" viewBox=\"0 0 " +
         std::to_string(options.width) + " " + std::to_string(options.height) + "\">\n";
  svg += "<rect x=\"0\" y=\"0\" width=\"" + std::to_string(options.width) + "\" height=\"" +
         std::to_string(options.height) + "\" fill=\"white\"/>\n";
  if (!options.title.empty()) {
    svg += "<text x=\"" + fixed(left + pw / 2) + "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">" +
           escape(options.title) + "</text>\n";
  }

  // frame, ticks, labels
  svg += "<g font-family=\"sans-serif\" font-size=\"11\" stroke-width=\"1\">\n";
  svg += "<rect x=\"" + fixed(left) + "\" y=\"" + fixed(top) + "\" width=\"" + fixed(pw) +
         "\" height=\"" + fixed(ph) + "\" fill=\"none\" stroke=\"black\"/>\n";
  for (const auto& [r, horizontal] : {std::pair{xr, true}, std::pair{yr, false}}) {
    const double step = nice_step(r.hi - r.lo);
    for (double v = std::ceil(r.lo / step) * step; v <= r.hi + 1e-9; v += step) {
      const double t = std::abs(v) < 1e-12 ? 0.0 : v;
      char label[32];
      std::snprintf(label, sizeof label, "%g", t);
      if (horizontal) {
        svg += "<line x1=\"" + fixed(px(t)) + "\" y1=\"" + fixed(top + ph) + "\" x2=\"" +
               fixed(px(t)) + "\" y2=\"" + fixed(top + ph + 5) + "\" stroke=\"black\"/>";
        svg += "<text x=\"" + fixed(px(t)) + "\" y=\"" + fixed(top + ph + 18) +
               "\" text-anchor=\"middle\">" + label + "</text>\n";
      } else {
        svg += "<line x1=\"" + fixed(left - 5) + "\" y1=\"" + fixed(py(t)) + "\" x2=\"" +
               fixed(left) + "\" y2=\"" + fixed(py(t)) + "\" stroke=\"black\"/>";
        svg += "<text x=\"" + fixed(left - 8) + "\" y=\"" + fixed(py(t) + 4) +
               "\" text-anchor=\"end\">" + label + "</text>\n";
      }
    }
  }
  svg += "<text x=\"" + fixed(left + pw / 2) + "\" y=\"" + fixed(options.height - 18.0) +
         "\" text-anchor=\"middle\" font-size=\"13\">ISR (dB)</text>\n";
  svg += "<text transform=\"translate(18," + fixed(top + ph / 2) +
         ") rotate(-90)\" text-anchor=\"middle\" font-size=\"13\">NMSE (dB)</text>\n";
  svg += "</g>\n";

  const auto models = report.models();
  double legend_y = top + 10;
  auto legend = [&](const std::string& color, const std::string& dash, double width,
                    const std::string& text) {
    const double lx = left + pw + 12;
    svg += "<path d=\"M" + fixed(lx) + " " + fixed(legend_y) + " H" + fixed(lx + 24) +
           "\" stroke=\"" + color + "\" stroke-width=\"" + fixed(width) + "\"" +
           (dash.empty() ? "" : " stroke-dasharray=\"" + dash + "\"") + "/>";
    svg += "<text x=\"" + fixed(lx + 30) + "\" y=\"" + fixed(legend_y + 4) +
           "\" font-family=\"sans-serif\" font-size=\"10\">" + escape(text) + "</text>\n";
    legend_y += 16;
  };

  for (std::size_t mi = 0; mi < models.size(); ++mi) {
    const auto& model = models[mi];
    const std::string color = kPalette[mi % kPalette.size()];
    for (AttackKind kind : {AttackKind::kAdversarial, AttackKind::kJamming, AttackKind::kNone}) {
      std::vector<std::pair<double, double>> pts;
      for (const auto& p : report.points) {
        if (p.model == model && p.kind == kind && p.isr_db && std::isfinite(p.nmse_db)) {
          pts.emplace_back(*p.isr_db, p.nmse_db);
        }
      }
      if (pts.empty()) continue;
      std::sort(pts.begin(), pts.end());
      const double width = kind == AttackKind::kAdversarial ? 2.0 : 1.2;
      svg += "<polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"" + fixed(width) +
             "\" points=\"";
      for (std::size_t i = 0; i < pts.size(); ++i) {
        svg += (i ? " " : "") + fixed(px(pts[i].first)) + "," + fixed(py(pts[i].second));
      }
      svg += "\"/>\n";
      for (const auto& [x, y] : pts) {
        if (kind == AttackKind::kJamming) {
          svg += "<rect x=\"" + fixed(px(x) - 3) + "\" y=\"" + fixed(py(y) - 3) +
                 "\" width=\"6\" height=\"6\" fill=\"white\" stroke=\"" + color + "\"/>\n";
        } else {
          svg += "<circle cx=\"" + fixed(px(x)) + "\" cy=\"" + fixed(py(y)) +
                 "\" r=\"3\" fill=\"" + color + "\"/>\n";
        }
      }
      legend(color, "", width, model.label() + " " + std::string(attack_name(kind)));
    }
    for (const auto& p : report.points) {
      if (p.model == model && !p.isr_db && std::isfinite(p.nmse_db)) {
        svg += "<line x1=\"" + fixed(left) + "\" y1=\"" + fixed(py(p.nmse_db)) + "\" x2=\"" +
               fixed(left + pw) + "\" y2=\"" + fixed(py(p.nmse_db)) + "\" stroke=\"" + color +
               "\" stroke-width=\"1\" stroke-dasharray=\"6,4\"/>\n";
        legend(color, "6,4", 1.0, model.label() + " baseline");
        break;
      }
    }
  }
  svg += "</svg>\n";
  return svg;
}

void render_plot(const SweepReport& report, const std::filesystem::path& path,
                 const PlotOptions& options) {
  const std::string svg = render_svg(report, options);
  io::write_file(path, std::span<const char>(svg.data(), svg.size()));
}

}  // namespace csiadv::eval

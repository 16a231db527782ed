#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "obsmerge/error.hpp"
#include "obsmerge/experiment.hpp"

namespace obsmerge {

namespace {

constexpr double kWidth = 720.0;
constexpr double kHeight = 480.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 220.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 60.0;

std::string escape(std::string_view s) {
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
  double lo;
  double hi;

  double span() const { return hi - lo; }
};

// Pads [lo, hi] by 5% and widens a degenerate range.
Range padded(double lo, double hi) {
  if (!(hi > lo)) {
    lo -= 0.05;
    hi += 0.05;
  }
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad};
}

std::string header(std::string_view title) {
  std::string out = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\">\n"
      "<rect width=\"{0}\" height=\"{1}\" fill=\"white\"/>\n"
      "<text x=\"{2}\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\">{3}</text>\n",
      kWidth, kHeight, kLeft, escape(title));
  return out;
}

std::string axes(const Range& x, const Range& y, std::string_view xlabel, std::string_view ylabel) {
  const double x0 = kLeft;
  const double x1 = kWidth - kRight;
  const double y0 = kHeight - kBottom;
  const double y1 = kTop;
  std::string out = fmt::format(
      "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n", x0, y1,
      x1 - x0, y0 - y1);
  constexpr int kTicks = 5;
  for (int i = 0; i <= kTicks; ++i) {
    const double t = static_cast<double>(i) / kTicks;
    const double px = x0 + t * (x1 - x0);
    const double py = y0 - t * (y0 - y1);
    out += fmt::format(
        "<line x1=\"{0:.2f}\" y1=\"{1}\" x2=\"{0:.2f}\" y2=\"{2}\" stroke=\"black\"/>"
        "<text x=\"{0:.2f}\" y=\"{3}\" font-family=\"sans-serif\" font-size=\"11\" "
        "text-anchor=\"middle\">{4:.3f}</text>\n",
        px, y0, y0 + 5, y0 + 18, x.lo + t * x.span());
    out += fmt::format(
        "<line x1=\"{0}\" y1=\"{1:.2f}\" x2=\"{2}\" y2=\"{1:.2f}\" stroke=\"black\"/>"
        "<text x=\"{3}\" y=\"{4:.2f}\" font-family=\"sans-serif\" font-size=\"11\" "
        "text-anchor=\"end\">{5:.3f}</text>\n",
        x0 - 5, py, x0, x0 - 8, py + 4, y.lo + t * y.span());
  }
  out += fmt::format(
      "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" "
      "text-anchor=\"middle\">{}</text>\n",
      (x0 + x1) / 2, kHeight - 18, escape(xlabel));
  out += fmt::format(
      "<text x=\"16\" y=\"{0}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" "
      "transform=\"rotate(-90 16 {0})\">{1}</text>\n",
      (y0 + y1) / 2, escape(ylabel));
  return out;
}

double to_px(double v, const Range& r) { return kLeft + (v - r.lo) / r.span() * (kWidth - kRight - kLeft); }
double to_py(double v, const Range& r) {
  return (kHeight - kBottom) - (v - r.lo) / r.span() * (kHeight - kBottom - kTop);
}

const char* color_for(std::string_view method) {
  static const std::map<std::string_view, const char*> colors = {
      {"bsas", "#1f77b4"},      {"bsas_excl", "#ff7f0e"}, {"hungarian", "#2ca02c"},
      {"hdbscan", "#d62728"},   {"ssd", "#000000"},       {"bsas_baseline", "#9467bd"},
  };
  const auto it = colors.find(method);
  return it == colors.end() ? "#7f7f7f" : it->second;
}

double quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::string file_token(std::string_view s) {
  std::string out;
  for (char c : s) out += (c == '+') ? '_' : c;
  return out;
}

}  // namespace

std::string render_scatter_svg(std::span<const ReportRow> rows, std::string_view title) {
  std::vector<const ReportRow*> points;
  for (const auto& r : rows) {
    if (!std::isnan(r.ue_min) && !std::isnan(r.map)) points.push_back(&r);
  }
  double xlo = 0.0, xhi = 1.0, ylo = 0.0, yhi = 1.0;
  if (!points.empty()) {
    xlo = ylo = std::numeric_limits<double>::infinity();
    xhi = yhi = -std::numeric_limits<double>::infinity();
    for (const auto* r : points) {
      xlo = std::min(xlo, r->ue_min);
      xhi = std::max(xhi, r->ue_min);
      ylo = std::min(ylo, r->map);
      yhi = std::max(yhi, r->map);
    }
  }
  const Range x = padded(xlo, xhi);
  const Range y = padded(ylo, yhi);
  std::string out = header(title);
  out += axes(x, y, "minimum uncertainty error", "mAP");

  std::vector<std::string> legend;
  for (const auto* r : points) {
    std::string name = r->method;
    if (!r->affinity.empty()) name += " " + r->affinity;
    if (r->theta) name += fmt::format(" {}", *r->theta);
    out += fmt::format(
        "<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"4\" fill=\"{}\" fill-opacity=\"0.8\">"
        "<title>{} (UE {:.4f}, mAP {:.4f})</title></circle>\n",
        to_px(r->ue_min, x), to_py(r->map, y), color_for(r->method), escape(name), r->ue_min, r->map);
    if (std::find(legend.begin(), legend.end(), r->method) == legend.end()) legend.push_back(r->method);
  }
  for (std::size_t i = 0; i < legend.size(); ++i) {
    const double ly = kTop + 10 + 18.0 * static_cast<double>(i);
    out += fmt::format(
        "<circle cx=\"{0}\" cy=\"{1}\" r=\"4\" fill=\"{2}\"/>"
        "<text x=\"{3}\" y=\"{4}\" font-family=\"sans-serif\" font-size=\"12\">{5}</text>\n",
        kWidth - kRight + 20, ly, color_for(legend[i]), kWidth - kRight + 30, ly + 4, escape(legend[i]));
  }
  out += "</svg>\n";
  return out;
}

std::string render_variance_svg(std::span<const SpatialPoint> points) {
  // Per cell, in first-appearance order: log10 total variance of high and
  // low accuracy observations.
  std::vector<std::string> cells;
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> groups;
  for (const auto& p : points) {
    if (!groups.contains(p.cell)) cells.push_back(p.cell);
    auto& g = groups[p.cell];
    const double v = std::log10(std::max(p.total_variance, 1e-6));
    if (p.gt_iou >= 0.7) g.first.push_back(v);
    if (p.gt_iou <= 0.3) g.second.push_back(v);
  }
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (auto& [_, g] : groups) {
    std::sort(g.first.begin(), g.first.end());
    std::sort(g.second.begin(), g.second.end());
    for (const auto* v : {&g.first, &g.second}) {
      if (v->empty()) continue;
      lo = std::min(lo, v->front());
      hi = std::max(hi, v->back());
    }
  }
  if (!std::isfinite(lo)) {
    lo = 0.0;
    hi = 1.0;
  }
  const Range y = padded(lo, hi);
  const Range x{0.0, static_cast<double>(std::max<std::size_t>(cells.size(), 1))};

  std::string out = header("Total spatial variance: GT-IoU >= 0.7 (blue) vs <= 0.3 (red)");
  out += axes(x, y, "grid cell", "log10 total variance");
  auto box = [&](const std::vector<double>& v, double center, const char* color) {
    if (v.empty()) return;
    const double w = 0.3 * (kWidth - kRight - kLeft) / x.span();
    const double cx = to_px(center, x);
    const double q1 = to_py(quantile(v, 0.25), y);
    const double q3 = to_py(quantile(v, 0.75), y);
    out += fmt::format(
        "<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{0:.2f}\" y2=\"{2:.2f}\" stroke=\"{3}\"/>"
        "<rect x=\"{4:.2f}\" y=\"{5:.2f}\" width=\"{6:.2f}\" height=\"{7:.2f}\" fill=\"{3}\" "
        "fill-opacity=\"0.35\" stroke=\"{3}\"/>"
        "<line x1=\"{4:.2f}\" y1=\"{8:.2f}\" x2=\"{9:.2f}\" y2=\"{8:.2f}\" stroke=\"{3}\" stroke-width=\"2\"/>\n",
        cx, to_py(v.front(), y), to_py(v.back(), y), color, cx - w / 2, q3, w, q1 - q3,
        to_py(quantile(v, 0.5), y), cx + w / 2);
  };
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& g = groups[cells[i]];
    box(g.first, static_cast<double>(i) + 0.3, "#1f77b4");
    box(g.second, static_cast<double>(i) + 0.7, "#d62728");
    out += fmt::format("<title>{}</title>\n", escape(cells[i]));
  }
  out += "</svg>\n";
  return out;
}

std::vector<std::filesystem::path> emit_plots(std::span<const ReportRow> rows,
                                              std::span<const SpatialPoint> points,
                                              const std::filesystem::path& out_dir) {
  if (rows.empty()) throw Error(ErrorCode::MalformedInput, "no report rows to plot");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create " + out_dir.string() + ": " + ec.message());

  std::vector<std::pair<std::string, std::string>> keys;
  for (const auto& r : rows) {
    std::pair<std::string, std::string> k{r.dataset_regimes, r.uncertainty_kind};
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(k);
  }
  std::sort(keys.begin(), keys.end());

  std::vector<std::filesystem::path> written;
  for (const auto& [regimes, kind] : keys) {
    std::vector<ReportRow> subset;
    for (const auto& r : rows) {
      if (r.dataset_regimes == regimes && r.uncertainty_kind == kind) subset.push_back(r);
    }
    const auto path = out_dir / fmt::format("scatter_{}_{}.svg", file_token(regimes), file_token(kind));
    write_text_file(path, render_scatter_svg(subset, fmt::format("mAP vs min-UE ({}, {})", regimes, kind)));
    written.push_back(path);
  }
  if (!points.empty()) {
    const auto path = out_dir / "spatial_variance.svg";
    write_text_file(path, render_variance_svg(points));
    written.push_back(path);
  }
  return written;
}

}  // namespace obsmerge

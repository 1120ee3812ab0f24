#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "halo/analysis.hpp"
#include "halo/io.hpp"

namespace halo {

namespace fs = std::filesystem;

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string num(double v) { return std::isnan(v) ? std::string() : io::format_double(v); }

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

std::string fixed(double v, int digits = 3) {
  std::ostringstream o;
  o.precision(digits);
  o << v;
  return o.str();
}

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;
  std::vector<std::string> labels;  // optional per-point annotation
};

// Minimal SVG chart: axes with min/max ticks, points or polylines.
std::string svg_chart(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                      const std::vector<Series>& series, bool lines) {
  constexpr double W = 480, H = 360, L = 64, R = 24, T = 40, B = 52;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    for (const auto& [x, y] : s.points) {
      x0 = std::min(x0, x); x1 = std::max(x1, x);
      y0 = std::min(y0, y); y1 = std::max(y1, y);
    }
  }
  if (!std::isfinite(x0)) { x0 = 0; x1 = 1; y0 = 0; y1 = 1; }
  if (x1 == x0) { x0 -= 0.5; x1 += 0.5; }
  if (y1 == y0) { y0 -= 0.5; y1 += 0.5; }
  auto sx = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto sy = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

  std::ostringstream o;
  o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
    << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" viewBox=\"0 0 " << W << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
    << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n"
    << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
    << xml_escape(title) << "</text>\n"
    << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
    << "\" stroke=\"black\"/>\n"
    << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B
    << "\" stroke=\"black\"/>\n"
    << "<text x=\"" << L << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << fixed(x0)
    << "</text>\n"
    << "<text x=\"" << W - R << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << fixed(x1)
    << "</text>\n"
    << "<text x=\"" << L - 6 << "\" y=\"" << H - B << "\" text-anchor=\"end\">" << fixed(y0)
    << "</text>\n"
    << "<text x=\"" << L - 6 << "\" y=\"" << T + 4 << "\" text-anchor=\"end\">" << fixed(y1)
    << "</text>\n"
    << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">"
    << xml_escape(xlabel) << "</text>\n"
    << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
    << (T + H - B) / 2 << ")\">" << xml_escape(ylabel) << "</text>\n";

  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* colour = kPalette[si % std::size(kPalette)];
    o << "<g fill=\"" << colour << "\" stroke=\"" << colour << "\">\n";
    if (lines && s.points.size() > 1) {
      o << "<polyline fill=\"none\" points=\"";
      for (const auto& [x, y] : s.points) o << sx(x) << ',' << sy(y) << ' ';
      o << "\"/>\n";
    }
    for (std::size_t i = 0; i < s.points.size(); ++i) {
      const auto [x, y] = s.points[i];
      o << "<circle cx=\"" << sx(x) << "\" cy=\"" << sy(y) << "\" r=\"3\"/>\n";
      if (i < s.labels.size()) {
        o << "<text x=\"" << sx(x) + 5 << "\" y=\"" << sy(y) - 5 << "\" stroke=\"none\">"
          << xml_escape(s.labels[i]) << "</text>\n";
      }
    }
    o << "</g>\n";
    if (series.size() > 1) {
      o << "<text x=\"" << W - R - 4 << "\" y=\"" << T + 12 * si << "\" text-anchor=\"end\" fill=\""
        << colour << "\">" << xml_escape(s.name) << "</text>\n";
    }
  }
  o << "</svg>\n";
  return o.str();
}

double field(const CsvTable& t, const std::vector<std::string>& row, const std::string& col) {
  const auto& s = row.at(static_cast<std::size_t>(t.column(col)));
  return s.empty() ? std::numeric_limits<double>::quiet_NaN() : std::stod(s);
}

Series class_scatter(const CsvTable& t, const std::string& xcol, const std::string& ycol) {
  Series s{ycol + " vs " + xcol, {}, {}};
  for (const auto& row : t.rows) {
    if (field(t, row, "defined") == 0.0) continue;
    const double x = field(t, row, xcol), y = field(t, row, ycol);
    if (std::isnan(x) || std::isnan(y)) continue;
    s.points.emplace_back(x, y);
    s.labels.push_back(row.at(static_cast<std::size_t>(t.column("class"))));
  }
  return s;
}

}  // namespace

int CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw DataError("CSV has no column '" + name + "'");
  return static_cast<int>(it - header.begin());
}

CsvTable read_csv(const fs::path& path) {
  std::istringstream in(io::read_text(path));
  CsvTable t;
  std::string line;
  auto split = [](const std::string& l) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : l) {
      if (ch == ',') {
        out.push_back(cur);
        cur.clear();
      } else if (ch != '\r') {
        cur += ch;
      }
    }
    out.push_back(cur);
    return out;
  };
  if (!std::getline(in, line)) throw DataError("empty CSV file " + path.string());
  t.header = split(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto row = split(line);
    if (row.size() != t.header.size()) {
      throw DataError("ragged CSV row in " + path.string() + ": expected " +
                      std::to_string(t.header.size()) + " fields, found " + std::to_string(row.size()));
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

void emit_report(const AnalysisReport& report, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create report directory " + dir.string() + ": " + ec.message());

  std::ostringstream cs;
  cs << "class,defined,pixels,pixel_fraction,mean_radius,mean_entropy,accuracy,riemannian_variance\n";
  for (std::size_t k = 0; k < report.stats.classes.size(); ++k) {
    const auto& s = report.stats.classes[k];
    cs << k << ',' << (s.defined ? 1 : 0) << ',' << s.pixels << ',' << num(s.pixel_fraction) << ',';
    if (s.defined) {
      cs << num(s.mean_radius) << ',' << num(s.mean_entropy) << ',' << num(s.accuracy) << ','
         << num(s.riemannian_variance);
    } else {
      cs << ",,,";
    }
    cs << '\n';
  }
  io::write_text(dir / "class_stats.csv", cs.str());

  std::ostringstream cr;
  cr << "name,n,pearson,spearman\n";
  for (const auto& c : report.correlations) {
    cr << c.name << ',' << c.n << ',' << num(c.pearson) << ',' << num(c.spearman) << '\n';
  }
  io::write_text(dir / "correlations.csv", cr.str());

  std::ostringstream sd;
  sd << "round,class,ratio\n";
  for (std::size_t r = 0; r < report.selection.size(); ++r) {
    for (std::size_t k = 0; k < report.selection[r].size(); ++k) {
      sd << r + 1 << ',' << k << ',' << num(report.selection[r][k]) << '\n';
    }
  }
  io::write_text(dir / "selection_distribution.csv", sd.str());

  std::ostringstream sv;
  sv << "budget,variance\n";
  for (const auto& [b, v] : report.variance_curve) sv << num(b) << ',' << num(v) << '\n';
  io::write_text(dir / "selection_variance.csv", sv.str());

  render_report(dir);
}

std::vector<fs::path> render_report(const fs::path& dir) {
  std::vector<fs::path> written;
  auto emit = [&](const std::string& name, const std::string& svg) {
    io::write_text(dir / name, svg);
    written.push_back(dir / name);
  };

  if (fs::exists(dir / "class_stats.csv")) {
    const auto t = read_csv(dir / "class_stats.csv");
    emit("radius_vs_pixel_fraction.svg",
         svg_chart("Class mean radius vs pixel fraction", "pixel fraction", "mean radius",
                   {class_scatter(t, "pixel_fraction", "mean_radius")}, false));
    emit("entropy_vs_accuracy.svg",
         svg_chart("Class mean entropy vs accuracy", "accuracy", "mean entropy",
                   {class_scatter(t, "accuracy", "mean_entropy")}, false));
    emit("radius_vs_accuracy.svg",
         svg_chart("Class mean radius vs accuracy", "accuracy", "mean radius",
                   {class_scatter(t, "accuracy", "mean_radius")}, false));
    emit("variance_vs_accuracy.svg",
         svg_chart("Class Riemannian variance vs accuracy", "accuracy", "Riemannian variance",
                   {class_scatter(t, "accuracy", "riemannian_variance")}, false));
  }
  if (fs::exists(dir / "selection_distribution.csv")) {
    const auto t = read_csv(dir / "selection_distribution.csv");
    std::map<int, Series> by_class;
    for (const auto& row : t.rows) {
      const int k = static_cast<int>(field(t, row, "class"));
      auto& s = by_class[k];
      s.name = "class " + std::to_string(k);
      s.points.emplace_back(field(t, row, "round"), field(t, row, "ratio"));
    }
    std::vector<Series> series;
    for (auto& [k, s] : by_class) series.push_back(std::move(s));
    emit("selection_distribution.svg",
         svg_chart("Selected share of each class per round", "round", "selected / class pixels",
                   series, true));
  }
  if (fs::exists(dir / "selection_variance.csv")) {
    const auto t = read_csv(dir / "selection_variance.csv");
    Series s{"variance", {}, {}};
    for (const auto& row : t.rows) s.points.emplace_back(field(t, row, "budget"), field(t, row, "variance"));
    std::sort(s.points.begin(), s.points.end());
    emit("selection_variance.svg",
         svg_chart("Variance of the selected class distribution", "budget", "variance", {s}, true));
  }
  return written;
}

}  // namespace halo

#include "infomae/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace infomae {

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

struct Agg {
  int n = 0;
  double sum_acc = 0, sum_acc2 = 0, sum_f1 = 0, sum_f12 = 0;
  double mean_acc() const { return sum_acc / n; }
  double mean_f1() const { return sum_f1 / n; }
  double stdev_acc() const {
    if (n < 2) return 0.0;
    return std::sqrt(std::max(0.0, (sum_acc2 - sum_acc * sum_acc / n) / (n - 1)));
  }
  double stdev_f1() const {
    if (n < 2) return 0.0;
    return std::sqrt(std::max(0.0, (sum_f12 - sum_f1 * sum_f1 / n) / (n - 1)));
  }
};

std::map<std::pair<double, std::string>, Agg> aggregate(const std::vector<ResultRow>& rows) {
  std::map<std::pair<double, std::string>, Agg> out;
  for (const auto& r : rows) {
    Agg& a = out[{r.ratio, r.variant}];
    ++a.n;
    a.sum_acc += r.accuracy;
    a.sum_acc2 += r.accuracy * r.accuracy;
    a.sum_f1 += r.macro_f1;
    a.sum_f12 += r.macro_f1 * r.macro_f1;
  }
  return out;
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                          "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

}  // namespace

void write_results_tsv(const std::filesystem::path& path, const std::vector<ResultRow>& rows) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("results: cannot open " + path.string());
  f << "ratio\tvariant\tseed\taccuracy\tmacro_f1\n";
  for (const auto& r : rows)
    f << fmt("%.6g", r.ratio) << "\t" << r.variant << "\t" << r.seed << "\t"
      << fmt("%.6f", r.accuracy) << "\t" << fmt("%.6f", r.macro_f1) << "\n";
}

std::vector<ResultRow> read_results_tsv(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("results: cannot open " + path.string());
  std::string line;
  int lineno = 0;
  std::vector<ResultRow> rows;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (lineno == 1) {
      if (line != "ratio\tvariant\tseed\taccuracy\tmacro_f1")
        throw std::runtime_error(path.string() + ":1: unexpected results header");
      continue;
    }
    std::istringstream ss(line);
    ResultRow r;
    std::string ratio, seed, acc, f1;
    if (!std::getline(ss, ratio, '\t') || !std::getline(ss, r.variant, '\t') ||
        !std::getline(ss, seed, '\t') || !std::getline(ss, acc, '\t') ||
        !std::getline(ss, f1, '\t'))
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                               ": malformed results row");
    try {
      r.ratio = std::stod(ratio);
      r.seed = std::stoull(seed);
      r.accuracy = std::stod(acc);
      r.macro_f1 = std::stod(f1);
    } catch (const std::exception&) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                               ": malformed numeric field");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_aggregate_tsv(const std::filesystem::path& path, const std::vector<ResultRow>& rows) {
  auto agg = aggregate(rows);
  std::ofstream f(path);
  if (!f) throw std::runtime_error("results: cannot open " + path.string());
  f << "ratio\tvariant\tn\tmean_accuracy\tstdev_accuracy\tmean_macro_f1\tstdev_macro_f1\n";
  for (const auto& [key, a] : agg)
    f << fmt("%.6g", key.first) << "\t" << key.second << "\t" << a.n << "\t"
      << fmt("%.6f", a.mean_acc()) << "\t" << fmt("%.6f", a.stdev_acc()) << "\t"
      << fmt("%.6f", a.mean_f1()) << "\t" << fmt("%.6f", a.stdev_f1()) << "\n";
}

std::string render_summary_table(const std::vector<ResultRow>& rows) {
  auto agg = aggregate(rows);
  std::ostringstream out;
  out << "ratio    variant      n   acc(mean/std)      f1(mean/std)\n";
  out << "------------------------------------------------------------\n";
  for (const auto& [key, a] : agg) {
    char line[160];
    std::snprintf(line, sizeof(line), "%-8.4g %-12s %-3d %.4f / %.4f    %.4f / %.4f\n",
                  key.first, key.second.c_str(), a.n, a.mean_acc(), a.stdev_acc(), a.mean_f1(),
                  a.stdev_f1());
    out << line;
  }
  return out.str();
}

std::string render_report_svg(const std::vector<ResultRow>& rows) {
  auto agg = aggregate(rows);
  std::set<double> ratios;
  std::set<std::string> variants;
  for (const auto& [key, a] : agg) {
    ratios.insert(key.first);
    variants.insert(key.second);
  }

  const bool line_chart = ratios.size() >= 2;
  const bool bar_chart = variants.size() >= 2;
  const int W = 640;
  const int chart_h = 360;
  int H = 40;
  if (line_chart) H += chart_h;
  if (bar_chart) H += chart_h;
  if (!line_chart && !bar_chart) H += 40;

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
  svg << "<style>text{font-family:monospace;font-size:12px;}</style>\n";
  int y_off = 20;

  auto ymap = [](double acc, int top, int height) {
    return top + (1.0 - acc) * (height - 60) + 20;
  };

  if (line_chart) {
    svg << "<text x=\"20\" y=\"" << y_off << "\">linear-probe accuracy vs pair ratio</text>\n";
    const int top = y_off + 10, height = chart_h - 30;
    const double rmin = *ratios.begin(), rmax = *ratios.rbegin();
    auto xmap = [&](double r) { return 60.0 + (r - rmin) / (rmax - rmin) * (W - 120); };
    svg << "<rect x=\"60\" y=\"" << top + 20 << "\" width=\"" << W - 120 << "\" height=\""
        << height - 60 << "\" fill=\"none\" stroke=\"#888\"/>\n";
    for (double g = 0.0; g <= 1.0001; g += 0.25) {
      const double y = ymap(g, top, height);
      svg << "<text x=\"18\" y=\"" << fmt("%.1f", y + 4) << "\">" << fmt("%.2f", g)
          << "</text>\n";
    }
    for (double r : ratios)
      svg << "<text x=\"" << fmt("%.1f", xmap(r) - 12) << "\" y=\"" << top + height - 20
          << "\">" << fmt("%.2g", r) << "</text>\n";
    int vi = 0;
    for (const auto& v : variants) {
      const char* color = kPalette[vi % 8];
      std::string points;
      for (double r : ratios) {
        auto it = agg.find({r, v});
        if (it == agg.end()) continue;
        points += fmt("%.1f", xmap(r)) + "," + fmt("%.1f", ymap(it->second.mean_acc(), top, height)) + " ";
      }
      if (!points.empty()) {
        svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\""
            << points << "\"/>\n";
        for (double r : ratios) {
          auto it = agg.find({r, v});
          if (it == agg.end()) continue;
          svg << "<circle cx=\"" << fmt("%.1f", xmap(r)) << "\" cy=\""
              << fmt("%.1f", ymap(it->second.mean_acc(), top, height)) << "\" r=\"3\" fill=\""
              << color << "\"/>\n";
        }
      }
      svg << "<rect x=\"" << W - 150 << "\" y=\"" << top + 20 + vi * 18 << "\" width=\"12\" height=\"12\" fill=\""
          << color << "\"/>\n";
      svg << "<text x=\"" << W - 132 << "\" y=\"" << top + 30 + vi * 18 << "\" class=\"legend\">" << v
          << "</text>\n";
      ++vi;
    }
    y_off += chart_h;
  }

  if (bar_chart) {
    svg << "<text x=\"20\" y=\"" << y_off << "\">accuracy per variant (mean over seeds, max ratio)</text>\n";
    const int top = y_off + 10, height = chart_h - 30;
    const double rmax = *ratios.rbegin();
    const int n = static_cast<int>(variants.size());
    const double slot = static_cast<double>(W - 120) / n;
    svg << "<rect x=\"60\" y=\"" << top + 20 << "\" width=\"" << W - 120 << "\" height=\""
        << height - 60 << "\" fill=\"none\" stroke=\"#888\"/>\n";
    int vi = 0;
    for (const auto& v : variants) {
      auto it = agg.find({rmax, v});
      if (it != agg.end()) {
        const double acc = it->second.mean_acc();
        const double y = ymap(acc, top, height);
        const double bar_bottom = ymap(0.0, top, height);
        svg << "<rect x=\"" << fmt("%.1f", 60 + slot * vi + slot * 0.2) << "\" y=\"" << fmt("%.1f", y)
            << "\" width=\"" << fmt("%.1f", slot * 0.6) << "\" height=\""
            << fmt("%.1f", bar_bottom - y) << "\" fill=\"" << kPalette[vi % 8] << "\"/>\n";
        svg << "<text x=\"" << fmt("%.1f", 60 + slot * vi + slot * 0.2) << "\" y=\""
            << fmt("%.1f", y - 4) << "\">" << fmt("%.3f", acc) << "</text>\n";
      }
      svg << "<text x=\"" << fmt("%.1f", 60 + slot * vi + slot * 0.2) << "\" y=\""
          << top + height - 20 << "\">" << v << "</text>\n";
      ++vi;
    }
    y_off += chart_h;
  }

  if (!line_chart && !bar_chart)
    svg << "<text x=\"20\" y=\"" << y_off + 20 << "\">single result row; charts need >= 2 points</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace infomae

#include "thyrovol/obstats/report.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "thyrovol/core/text.hpp"

namespace thyrovol::obstats {

namespace {

std::string pm(double m, double s) { return format_fixed(m, 2) + " +- " + format_fixed(s, 2); }

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// Rounds a span outwards to a tick step of 1, 2 or 5 times a power of ten.
double nice_step(double span) {
  if (!(span > 0.0)) return 1.0;
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double f = raw / mag;
  if (f <= 1.0) return mag;
  if (f <= 2.0) return 2.0 * mag;
  if (f <= 5.0) return 5.0 * mag;
  return 10.0 * mag;
}

}  // namespace

void write_comparisons_csv(const std::vector<Comparison>& rows, std::ostream& out) {
  out << "comparison,n,bias,sd,loa_low,loa_high,t,df,p,significant\n";
  for (const auto& c : rows) {
    const auto& a = c.agreement;
    const auto& t = c.test;
    out << c.name << ',' << a.n << ',' << format_double(a.bias) << ',' << format_double(a.sd) << ','
        << format_double(a.loa_low) << ',' << format_double(a.loa_high) << ',' << format_double(t.t) << ','
        << format_double(t.df) << ',' << format_double(t.p) << ',' << (t.significant ? 1 : 0) << '\n';
  }
}

void write_intraobserver_table(const std::vector<IntraobserverResult>& us2d,
                               const std::vector<IntraobserverResult>& us3d, const StatsConfig& cfg,
                               std::ostream& out) {
  out << "observer,method,us2d_percent,us3d_percent,p\n";
  for (const auto& a : us2d) {
    for (const auto& b : us3d) {
      if (a.observer != b.observer) continue;
      const auto t = compare_modality_variability(a, b, cfg);
      out << a.observer << ',' << to_string(a.variability.method) << ','
          << pm(a.variability.mean, a.variability.sd) << ',' << pm(b.variability.mean, b.variability.sd) << ','
          << format_fixed(t.p, 4) << '\n';
    }
  }
}

void write_interobserver_table(const std::vector<Comparison>& us2d, const std::vector<Comparison>& us3d,
                               std::ostream& out) {
  out << "modality,pair,difference_ml,p\n";
  auto emit = [&](const char* m, const std::vector<Comparison>& rows) {
    for (const auto& c : rows) {
      // name is inter_<modality>_<a>_<b>
      const auto parts = split(c.name, '_');
      const std::string pair = parts.size() >= 4 ? parts[2] + "-" + parts[3] : c.name;
      out << m << ',' << pair << ',' << pm(c.agreement.bias, c.agreement.sd) << ',' << format_fixed(c.test.p, 4)
          << '\n';
    }
  };
  emit("us2d", us2d);
  emit("us3d", us3d);
}

void write_reference_table(const std::vector<ReferenceComparison>& us2d,
                           const std::vector<ReferenceComparison>& us3d, std::ostream& out) {
  out << "modality,observer,volume_ml,reference_ml,p\n";
  auto emit = [&](const char* m, const std::vector<ReferenceComparison>& rows) {
    for (const auto& r : rows) {
      out << m << ',' << r.observer << ',' << pm(r.volume_mean, r.volume_sd) << ','
          << pm(r.reference_mean, r.reference_sd) << ',' << format_fixed(r.comparison.test.p, 4) << '\n';
    }
  };
  emit("us2d", us2d);
  emit("us3d", us3d);
}

std::string bland_altman_svg(const BlandAltmanResult& r, const std::string& title) {
  constexpr double W = 560, H = 400, L = 70, R = 130, T = 40, B = 55;
  const double pw = W - L - R, ph = H - T - B;

  double xmin = 0, xmax = 1, ymin = std::min(r.loa_low, 0.0), ymax = std::max(r.loa_high, 0.0);
  if (!r.points.empty()) {
    xmin = xmax = r.points.front().mean;
    for (const auto& p : r.points) {
      xmin = std::min(xmin, p.mean);
      xmax = std::max(xmax, p.mean);
      ymin = std::min(ymin, p.difference);
      ymax = std::max(ymax, p.difference);
    }
  }
  if (xmax - xmin < 1e-9) {
    xmin -= 1.0;
    xmax += 1.0;
  }
  if (ymax - ymin < 1e-9) {
    ymin -= 1.0;
    ymax += 1.0;
  }
  const double xs = nice_step(xmax - xmin), ys = nice_step(ymax - ymin);
  xmin = std::floor(xmin / xs) * xs;
  xmax = std::ceil(xmax / xs) * xs;
  ymin = std::floor(ymin / ys) * ys;
  ymax = std::ceil(ymax / ys) * ys;

  auto px = [&](double x) { return format_fixed(L + (x - xmin) / (xmax - xmin) * pw, 2); };
  auto py = [&](double y) { return format_fixed(T + (ymax - y) / (ymax - ymin) * ph, 2); };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
    << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << xml_escape(title)
    << "</text>\n";
  s << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"black\"/>\n";

  for (double x = xmin; x <= xmax + 1e-9 * xs; x += xs) {
    s << "<line x1=\"" << px(x) << "\" y1=\"" << T + ph << "\" x2=\"" << px(x) << "\" y2=\"" << T + ph + 5
      << "\" stroke=\"black\"/>\n";
    s << "<text x=\"" << px(x) << "\" y=\"" << T + ph + 18 << "\" text-anchor=\"middle\">"
      << format_fixed(x, xs < 1 ? 1 : 0) << "</text>\n";
  }
  for (double y = ymin; y <= ymax + 1e-9 * ys; y += ys) {
    s << "<line x1=\"" << L - 5 << "\" y1=\"" << py(y) << "\" x2=\"" << L << "\" y2=\"" << py(y)
      << "\" stroke=\"black\"/>\n";
    s << "<text x=\"" << L - 8 << "\" y=\"" << py(y) << "\" text-anchor=\"end\" dominant-baseline=\"middle\">"
      << format_fixed(y, ys < 1 ? 1 : 0) << "</text>\n";
  }
  s << "<text x=\"" << L + pw / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">Mean of pair (ml)</text>\n";
  s << "<text x=\"18\" y=\"" << T + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " << T + ph / 2
    << ")\">Difference (ml)</text>\n";

  auto hline = [&](double y, const char* dash, const std::string& label) {
    s << "<line x1=\"" << L << "\" y1=\"" << py(y) << "\" x2=\"" << L + pw << "\" y2=\"" << py(y)
      << "\" stroke=\"black\"" << dash << "/>\n";
    s << "<text x=\"" << L + pw + 6 << "\" y=\"" << py(y) << "\" dominant-baseline=\"middle\">" << label
      << "</text>\n";
  };
  hline(r.bias, "", "mean " + format_fixed(r.bias, 2));
  hline(r.loa_high, " stroke-dasharray=\"6 4\"", "+LoA " + format_fixed(r.loa_high, 2));
  hline(r.loa_low, " stroke-dasharray=\"6 4\"", "-LoA " + format_fixed(r.loa_low, 2));

  for (const auto& p : r.points) {
    s << "<circle cx=\"" << px(p.mean) << "\" cy=\"" << py(p.difference) << "\" r=\"3\" fill=\"steelblue\"/>\n";
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace thyrovol::obstats

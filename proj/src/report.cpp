#include "cyclemon/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cyclemon/error.hpp"

namespace cyclemon::report {

namespace {

std::string f6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string f2(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
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

}  // namespace

std::string results_csv(const std::vector<experiments::ConfigResult>& rows) {
  std::ostringstream out;
  out << "id,mean_error,std_error,repeats,seed\n";
  for (const auto& r : rows) {
    out << r.id << ',' << f6(r.mean_error) << ','
        << (r.has_std ? f6(r.std_error) : std::string()) << ',' << r.repeats
        << ',' << r.seed << '\n';
  }
  return out.str();
}

std::string results_svg(const std::vector<experiments::ConfigResult>& rows,
                        const std::string& title) {
  constexpr double kLeft = 56.0, kRight = 16.0, kTop = 30.0, kBottom = 92.0;
  constexpr double kPlotH = 260.0, kSlot = 46.0, kBar = 28.0;
  const double plot_w = std::max<double>(kSlot * rows.size(), 140.0);
  const double width = kLeft + plot_w + kRight;
  const double height = kTop + kPlotH + kBottom;

  auto y_of = [&](double v) {
    const double c = std::clamp(v, 0.0, 1.0);
    return kTop + (1.0 - c) * kPlotH;
  };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f2(width)
    << "\" height=\"" << f2(height) << "\" viewBox=\"0 0 " << f2(width) << ' '
    << f2(height) << "\" font-family=\"sans-serif\">\n";
  s << "<rect x=\"0\" y=\"0\" width=\"" << f2(width) << "\" height=\""
    << f2(height) << "\" fill=\"white\"/>\n";
  s << "<text x=\"" << f2(kLeft) << "\" y=\"18\" font-size=\"13\">"
    << xml_escape(title) << "</text>\n";

  for (int tick = 0; tick <= 4; ++tick) {
    const double v = 0.25 * tick;
    const double y = y_of(v);
    s << "<line x1=\"" << f2(kLeft) << "\" y1=\"" << f2(y) << "\" x2=\""
      << f2(kLeft + plot_w) << "\" y2=\"" << f2(y)
      << "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
    s << "<text x=\"" << f2(kLeft - 6.0) << "\" y=\"" << f2(y + 3.0)
      << "\" font-size=\"10\" text-anchor=\"end\">" << f2(v) << "</text>\n";
  }
  s << "<line x1=\"" << f2(kLeft) << "\" y1=\"" << f2(kTop) << "\" x2=\""
    << f2(kLeft) << "\" y2=\"" << f2(kTop + kPlotH)
    << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
  s << "<line x1=\"" << f2(kLeft) << "\" y1=\"" << f2(kTop + kPlotH)
    << "\" x2=\"" << f2(kLeft + plot_w) << "\" y2=\"" << f2(kTop + kPlotH)
    << "\" stroke=\"black\" stroke-width=\"1\"/>\n";

  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const double x = kLeft + kSlot * static_cast<double>(i) +
                     (kSlot - kBar) / 2.0;
    const double cx = x + kBar / 2.0;
    const double y = y_of(r.mean_error);
    s << "<rect x=\"" << f2(x) << "\" y=\"" << f2(y) << "\" width=\""
      << f2(kBar) << "\" height=\"" << f2(kTop + kPlotH - y)
      << "\" fill=\"#4878a8\" data-id=\"" << xml_escape(r.id)
      << "\" data-mean=\"" << f6(r.mean_error) << "\"/>\n";
    if (r.has_std) {
      const double y_hi = y_of(r.mean_error + r.std_error);
      const double y_lo = y_of(r.mean_error - r.std_error);
      s << "<line x1=\"" << f2(cx) << "\" y1=\"" << f2(y_hi) << "\" x2=\""
        << f2(cx) << "\" y2=\"" << f2(y_lo)
        << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
      for (double yy : {y_hi, y_lo}) {
        s << "<line x1=\"" << f2(cx - 5.0) << "\" y1=\"" << f2(yy)
          << "\" x2=\"" << f2(cx + 5.0) << "\" y2=\"" << f2(yy)
          << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
      }
    }
    const double lx = cx;
    const double ly = kTop + kPlotH + 14.0;
    s << "<text x=\"" << f2(lx) << "\" y=\"" << f2(ly)
      << "\" font-size=\"9\" text-anchor=\"end\" transform=\"rotate(-40 "
      << f2(lx) << ' ' << f2(ly) << ")\">" << xml_escape(r.id) << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

void write_text(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec)
      raise_data("IoError", "cannot create " + path.parent_path().string() +
                                ": " + ec.message());
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) raise_data("IoError", "cannot write " + path.string());
  f << content;
  f.close();
  if (!f.good()) raise_data("IoError", "failed writing " + path.string());
}

}  // namespace cyclemon::report

namespace cyclemon::experiments {

void emit_report(const ExperimentResult& result,
                 const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec)
    raise_data("IoError", "cannot create " + dir.string() + ": " + ec.message());
  report::write_text(dir / "results.csv", report::results_csv(result.configs));
  report::write_text(dir / "results.svg",
                     report::results_svg(result.configs, result.preset));
}

}  // namespace cyclemon::experiments

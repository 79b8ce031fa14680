#include "genplan/svg.hpp"

#include <cstdio>
#include <sstream>

namespace genplan {
namespace {

class Canvas {
 public:
  explicit Canvas(const SvgView& v) : v_(v) {
    const double w = (v.x_max - v.x_min) * v.px_per_m;
    const double h = (v.y_max - v.y_min) * v.px_per_m;
    out_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(w) << "\" height=\"" << num(h)
         << "\" viewBox=\"0 0 " << num(w) << ' ' << num(h) << "\">\n"
         << "<style>.obstacle{fill:#555}.roi{fill:none;stroke:#c80;stroke-dasharray:4 3}"
            ".sample{fill:none;stroke:#9bd;stroke-width:0.6}.sample.masked{stroke:#e99}"
            ".chosen,.plan{fill:none;stroke:#15c;stroke-width:1.5}.mppi .plan{stroke:#1a5}"
            ".executed{fill:none;stroke:#000;stroke-width:2}.mppi .executed{stroke-dasharray:6 4}</style>\n"
         << "<rect width=\"100%\" height=\"100%\" fill=\"#fff\"/>\n";
  }

  static std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
  }
  double px(double x) const { return (x - v_.x_min) * v_.px_per_m; }
  double py(double y) const { return (v_.y_max - y) * v_.px_per_m; }

  std::string points(const PosePath& p) const {
    std::string s;
    for (std::size_t i = 0; i < p.samples.size(); ++i) {
      if (i) s += ' ';
      s += num(px(p.samples[i].x)) + ',' + num(py(p.samples[i].y));
    }
    return s;
  }
  std::string d(const PosePath& p) const {
    std::string s;
    for (std::size_t i = 0; i < p.samples.size(); ++i) {
      s += i ? " L" : "M";
      s += num(px(p.samples[i].x)) + ' ' + num(py(p.samples[i].y));
    }
    return s;
  }

  void obstacles(const World& w) {
    for (const auto& o : w.obstacles()) {
      out_ << "<circle class=\"obstacle\" cx=\"" << num(px(o.cx)) << "\" cy=\"" << num(py(o.cy)) << "\" r=\""
           << num(o.r * v_.px_per_m) << "\"/>\n";
    }
  }

  std::ostringstream& out() { return out_; }
  std::string finish() {
    out_ << "</svg>\n";
    return out_.str();
  }

 private:
  SvgView v_;
  std::ostringstream out_;
};

}  // namespace

std::string render_plan_svg(const World& world, const PlanResult& result, const AtomicGrid& roi,
                            const SvgView& view) {
  Canvas c(view);
  c.obstacles(world);
  const Point2 corners[4] = {{roi.x_min, roi.y_min}, {roi.x_max, roi.y_min}, {roi.x_max, roi.y_max},
                             {roi.x_min, roi.y_max}};
  c.out() << "<polygon class=\"roi\" points=\"";
  for (int i = 0; i < 4; ++i) {
    const Point2 w = to_world(result.origin, corners[i].x, corners[i].y);
    c.out() << (i ? " " : "") << Canvas::num(c.px(w.x)) << ',' << Canvas::num(c.py(w.y));
  }
  c.out() << "\"/>\n";
  for (const auto& s : result.samples) {
    c.out() << "<polyline class=\"sample" << (s.masked ? " masked" : "") << "\" points=\"" << c.points(s.world_path)
            << "\"/>\n";
  }
  if (!result.world_path.samples.empty()) {
    c.out() << "<path class=\"chosen" << (result.stats.fallback ? " fallback" : "") << "\" d=\""
            << c.d(result.world_path) << "\"/>\n";
  }
  return c.finish();
}

std::string render_episode_svg(const World& world, const EpisodeTrace& trace, ControllerKind controller,
                               const SvgView& view) {
  Canvas c(view);
  c.obstacles(world);
  c.out() << "<g class=\"" << to_string(controller) << "\">\n";
  for (const auto& p : trace.plans) c.out() << "<path class=\"plan\" d=\"" << c.d(p) << "\"/>\n";
  c.out() << "<path class=\"executed\" d=\"" << c.d(trace_path(trace)) << "\"/>\n</g>\n";
  return c.finish();
}

}  // namespace genplan

#include <algorithm>
#include <cmath>
#include <vector>

#include "stackcount/occupancy.h"

namespace stackcount {
namespace {

constexpr double kPi = 3.14159265358979323846;

// Nearest container run strictly on one side of the centroid along direction
// (sgn*dx, sgn*dy), in unit steps. Returns {near edge, far edge} step counts,
// or {0, 0} when no run is hit before leaving the image.
struct Run {
  long a = 0, b = 0;
};

Run nearest_run(const Mask& m, double cx, double cy, double dx, double dy, double sgn) {
  Run r;
  for (long s = 1;; ++s) {
    long px = std::lround(cx + sgn * double(s) * dx);
    long py = std::lround(cy + sgn * double(s) * dy);
    if (px < 0 || py < 0 || px >= m.width || py >= m.height) break;
    if (m.get(int(px), int(py))) {
      if (r.a == 0) r.a = s;
      r.b = s;
    } else if (r.a != 0) {
      break;
    }
  }
  return r;
}

}  // namespace

ThicknessEstimate estimate_thickness(const Mask& container, const Mask&, const DepthMap&) {
  int64_t n = 0;
  double sx = 0.0, sy = 0.0;
  for (int v = 0; v < container.height; ++v)
    for (int u = 0; u < container.width; ++u)
      if (container.get(u, v)) {
        ++n;
        sx += u;
        sy += v;
      }
  if (n == 0) fail(errc::generation, "container mask is empty");
  double cx = sx / double(n), cy = sy / double(n);
  if (container.get(int(std::lround(cx)), int(std::lround(cy))))
    fail(errc::generation, "container mask has no cavity at its centroid");

  std::vector<double> ratios;
  for (int k = 0; k < 8; ++k) {
    double th = double(k) * kPi / 8.0;
    double dx = std::cos(th), dy = std::sin(th);
    Run pos = nearest_run(container, cx, cy, dx, dy, +1.0);
    Run neg = nearest_run(container, cx, cy, dx, dy, -1.0);
    if (pos.a == 0 || neg.a == 0) continue;  // wall not seen on both sides
    double outer = double(pos.b + neg.b) + 1.0;  // outer-edge to outer-edge
    double inner = double(pos.a + neg.a) - 1.0;  // cavity between inner edges
    if (!(inner > 0.0) || inner >= outer) continue;
    ratios.push_back((outer - inner) / 2.0 / outer);
  }
  if (ratios.empty()) fail(errc::generation, "no cavity visible in container mask");

  std::sort(ratios.begin(), ratios.end());
  size_t mid = ratios.size() / 2;
  double med = ratios.size() % 2 ? ratios[mid] : 0.5 * (ratios[mid - 1] + ratios[mid]);
  med = std::clamp(med, 0.0, std::nextafter(0.5, 0.0));
  return {med, int(ratios.size())};
}

}  // namespace stackcount

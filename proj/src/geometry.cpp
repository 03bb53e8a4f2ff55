#include "steerlab/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "steerlab/errors.hpp"

namespace steerlab::geometry {

namespace {

double checked(double v, const char* what, double t) {
  if (!std::isfinite(v)) {
    throw DomainError(std::string("non-finite ") + what + " at t=" + std::to_string(t));
  }
  return v;
}

// Derivatives on a uniform grid: central differences inside, one-sided
// second-order stencils at both ends.
void grid_derivatives(std::span<const double> f, double h, std::vector<double>& d1,
                      std::vector<double>& d2) {
  const std::size_t n = f.size();
  d1.assign(n, 0.0);
  d2.assign(n, 0.0);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    d1[i] = (f[i + 1] - f[i - 1]) / (2.0 * h);
    d2[i] = (f[i + 1] - 2.0 * f[i] + f[i - 1]) / (h * h);
  }
  d1[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
  d1[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * h);
  d2[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / (h * h);
  d2[n - 1] = (2.0 * f[n - 1] - 5.0 * f[n - 2] + 4.0 * f[n - 3] - f[n - 4]) / (h * h);

  // Second differences below the rounding floor are noise; left in, they
  // give straight lines a spurious curvature^(1/3) integral.
  double scale = 0.0;
  for (double v : f) scale = std::max(scale, std::abs(v));
  const double floor = 64.0 * std::numeric_limits<double>::epsilon() * scale / (h * h);
  for (double& v : d2) {
    if (std::abs(v) < floor) v = 0.0;
  }
}

double trapezoid(std::span<const double> s, const auto& integrand) {
  double acc = 0.0;
  for (std::size_t i = 1; i < s.size(); ++i) {
    acc += 0.5 * (integrand(i - 1) + integrand(i)) * (s[i] - s[i - 1]);
  }
  return acc;
}

}  // namespace

CurveSamples::CurveSamples(std::vector<Point> points, std::vector<double> s,
                           std::vector<double> kappa)
    : points_(std::move(points)), s_(std::move(s)), kappa_(std::move(kappa)) {
  if (points_.size() < 2) throw ValidationError("curve needs at least 2 points");
  if (s_.size() != points_.size() || kappa_.size() != points_.size()) {
    throw ShapeError("curve arrays differ in length");
  }
  if (s_.front() != 0.0) throw ValidationError("arc length must start at 0");
  for (std::size_t i = 1; i < s_.size(); ++i) {
    if (!(s_[i] > s_[i - 1])) throw ValidationError("arc length not strictly increasing");
  }
  for (double& k : kappa_) {
    if (!std::isfinite(k)) throw DomainError("non-finite curvature");
    k = std::abs(k);
  }
}

CurveSamples CurveSamples::from_polyline(std::vector<Point> points) {
  const std::size_t n = points.size();
  if (n < 2) throw ValidationError("polyline needs at least 2 points");
  std::vector<double> s(n, 0.0);
  std::vector<double> seg(n - 1);
  for (std::size_t i = 1; i < n; ++i) {
    seg[i - 1] = std::hypot(points[i].x - points[i - 1].x, points[i].y - points[i - 1].y);
    s[i] = s[i - 1] + seg[i - 1];
  }
  std::vector<double> kappa(n, 0.0);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double ax = points[i].x - points[i - 1].x;
    const double ay = points[i].y - points[i - 1].y;
    const double bx = points[i + 1].x - points[i].x;
    const double by = points[i + 1].y - points[i].y;
    const double turn = std::atan2(ax * by - ay * bx, ax * bx + ay * by);
    kappa[i] = std::abs(turn) / (0.5 * (seg[i - 1] + seg[i]));
  }
  return CurveSamples(std::move(points), std::move(s), std::move(kappa));
}

CurveSamples CurveSamples::flipped() const {
  std::vector<Point> pts(points_);
  for (Point& p : pts) p.y = -p.y;
  return CurveSamples(std::move(pts), s_, kappa_);
}

CurveSamples sample_curve(const PlaneCurve& curve, ParamInterval domain, int n_samples) {
  if (n_samples < kMinCurveSamples) {
    throw ValidationError("n_samples must be >= " + std::to_string(kMinCurveSamples));
  }
  if (!(domain.t1 > domain.t0)) throw ValidationError("empty parameter interval");
  if (!curve.x || !curve.y) throw ValidationError("curve functions missing");

  const auto n = static_cast<std::size_t>(n_samples);
  const double h = (domain.t1 - domain.t0) / static_cast<double>(n - 1);
  std::vector<double> t(n), xs(n), ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    t[i] = (i + 1 == n) ? domain.t1 : domain.t0 + h * static_cast<double>(i);
    xs[i] = checked(curve.x(t[i]), "x", t[i]);
    ys[i] = checked(curve.y(t[i]), "y", t[i]);
  }

  std::vector<double> dx, dy, ddx, ddy;
  if (curve.derivatives) {
    const auto& d = *curve.derivatives;
    dx.resize(n);
    dy.resize(n);
    ddx.resize(n);
    ddy.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      dx[i] = checked(d.dx(t[i]), "x'", t[i]);
      dy[i] = checked(d.dy(t[i]), "y'", t[i]);
      ddx[i] = checked(d.ddx(t[i]), "x''", t[i]);
      ddy[i] = checked(d.ddy(t[i]), "y''", t[i]);
    }
  } else {
    grid_derivatives(xs, h, dx, ddx);
    grid_derivatives(ys, h, dy, ddy);
  }

  std::vector<Point> pts(n);
  std::vector<double> s(n, 0.0), kappa(n), speed(n);
  for (std::size_t i = 0; i < n; ++i) {
    pts[i] = {xs[i], ys[i]};
    speed[i] = std::hypot(dx[i], dy[i]);
    if (!(speed[i] > 0.0)) {
      throw DomainError("curve is not regular at t=" + std::to_string(t[i]));
    }
    kappa[i] = std::abs(dx[i] * ddy[i] - dy[i] * ddx[i]) / (speed[i] * speed[i] * speed[i]);
  }
  for (std::size_t i = 1; i < n; ++i) {
    s[i] = s[i - 1] + 0.5 * (speed[i - 1] + speed[i]) * (t[i] - t[i - 1]);
  }
  return CurveSamples(std::move(pts), std::move(s), std::move(kappa));
}

double arc_length(const CurveSamples& c) { return c.s().back(); }

double total_curvature(const CurveSamples& c) {
  const auto k = c.kappa();
  return trapezoid(c.s(), [&](std::size_t i) { return k[i]; });
}

double nl_integral(const CurveSamples& c) {
  const auto k = c.kappa();
  return trapezoid(c.s(), [&](std::size_t i) { return std::cbrt(k[i]); });
}

double max_curvature(const CurveSamples& c) {
  const auto k = c.kappa();
  return *std::max_element(k.begin(), k.end());
}

Tunnel::Tunnel(CurveSamples centerline, double width)
    : centerline_(std::move(centerline)), width_(width) {
  if (!(width_ > 0.0) || !std::isfinite(width_)) {
    throw ValidationError("tunnel width must be positive");
  }
}

namespace {

struct Nearest {
  std::size_t index = 0;
  double u = 0.0;
  double d2 = std::numeric_limits<double>::infinity();
};

// Squared distance from p to segment i; keeps the lowest index on ties.
inline void consider_segment(std::span<const Point> pts, std::size_t i, Point p, Nearest& best) {
  const Point a = pts[i];
  const Point b = pts[i + 1];
  const double ex = b.x - a.x;
  const double ey = b.y - a.y;
  const double len2 = ex * ex + ey * ey;
  double u = len2 > 0.0 ? ((p.x - a.x) * ex + (p.y - a.y) * ey) / len2 : 0.0;
  u = std::clamp(u, 0.0, 1.0);
  const double fx = a.x + u * ex - p.x;
  const double fy = a.y + u * ey - p.y;
  const double d2 = fx * fx + fy * fy;
  if (d2 < best.d2 || (d2 == best.d2 && i < best.index)) {
    best.d2 = d2;
    best.index = i;
    best.u = u;
  }
}

OffsetQuery make_query(const Tunnel& tunnel, Point p, const Nearest& best) {
  const auto pts = tunnel.centerline().points();
  const auto s = tunnel.centerline().s();
  const std::size_t best_i = best.index;
  const double best_u = best.u;
  const Point a = pts[best_i];
  const Point b = pts[best_i + 1];
  double tx = b.x - a.x;
  double ty = b.y - a.y;
  // At a shared vertex use the bisecting tangent so the side is stable.
  if (best_u == 1.0 && best_i + 2 < pts.size()) {
    const double n1 = std::hypot(tx, ty);
    const double nx = pts[best_i + 2].x - b.x;
    const double ny = pts[best_i + 2].y - b.y;
    const double n2 = std::hypot(nx, ny);
    if (n1 > 0.0 && n2 > 0.0) {
      tx = tx / n1 + nx / n2;
      ty = ty / n1 + ny / n2;
    }
  } else if (best_u == 0.0 && best_i > 0) {
    const double n1 = std::hypot(tx, ty);
    const double px = a.x - pts[best_i - 1].x;
    const double py = a.y - pts[best_i - 1].y;
    const double n0 = std::hypot(px, py);
    if (n1 > 0.0 && n0 > 0.0) {
      tx = tx / n1 + px / n0;
      ty = ty / n1 + py / n0;
    }
  }
  const double fx = a.x + best_u * (b.x - a.x);
  const double fy = a.y + best_u * (b.y - a.y);
  const double cross = tx * (p.y - fy) - ty * (p.x - fx);
  const double dist = std::sqrt(best.d2);

  OffsetQuery q;
  q.offset = cross < 0.0 ? -dist : dist;
  q.s_at_nearest = s[best_i] + best_u * (s[best_i + 1] - s[best_i]);
  q.inside = dist <= 0.5 * tunnel.width();
  return q;
}

}  // namespace

OffsetQuery signed_offset(const Tunnel& tunnel, Point p) {
  const auto pts = tunnel.centerline().points();
  const std::size_t nseg = pts.size() - 1;
  Nearest best;
  for (std::size_t i = 0; i < nseg; ++i) {
    const Point a = pts[i];
    const Point b = pts[i + 1];
    // Bounding-box lower bound; skips the projection for far segments.
    const double gx = std::max({std::min(a.x, b.x) - p.x, 0.0, p.x - std::max(a.x, b.x)});
    const double gy = std::max({std::min(a.y, b.y) - p.y, 0.0, p.y - std::max(a.y, b.y)});
    if (gx * gx + gy * gy > best.d2) continue;
    consider_segment(pts, i, p, best);
  }
  return make_query(tunnel, p, best);
}

OffsetIndex::OffsetIndex(const Tunnel& tunnel, double cell_size)
    : tunnel_(tunnel), cell_(cell_size > 0.0 ? cell_size : tunnel.width()) {
  const auto pts = tunnel_.centerline().points();
  double x0 = pts[0].x, x1 = pts[0].x, y0 = pts[0].y, y1 = pts[0].y;
  for (const Point& q : pts) {
    x0 = std::min(x0, q.x);
    x1 = std::max(x1, q.x);
    y0 = std::min(y0, q.y);
    y1 = std::max(y1, q.y);
  }
  origin_ = {x0, y0};
  nx_ = static_cast<long>(std::floor((x1 - x0) / cell_)) + 1;
  ny_ = static_cast<long>(std::floor((y1 - y0) / cell_)) + 1;
  buckets_.assign(static_cast<std::size_t>(nx_ * ny_), {});
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const long cx0 = cell_x(std::min(pts[i].x, pts[i + 1].x));
    const long cx1 = cell_x(std::max(pts[i].x, pts[i + 1].x));
    const long cy0 = cell_y(std::min(pts[i].y, pts[i + 1].y));
    const long cy1 = cell_y(std::max(pts[i].y, pts[i + 1].y));
    for (long cy = cy0; cy <= cy1; ++cy) {
      for (long cx = cx0; cx <= cx1; ++cx) buckets_[static_cast<std::size_t>(cy * nx_ + cx)].push_back(i);
    }
  }
}

long OffsetIndex::cell_x(double x) const {
  return std::clamp(static_cast<long>(std::floor((x - origin_.x) / cell_)), 0L, nx_ - 1);
}

long OffsetIndex::cell_y(double y) const {
  return std::clamp(static_cast<long>(std::floor((y - origin_.y) / cell_)), 0L, ny_ - 1);
}

OffsetQuery OffsetIndex::query(Point p) const {
  const auto pts = tunnel_.centerline().points();
  const long cx = cell_x(p.x);
  const long cy = cell_y(p.y);
  Nearest best;
  const long max_r = std::max({cx, nx_ - 1 - cx, cy, ny_ - 1 - cy});
  for (long r = 0; r <= max_r; ++r) {
    for (long y = cy - r; y <= cy + r; ++y) {
      if (y < 0 || y >= ny_) continue;
      const bool edge_row = y == cy - r || y == cy + r;
      for (long x = cx - r; x <= cx + r; x += (edge_row ? 1 : 2 * r)) {
        if (x >= 0 && x < nx_) {
          for (std::size_t i : buckets_[static_cast<std::size_t>(y * nx_ + x)]) consider_segment(pts, i, p, best);
        }
        if (r == 0) break;
      }
    }
    // Unvisited segments lie entirely in cells outside the visited block;
    // their distance is at least the gap from p to that block's open sides.
    double bound = std::numeric_limits<double>::infinity();
    if (cx - r > 0) bound = std::min(bound, p.x - (origin_.x + static_cast<double>(cx - r) * cell_));
    if (cx + r < nx_ - 1) bound = std::min(bound, origin_.x + static_cast<double>(cx + r + 1) * cell_ - p.x);
    if (cy - r > 0) bound = std::min(bound, p.y - (origin_.y + static_cast<double>(cy - r) * cell_));
    if (cy + r < ny_ - 1) bound = std::min(bound, origin_.y + static_cast<double>(cy + r + 1) * cell_ - p.y);
    if (std::isinf(bound)) break;
    if (bound > 0.0 && bound * bound > best.d2) break;
  }
  return make_query(tunnel_, p, best);
}

}  // namespace steerlab::geometry

#pragma once

// Plane curves sampled for steering tasks: arc length, curvature integrals,
// and point-vs-tunnel queries. All lengths are in pixels.

#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace steerlab::geometry {

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

using ScalarFn = std::function<double(double)>;

// First and second derivatives of both coordinates with respect to the
// curve parameter. When absent, sample_curve falls back to finite
// differences on the sample grid.
struct CurveDerivatives {
  ScalarFn dx;
  ScalarFn dy;
  ScalarFn ddx;
  ScalarFn ddy;
};

struct PlaneCurve {
  ScalarFn x;
  ScalarFn y;
  std::optional<CurveDerivatives> derivatives;
};

struct ParamInterval {
  double t0 = 0.0;
  double t1 = 1.0;
};

// Ordered centerline samples. `s` is cumulative arc length (s[0] == 0,
// strictly increasing) and `kappa` the unsigned curvature at each point.
class CurveSamples {
 public:
  CurveSamples(std::vector<Point> points, std::vector<double> s,
               std::vector<double> kappa);

  // Builds samples from a bare polyline: s by chord summation and
  // curvature from the turning angle at each interior vertex divided by
  // the mean length of the two adjacent segments (zero at the ends).
  static CurveSamples from_polyline(std::vector<Point> points);

  std::span<const Point> points() const { return points_; }
  std::span<const double> s() const { return s_; }
  std::span<const double> kappa() const { return kappa_; }
  std::size_t size() const { return points_.size(); }

  // Mirror across the horizontal axis (y -> -y).
  CurveSamples flipped() const;

 private:
  std::vector<Point> points_;
  std::vector<double> s_;
  std::vector<double> kappa_;
};

inline constexpr int kMinCurveSamples = 64;

// Samples `curve` on a uniform parameter grid. Arc length is accumulated
// by the trapezoid rule on |r'(t)|. Throws DomainError when a function
// returns a non-finite value or the preconditions fail.
CurveSamples sample_curve(const PlaneCurve& curve, ParamInterval domain,
                          int n_samples);

double arc_length(const CurveSamples& c);

// Total absolute turning: trapezoid integral of |kappa| ds.
double total_curvature(const CurveSamples& c);

// Trapezoid integral of |kappa|^(1/3) ds.
double nl_integral(const CurveSamples& c);

// Largest sampled curvature; the reciprocal is the tightest radius.
double max_curvature(const CurveSamples& c);

class Tunnel {
 public:
  Tunnel(CurveSamples centerline, double width);

  const CurveSamples& centerline() const { return centerline_; }
  double width() const { return width_; }
  Point start() const { return centerline_.points().front(); }
  Point end() const { return centerline_.points().back(); }

  Tunnel flipped() const { return Tunnel(centerline_.flipped(), width_); }

 private:
  CurveSamples centerline_;
  double width_;
};

struct OffsetQuery {
  double offset = 0.0;        // signed; positive to the left of travel
  double s_at_nearest = 0.0;  // arc length at the foot point
  bool inside = false;        // |offset| <= width / 2
};

// Nearest-segment projection by linear scan over the centerline. Among
// equidistant segments the lowest index wins.
OffsetQuery signed_offset(const Tunnel& tunnel, Point p);

// Uniform-grid bucketing of the centerline segments. query() returns the
// same result as signed_offset() with far fewer segment tests.
class OffsetIndex {
 public:
  explicit OffsetIndex(const Tunnel& tunnel, double cell_size = 0.0);

  OffsetQuery query(Point p) const;
  const Tunnel& tunnel() const { return tunnel_; }

 private:
  long cell_x(double x) const;
  long cell_y(double y) const;

  Tunnel tunnel_;
  double cell_;
  Point origin_;
  long nx_ = 1;
  long ny_ = 1;
  std::vector<std::vector<std::size_t>> buckets_;
};

}  // namespace steerlab::geometry

#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "nlbvp/common.hpp"

namespace nlbvp {

enum class CurveId { Gamma1, Gamma2 };

enum class DomainShape { PolylineKite, LensSpline };

std::string to_string(DomainShape shape);
DomainShape parse_shape(const std::string& name);

/// Corner data: both conjugation points and the half-opening angle of the
/// plane angle that the domain coincides with inside radius `eps` of each.
struct CornerConfig {
  double omega0 = kPi / 3.0;
  Point g1 = Point(0.0, 0.0);
  Point g2 = Point(1.0, 0.0);
  double eps = 0.15;

  const Point& corner(int j) const { return j == 0 ? g1 : g2; }
  double separation() const { return (g2 - g1).norm(); }
  void validate() const;
};

/// One boundary curve from g1 to g2.
///
/// A polyline curve is its control polygon. A lens curve has six control
/// points: straight corner rays g1->c[1] and c[4]->g2 joined by the cubic
/// Bezier arc with control points c[1..4]. In both cases the curve is
/// resolved to a dense polyline and parametrized by normalized arclength.
class BoundaryCurve {
 public:
  enum class Kind { Polyline, BezierLens };

  BoundaryCurve() = default;
  BoundaryCurve(Kind kind, std::vector<Point> control);

  Kind kind() const { return kind_; }
  const std::vector<Point>& control_points() const { return control_; }
  const std::vector<Point>& polyline() const { return dense_; }
  double length() const { return cumulative_.empty() ? 0.0 : cumulative_.back(); }

  /// Point at normalized arclength s in [0, 1].
  Point at(double s) const;

 private:
  Kind kind_ = Kind::Polyline;
  std::vector<Point> control_;
  std::vector<Point> dense_;
  std::vector<double> cumulative_;
};

/// Local polar coordinates about a corner: omega = -omega0 on Gamma1,
/// omega = +omega0 on Gamma2 and omega = 0 on the bisector.
struct LocalPolar {
  double omega;
  double r;
};

class DomainSpec {
 public:
  DomainSpec() = default;
  DomainSpec(CornerConfig corners, BoundaryCurve gamma1, BoundaryCurve gamma2,
             Point star_center, DomainShape shape);

  const CornerConfig& corners() const { return corners_; }
  const BoundaryCurve& gamma1() const { return gamma1_; }
  const BoundaryCurve& gamma2() const { return gamma2_; }
  const BoundaryCurve& curve(CurveId id) const {
    return id == CurveId::Gamma1 ? gamma1_ : gamma2_;
  }
  const Point& star_center() const { return star_center_; }
  DomainShape shape() const { return shape_; }

  /// +1 when Gamma1 lies to the left of the directed segment g1->g2.
  int gamma1_side() const { return gamma1_side_; }

  /// Counter-clockwise boundary polygon starting at g1 and running along
  /// Gamma2 first. Entry k of `polygon_curve()` names the curve of edge
  /// polygon()[k] -> polygon()[k+1].
  const std::vector<Point>& polygon() const { return polygon_; }
  const std::vector<CurveId>& polygon_curve() const { return polygon_curve_; }
  /// Index of g2 inside polygon().
  std::size_t g2_index() const { return g2_index_; }

  /// Winding-number point-in-domain test (boundary points count as inside
  /// up to `tol`).
  bool contains(const Point& p, double tol = 0.0) const;
  /// Star-shapedness test: the segment star_center->p meets the boundary
  /// no more than once before p.
  bool contains_by_ray(const Point& p) const;
  double distance_to_boundary(const Point& p) const;

  /// Unit bisector direction at corner j pointing into the domain.
  Point bisector(int j) const;
  LocalPolar polar(int j, const Point& p) const;
  Point from_polar(int j, double omega, double r) const;

  double diameter() const;
  Point centroid() const;

 private:
  CornerConfig corners_;
  BoundaryCurve gamma1_, gamma2_;
  Point star_center_ = Point::Zero();
  DomainShape shape_ = DomainShape::PolylineKite;
  int gamma1_side_ = 1;
  std::vector<Point> polygon_;
  std::vector<CurveId> polygon_curve_;
  std::size_t g2_index_ = 0;
};

/// Canonical kite-like domain with g1 = (0,0), g2 = (scale,0). Gamma1 is the
/// upper curve. Near each corner the boundary consists of the rays at
/// +-omega0 about the segment [g1, g2].
DomainSpec build_canonical_domain(double omega0, double scale, DomainShape shape,
                                  std::optional<double> eps = std::nullopt);

/// Distance to the nearer conjugation point.
double rho(const DomainSpec& domain, const Point& y);

enum class MapKind { CornerRotationBlend, InteriorContraction };

std::string to_string(MapKind kind);

/// Boundary-to-interior transformation.
///
/// CornerRotationBlend: within eps of a corner the map is the exact rotation
/// by omega0 about that corner taking the source curve's ray onto the
/// bisector. Between eps and `blend_radius` it is blended by a quintic
/// partition of unity with a contraction toward the star center by fraction
/// `inward_fraction`, which alone acts on the middle part of the curve.
///
/// InteriorContraction: y -> c + s (y - c).
class DiffeoMap {
 public:
  static DiffeoMap corner_rotation(const DomainSpec& domain, CurveId source,
                                   double blend_radius, double inward_fraction);
  static DiffeoMap contraction(const Point& center, double ratio, double margin);

  Point operator()(const Point& y) const;
  Eigen::Matrix2d jacobian(const Point& y) const;

  MapKind kind() const { return kind_; }
  std::optional<CurveId> source() const { return source_; }
  /// Rotation angle near the corners (corner-rotation kind).
  double rotation_angle() const { return omega0_; }
  double blend_radius() const { return blend_radius_; }
  double inward_fraction() const { return inward_fraction_; }
  /// Contraction ratio s (contraction kind).
  double ratio() const { return ratio_; }
  /// Minimal distance of the sampled image of the source curve to the
  /// boundary (contraction kind).
  double margin() const { return margin_; }
  const Point& center() const { return center_; }

 private:
  DiffeoMap() = default;
  Point rotate_about(int j, const Point& y) const;

  MapKind kind_ = MapKind::InteriorContraction;
  std::optional<CurveId> source_;
  std::array<Point, 2> corners_{Point::Zero(), Point::Zero()};
  std::array<double, 2> angle_{0.0, 0.0};  // signed rotation angle per corner
  double omega0_ = 0.0;
  double eps_ = 0.0;
  double blend_radius_ = 0.0;
  double inward_fraction_ = 0.0;
  double ratio_ = 1.0;
  double margin_ = 0.0;
  Point center_ = Point::Zero();
};

/// Default corner-rotation parameters.
inline constexpr double kDefaultInwardFraction = 0.35;
double default_blend_radius(const CornerConfig& corners);

/// Builds the corner-fixing map for the given source curve and verifies
/// containment of the image of the curve in the closed domain.
DiffeoMap build_corner_rotation_map(const DomainSpec& domain, CurveId source);
DiffeoMap build_corner_rotation_map(const DomainSpec& domain, CurveId source,
                                    double blend_radius, double inward_fraction);

/// Contraction about the star center. Fails when the image of Gamma1 comes
/// closer to the boundary than `min_margin` (default 1e-3 |g1 - g2|).
DiffeoMap build_interior_contraction_map(const DomainSpec& domain, double ratio,
                                         std::optional<double> min_margin = std::nullopt);

/// Quintic smoothstep 6x^5 - 15x^4 + 10x^3 clamped to [0, 1]; C^2.
double smoothstep5(double x);
double smoothstep5_derivative(double x);

/// Radial cutoff equal to 1 within `plateau` of {g1, g2} and 0 beyond `delta`.
class CutoffXi {
 public:
  CutoffXi(const CornerConfig& corners, double delta, double plateau);

  double operator()(const Point& y) const;
  double profile(double r) const;

  double delta() const { return delta_; }
  double plateau() const { return plateau_; }
  int smoothness_order() const { return 2; }

 private:
  Point g1_, g2_;
  double delta_, plateau_;
};

CutoffXi build_cutoff(const CornerConfig& corners, double delta, double plateau);

}  // namespace nlbvp

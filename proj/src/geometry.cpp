#include "nlbvp/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace nlbvp {

namespace {

double cross(const Point& a, const Point& b) { return a.x() * b.y() - a.y() * b.x(); }

double segment_distance(const Point& p, const Point& a, const Point& b) {
  const Point ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 == 0.0) return (p - a).norm();
  const double s = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + s * ab)).norm();
}

// Proper or touching intersection of closed segments.
bool segments_intersect(const Point& a, const Point& b, const Point& c, const Point& d) {
  const double d1 = cross(b - a, c - a);
  const double d2 = cross(b - a, d - a);
  const double d3 = cross(d - c, a - c);
  const double d4 = cross(d - c, b - c);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) &&
      ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0)))
    return true;
  auto on_segment = [](const Point& p, const Point& q, const Point& r) {
    return std::min(p.x(), q.x()) <= r.x() && r.x() <= std::max(p.x(), q.x()) &&
           std::min(p.y(), q.y()) <= r.y() && r.y() <= std::max(p.y(), q.y());
  };
  if (d1 == 0 && on_segment(a, b, c)) return true;
  if (d2 == 0 && on_segment(a, b, d)) return true;
  if (d3 == 0 && on_segment(c, d, a)) return true;
  if (d4 == 0 && on_segment(c, d, b)) return true;
  return false;
}

Eigen::Matrix2d rotation(double angle) {
  Eigen::Matrix2d r;
  r << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  return r;
}

Point bezier(const Point& p0, const Point& p1, const Point& p2, const Point& p3, double s) {
  const double u = 1.0 - s;
  return u * u * u * p0 + 3.0 * u * u * s * p1 + 3.0 * u * s * s * p2 + s * s * s * p3;
}

constexpr int kBezierSamples = 64;

}  // namespace

std::string to_string(DomainShape shape) {
  return shape == DomainShape::PolylineKite ? "polyline-kite" : "lens-spline";
}

DomainShape parse_shape(const std::string& name) {
  if (name == "polyline-kite") return DomainShape::PolylineKite;
  if (name == "lens-spline" || name == "lens-like spline") return DomainShape::LensSpline;
  fail(ErrorKind::Config, "unknown domain shape '" + name + "'");
}

std::string to_string(MapKind kind) {
  return kind == MapKind::CornerRotationBlend ? "corner-rotation" : "interior-contraction";
}

void CornerConfig::validate() const {
  if (!(omega0 > 0.0 && omega0 < kPi))
    fail(ErrorKind::Config, "omega0 must lie in (0, pi), got " + std::to_string(omega0));
  if (!(eps > 0.0)) fail(ErrorKind::Config, "corner radius eps must be positive");
  if (!(eps < separation() / 2.0))
    fail(ErrorKind::Config, "corner neighborhoods overlap: eps >= |g1 - g2| / 2");
}

// ---------------------------------------------------------------------------
// BoundaryCurve

BoundaryCurve::BoundaryCurve(Kind kind, std::vector<Point> control)
    : kind_(kind), control_(std::move(control)) {
  if (control_.size() < 2) fail(ErrorKind::Config, "boundary curve needs two control points");
  if (kind_ == Kind::Polyline) {
    dense_ = control_;
  } else {
    if (control_.size() != 6)
      fail(ErrorKind::Config, "lens curve needs exactly six control points");
    dense_.push_back(control_[0]);
    for (int k = 0; k <= kBezierSamples; ++k)
      dense_.push_back(bezier(control_[1], control_[2], control_[3], control_[4],
                              static_cast<double>(k) / kBezierSamples));
    dense_.push_back(control_[5]);
  }
  cumulative_.assign(dense_.size(), 0.0);
  for (std::size_t k = 1; k < dense_.size(); ++k)
    cumulative_[k] = cumulative_[k - 1] + (dense_[k] - dense_[k - 1]).norm();
}

Point BoundaryCurve::at(double s) const {
  s = std::clamp(s, 0.0, 1.0);
  const double target = s * length();
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), target);
  if (it == cumulative_.end()) return dense_.back();
  const std::size_t k = static_cast<std::size_t>(it - cumulative_.begin());
  if (k == 0) return dense_.front();
  const double seg = cumulative_[k] - cumulative_[k - 1];
  const double w = seg > 0.0 ? (target - cumulative_[k - 1]) / seg : 0.0;
  return (1.0 - w) * dense_[k - 1] + w * dense_[k];
}

// ---------------------------------------------------------------------------
// DomainSpec

DomainSpec::DomainSpec(CornerConfig corners, BoundaryCurve gamma1, BoundaryCurve gamma2,
                       Point star_center, DomainShape shape)
    : corners_(corners),
      gamma1_(std::move(gamma1)),
      gamma2_(std::move(gamma2)),
      star_center_(star_center),
      shape_(shape) {
  corners_.validate();
  const auto& up = gamma1_.polyline();
  const auto& lo = gamma2_.polyline();
  if ((up.front() - corners_.g1).norm() > 1e-12 || (lo.front() - corners_.g1).norm() > 1e-12 ||
      (up.back() - corners_.g2).norm() > 1e-12 || (lo.back() - corners_.g2).norm() > 1e-12)
    fail(ErrorKind::Geometry, "boundary curves must run from g1 to g2");

  // Side of Gamma1 relative to g1->g2, judged by the first interior point.
  const Point dir = corners_.g2 - corners_.g1;
  gamma1_side_ = cross(dir, up[1] - corners_.g1) > 0.0 ? 1 : -1;

  // Counter-clockwise: run along the curve on the right of g1->g2 first.
  const auto& first = gamma1_side_ > 0 ? lo : up;
  const auto& second = gamma1_side_ > 0 ? up : lo;
  const CurveId first_id = gamma1_side_ > 0 ? CurveId::Gamma2 : CurveId::Gamma1;
  const CurveId second_id = gamma1_side_ > 0 ? CurveId::Gamma1 : CurveId::Gamma2;
  polygon_.assign(first.begin(), first.end());
  polygon_curve_.assign(first.size() - 1, first_id);
  g2_index_ = polygon_.size() - 1;
  for (std::size_t k = second.size() - 1; k-- > 1;) polygon_.push_back(second[k]);
  polygon_curve_.resize(polygon_.size(), second_id);
}

bool DomainSpec::contains(const Point& p, double tol) const {
  int winding = 0;
  const std::size_t n = polygon_.size();
  for (std::size_t k = 0; k < n; ++k) {
    const Point& a = polygon_[k];
    const Point& b = polygon_[(k + 1) % n];
    if (a.y() <= p.y()) {
      if (b.y() > p.y() && cross(b - a, p - a) > 0) ++winding;
    } else {
      if (b.y() <= p.y() && cross(b - a, p - a) < 0) --winding;
    }
  }
  if (winding != 0) return true;
  return tol > 0.0 && distance_to_boundary(p) <= tol;
}

bool DomainSpec::contains_by_ray(const Point& p) const {
  const std::size_t n = polygon_.size();
  for (std::size_t k = 0; k < n; ++k) {
    const Point& a = polygon_[k];
    const Point& b = polygon_[(k + 1) % n];
    if (segments_intersect(star_center_, p, a, b)) return false;
  }
  return true;
}

double DomainSpec::distance_to_boundary(const Point& p) const {
  double best = std::numeric_limits<double>::infinity();
  const std::size_t n = polygon_.size();
  for (std::size_t k = 0; k < n; ++k)
    best = std::min(best, segment_distance(p, polygon_[k], polygon_[(k + 1) % n]));
  return best;
}

Point DomainSpec::bisector(int j) const {
  const Point d = (corners_.g2 - corners_.g1).normalized();
  return j == 0 ? d : Point(-d);
}

namespace {
// omega = orientation * (counter-clockwise angle from the bisector).
int polar_orientation(int j, int gamma1_side) { return (j == 0 ? -1 : 1) * gamma1_side; }
}  // namespace

LocalPolar DomainSpec::polar(int j, const Point& p) const {
  const Point d = p - corners_.corner(j);
  const Point b = bisector(j);
  const double theta = std::atan2(cross(b, d), b.dot(d));
  return {polar_orientation(j, gamma1_side_) * theta, d.norm()};
}

Point DomainSpec::from_polar(int j, double omega, double r) const {
  const double theta = polar_orientation(j, gamma1_side_) * omega;
  return corners_.corner(j) + r * (rotation(theta) * bisector(j));
}

double DomainSpec::diameter() const {
  double d = 0.0;
  for (const auto& a : polygon_)
    for (const auto& b : polygon_) d = std::max(d, (a - b).norm());
  return d;
}

Point DomainSpec::centroid() const {
  double area = 0.0;
  Point c = Point::Zero();
  const std::size_t n = polygon_.size();
  for (std::size_t k = 0; k < n; ++k) {
    const Point& a = polygon_[k];
    const Point& b = polygon_[(k + 1) % n];
    const double w = cross(a, b);
    area += w;
    c += w * (a + b);
  }
  return c / (3.0 * area);
}

DomainSpec build_canonical_domain(double omega0, double scale, DomainShape shape,
                                  std::optional<double> eps) {
  if (!(omega0 > 0.0 && omega0 < kPi))
    fail(ErrorKind::Config, "omega0 must lie in (0, pi), got " + std::to_string(omega0));
  if (!(scale > 0.0)) fail(ErrorKind::Config, "scale must be positive");

  CornerConfig corners;
  corners.omega0 = omega0;
  corners.g1 = Point(0.0, 0.0);
  corners.g2 = Point(scale, 0.0);
  corners.eps = eps.value_or(0.15 * scale);
  corners.validate();

  const double c = std::cos(omega0);
  const double s = std::sin(omega0);
  double ray = 0.4 * scale;
  if (shape == DomainShape::PolylineKite) {
    if (c > 0.0) ray = std::min(ray, 0.5 * scale / c);
  } else if (c > 0.0) {
    ray = std::min(ray, 0.45 * scale / c);
  }

  const Point a1(ray * c, ray * s);
  const Point a2(scale - ray * c, ray * s);
  auto mirror = [](std::vector<Point> pts) {
    for (auto& p : pts) p.y() = -p.y();
    return pts;
  };

  std::vector<Point> upper;
  BoundaryCurve::Kind kind = BoundaryCurve::Kind::Polyline;
  if (shape == DomainShape::PolylineKite) {
    if ((a2 - a1).norm() <= 1e-12 * scale)
      upper = {corners.g1, a1, corners.g2};
    else
      upper = {corners.g1, a1, a2, corners.g2};
  } else {
    kind = BoundaryCurve::Kind::BezierLens;
    const double k = 0.4 * (a2 - a1).norm();
    const Point d1(c, s);
    const Point d2(-c, s);
    upper = {corners.g1, a1, a1 + k * d1, a2 + k * d2, a2, corners.g2};
  }

  DomainSpec domain(corners, BoundaryCurve(kind, upper), BoundaryCurve(kind, mirror(upper)),
                    Point(0.5 * scale, 0.0), shape);

  const auto& poly = domain.polygon();
  const std::size_t n = poly.size();

  // Simple polygon: non-adjacent edges are disjoint.
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 2; j < n; ++j) {
      if (i == 0 && j == n - 1) continue;
      if (segments_intersect(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n])) {
        std::ostringstream msg;
        msg << "boundary curves self-intersect for omega0 = " << omega0 << " (" << to_string(shape)
            << ")";
        fail(ErrorKind::Geometry, msg.str());
      }
    }

  // Inside radius eps of each corner only the two corner rays are present.
  const std::size_t corner_idx[2] = {0, domain.g2_index()};
  for (int j = 0; j < 2; ++j) {
    const std::size_t v = corner_idx[j];
    for (std::size_t k = 0; k < n; ++k) {
      if (k == v || (k + 1) % n == v) continue;
      if (segment_distance(corners.corner(j), poly[k], poly[(k + 1) % n]) <= corners.eps) {
        std::ostringstream msg;
        msg << "domain is not a plane angle within eps = " << corners.eps << " of corner g"
            << (j + 1) << " for omega0 = " << omega0;
        fail(ErrorKind::Geometry, msg.str());
      }
    }
  }

  // Star-shaped about the star center: strictly left of every edge.
  for (std::size_t k = 0; k < n; ++k) {
    const Point& a = poly[k];
    const Point& b = poly[(k + 1) % n];
    if (cross(b - a, domain.star_center() - a) <= 1e-12 * scale * scale) {
      std::ostringstream msg;
      msg << "domain is not star-shaped about its center for omega0 = " << omega0 << " ("
          << to_string(shape) << ")";
      fail(ErrorKind::Geometry, msg.str());
    }
  }
  return domain;
}

double rho(const DomainSpec& domain, const Point& y) {
  return std::min((y - domain.corners().g1).norm(), (y - domain.corners().g2).norm());
}

// ---------------------------------------------------------------------------
// DiffeoMap

double smoothstep5(double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  return x * x * x * (x * (6.0 * x - 15.0) + 10.0);
}

double smoothstep5_derivative(double x) {
  if (x <= 0.0 || x >= 1.0) return 0.0;
  return 30.0 * x * x * (x - 1.0) * (x - 1.0);
}

double default_blend_radius(const CornerConfig& corners) {
  return std::min(2.0 * corners.eps, 0.5 * (corners.eps + 0.5 * corners.separation()));
}

DiffeoMap DiffeoMap::corner_rotation(const DomainSpec& domain, CurveId source,
                                     double blend_radius, double inward_fraction) {
  const auto& cc = domain.corners();
  if (!(blend_radius > cc.eps && blend_radius < 0.5 * cc.separation()))
    fail(ErrorKind::Config, "blend radius must lie in (eps, |g1 - g2| / 2)");
  if (!(inward_fraction > 0.0 && inward_fraction < 1.0))
    fail(ErrorKind::Config, "inward fraction must lie in (0, 1)");
  DiffeoMap m;
  m.kind_ = MapKind::CornerRotationBlend;
  m.source_ = source;
  m.corners_ = {cc.g1, cc.g2};
  m.omega0_ = cc.omega0;
  m.eps_ = cc.eps;
  m.blend_radius_ = blend_radius;
  m.inward_fraction_ = inward_fraction;
  m.center_ = domain.star_center();
  // Gamma1 sits at omega = -omega0 and moves to omega = 0; Gamma2 the reverse.
  const double domega = source == CurveId::Gamma1 ? cc.omega0 : -cc.omega0;
  for (int j = 0; j < 2; ++j) {
    const int orientation = (j == 0 ? -1 : 1) * domain.gamma1_side();
    m.angle_[j] = orientation * domega;
  }
  return m;
}

DiffeoMap DiffeoMap::contraction(const Point& center, double ratio, double margin) {
  DiffeoMap m;
  m.kind_ = MapKind::InteriorContraction;
  m.center_ = center;
  m.ratio_ = ratio;
  m.margin_ = margin;
  m.source_ = CurveId::Gamma1;
  return m;
}

Point DiffeoMap::rotate_about(int j, const Point& y) const {
  return corners_[j] + rotation(angle_[j]) * (y - corners_[j]);
}

Point DiffeoMap::operator()(const Point& y) const {
  if (kind_ == MapKind::InteriorContraction) return center_ + ratio_ * (y - center_);

  double chi[2];
  for (int j = 0; j < 2; ++j)
    chi[j] = 1.0 - smoothstep5(((y - corners_[j]).norm() - eps_) / (blend_radius_ - eps_));
  const Point inward = y + inward_fraction_ * (center_ - y);
  return chi[0] * rotate_about(0, y) + chi[1] * rotate_about(1, y) +
         (1.0 - chi[0] - chi[1]) * inward;
}

Eigen::Matrix2d DiffeoMap::jacobian(const Point& y) const {
  if (kind_ == MapKind::InteriorContraction) return ratio_ * Eigen::Matrix2d::Identity();

  const Point inward = y + inward_fraction_ * (center_ - y);
  Eigen::Matrix2d jac = Eigen::Matrix2d::Zero();
  double chi_sum = 0.0;
  for (int j = 0; j < 2; ++j) {
    const Point d = y - corners_[j];
    const double r = d.norm();
    const double x = (r - eps_) / (blend_radius_ - eps_);
    const double chi = 1.0 - smoothstep5(x);
    Point grad = Point::Zero();
    if (r > 0.0) grad = -smoothstep5_derivative(x) / (blend_radius_ - eps_) * d / r;
    jac += chi * rotation(angle_[j]) + (rotate_about(j, y) - inward) * grad.transpose();
    chi_sum += chi;
  }
  jac += (1.0 - chi_sum) * (1.0 - inward_fraction_) * Eigen::Matrix2d::Identity();
  return jac;
}

namespace {
constexpr int kCurveSamples = 2001;
}

DiffeoMap build_corner_rotation_map(const DomainSpec& domain, CurveId source) {
  return build_corner_rotation_map(domain, source, default_blend_radius(domain.corners()),
                                   kDefaultInwardFraction);
}

DiffeoMap build_corner_rotation_map(const DomainSpec& domain, CurveId source,
                                    double blend_radius, double inward_fraction) {
  DiffeoMap map = DiffeoMap::corner_rotation(domain, source, blend_radius, inward_fraction);
  const auto& curve = domain.curve(source);
  const double tol = 1e-12 * domain.corners().separation();
  for (int k = 0; k < kCurveSamples; ++k) {
    const double s = static_cast<double>(k) / (kCurveSamples - 1);
    const Point image = map(curve.at(s));
    if (!domain.contains(image, tol)) {
      std::ostringstream msg;
      msg << "corner-rotation blend leaves the closed domain at curve parameter s = " << s;
      fail(ErrorKind::Geometry, msg.str());
    }
  }
  return map;
}

DiffeoMap build_interior_contraction_map(const DomainSpec& domain, double ratio,
                                         std::optional<double> min_margin) {
  if (!(ratio > 0.0 && ratio < 1.0))
    fail(ErrorKind::Config, "contraction ratio must lie in (0, 1)");
  if (!domain.contains(domain.star_center()))
    fail(ErrorKind::Geometry, "star center lies outside the domain");
  const double required = min_margin.value_or(1e-3 * domain.corners().separation());
  const DiffeoMap probe = DiffeoMap::contraction(domain.star_center(), ratio, 0.0);
  double margin = std::numeric_limits<double>::infinity();
  for (int k = 0; k < kCurveSamples; ++k) {
    const double s = static_cast<double>(k) / (kCurveSamples - 1);
    const Point image = probe(domain.gamma1().at(s));
    const double d = domain.contains(image) ? domain.distance_to_boundary(image) : 0.0;
    margin = std::min(margin, d);
  }
  if (margin <= required) {
    std::ostringstream msg;
    msg << "contraction margin <= required minimum: margin " << margin << " vs " << required
        << " for ratio " << ratio;
    fail(ErrorKind::Geometry, msg.str());
  }
  return DiffeoMap::contraction(domain.star_center(), ratio, margin);
}

// ---------------------------------------------------------------------------
// CutoffXi

CutoffXi::CutoffXi(const CornerConfig& corners, double delta, double plateau)
    : g1_(corners.g1), g2_(corners.g2), delta_(delta), plateau_(plateau) {}

double CutoffXi::profile(double r) const {
  return 1.0 - smoothstep5((r - plateau_) / (delta_ - plateau_));
}

double CutoffXi::operator()(const Point& y) const {
  return profile(std::min((y - g1_).norm(), (y - g2_).norm()));
}

CutoffXi build_cutoff(const CornerConfig& corners, double delta, double plateau) {
  if (!(plateau < delta)) fail(ErrorKind::Config, "cutoff plateau must be smaller than delta");
  if (!(plateau >= corners.eps)) fail(ErrorKind::Config, "cutoff plateau must be at least eps");
  if (!(delta < corners.separation() / 2.0))
    fail(ErrorKind::Config, "cutoff support must keep the corner neighborhoods disjoint");
  return CutoffXi(corners, delta, plateau);
}

}  // namespace nlbvp

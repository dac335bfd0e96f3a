#include "spice/spline.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace spice::spline {

namespace {

constexpr double kDegenerateZ = 1e-30;
constexpr double kConstructDelta = 1e-9;

double antiderivative(const Segment& s, double y) {
  return ((s.a / 3.0 * y + s.b / 2.0) * y + s.c) * y;
}

// Roots of a*y^2 + b*y + c with the sign-adjusted quadratic formula and the
// c/(a q) companion root. Caller guarantees |a| above floor and disc above the
// discriminant floor.
std::pair<double, double> stable_roots(double a, double b, double c, double disc) {
  const double sq = std::sqrt(disc);
  const double q = -0.5 * (b + (b >= 0 ? sq : -sq));
  double r1, r2;
  if (q != 0.0) {
    r1 = q / a;
    r2 = c / q;
  } else {  // b == 0, symmetric roots
    r1 = -sq / (2.0 * a);
    r2 = -r1;
  }
  if (r1 > r2) std::swap(r1, r2);
  return {r1, r2};
}

size_t locate_segment(const std::vector<double>& knots, double y) {
  // t_l <= y < t_{l+1}; y == 1 maps to the final segment.
  auto it = std::upper_bound(knots.begin(), knots.end(), y);
  size_t idx = static_cast<size_t>(it - knots.begin());
  if (idx == 0) return 0;
  idx -= 1;
  if (idx >= knots.size() - 1) idx = knots.size() - 2;
  return idx;
}

}  // namespace

IntervalUnion IntervalUnion::from_intervals(std::vector<Interval> parts) {
  std::erase_if(parts, [](const Interval& iv) { return iv.size() < kMinLength; });
  std::sort(parts.begin(), parts.end(),
            [](const Interval& x, const Interval& y) { return x.lo < y.lo; });
  IntervalUnion u;
  for (const Interval& iv : parts) {
    if (!u.parts_.empty() && iv.lo - u.parts_.back().hi < kMergeGap) {
      u.parts_.back().hi = std::max(u.parts_.back().hi, iv.hi);
    } else {
      u.parts_.push_back(iv);
    }
  }
  return u;
}

double IntervalUnion::total_size() const {
  double s = 0.0;
  for (const Interval& iv : parts_) s += iv.size();
  return s;
}

bool IntervalUnion::contains(double y) const {
  auto it = std::upper_bound(parts_.begin(), parts_.end(), y,
                             [](double v, const Interval& iv) { return v < iv.lo; });
  if (it == parts_.begin()) return false;
  --it;
  return y <= it->hi;
}

std::vector<double> knot_positions(const std::vector<double>& raw_widths,
                                   size_t knot_count, double eps) {
  if (knot_count < 2) throw ConfigError("knot_positions: need at least two knots");
  if (raw_widths.size() != knot_count - 1)
    throw ConfigError("knot_positions: expected K-1 raw widths");
  if (eps < 0.0 || eps >= 1.0 / static_cast<double>(knot_count))
    throw ConfigError("knot_positions: eps must satisfy 0 <= eps < 1/K");

  // Softmax with max subtraction.
  double mx = raw_widths[0];
  for (double w : raw_widths) mx = std::max(mx, w);
  std::vector<double> v(raw_widths.size());
  double s = 0.0;
  for (size_t i = 0; i < v.size(); ++i) {
    v[i] = std::exp(raw_widths[i] - mx);
    s += v[i];
  }
  const double squeeze = 1.0 - eps * static_cast<double>(knot_count);
  std::vector<double> positions(knot_count);
  positions[0] = 0.0;
  double acc = 0.0;
  for (size_t i = 0; i + 1 < knot_count; ++i) {
    acc += eps + squeeze * (v[i] / s);
    positions[i + 1] = acc;
  }
  positions.back() += eps;  // lands exactly on one up to rounding
  positions.back() = 1.0;
  return positions;
}

std::vector<std::vector<double>> intermediate_grid(const std::vector<double>& positions,
                                                   int degree) {
  std::vector<std::vector<double>> grid;
  grid.reserve(positions.size() - 1);
  for (size_t i = 0; i + 1 < positions.size(); ++i) {
    std::vector<double> taus(static_cast<size_t>(degree) + 1);
    const double lo = positions[i];
    const double w = positions[i + 1] - positions[i];
    for (int j = 0; j <= degree; ++j)
      taus[static_cast<size_t>(j)] = lo + static_cast<double>(j) * w / degree;
    taus.back() = positions[i + 1];
    grid.push_back(std::move(taus));
  }
  return grid;
}

Segment lagrange_coefficients(const std::vector<double>& taus,
                              const std::vector<double>& heights) {
  if (taus.size() != heights.size() || taus.size() < 2 || taus.size() > 3)
    throw ConfigError("lagrange_coefficients: need 2 or 3 points");
  for (size_t i = 0; i < taus.size(); ++i)
    for (size_t j = i + 1; j < taus.size(); ++j)
      if (taus[i] == taus[j])
        throw DomainError("lagrange_coefficients: coincident interpolation points");

  Segment seg;
  if (taus.size() == 2) {
    seg.a = 0.0;
    seg.b = (heights[1] - heights[0]) / (taus[1] - taus[0]);
    seg.c = heights[0] - seg.b * taus[0];
  } else {
    const double t0 = taus[0], t1 = taus[1], t2 = taus[2];
    const double l0 = (t0 - t1) * (t0 - t2);
    const double l1 = (t1 - t0) * (t1 - t2);
    const double l2 = (t2 - t0) * (t2 - t1);
    const double w0 = heights[0] / l0;
    const double w1 = heights[1] / l1;
    const double w2 = heights[2] / l2;
    seg.a = w0 + w1 + w2;
    seg.b = -(w0 * (t1 + t2) + w1 * (t0 + t2) + w2 * (t0 + t1));
    seg.c = w0 * t1 * t2 + w1 * t0 * t2 + w2 * t0 * t1;
  }
  return seg;
}

double segment_mass(const Segment& seg, double lo, double hi) {
  if (!(lo < hi)) throw DomainError("segment_mass: requires lo < hi");
  const double full = antiderivative(seg, hi) - antiderivative(seg, lo);

  double negative = 0.0;
  if (std::abs(seg.a) < kLinearCoefFloor) {
    if (std::abs(seg.b) < kLinearCoefFloor) {
      return seg.c > 0.0 ? std::max(full, 0.0) : 0.0;
    }
    const double root = -seg.c / seg.b;
    if (seg.b > 0.0) {
      // negative to the left of the root
      const double nhi = std::clamp(root, lo, hi);
      if (nhi > lo) negative = antiderivative(seg, nhi) - antiderivative(seg, lo);
    } else {
      const double nlo = std::clamp(root, lo, hi);
      if (nlo < hi) negative = antiderivative(seg, hi) - antiderivative(seg, nlo);
    }
  } else {
    const double disc = seg.b * seg.b - 4.0 * seg.a * seg.c;
    if (disc < kDiscriminantFloor) {
      // No real roots: constant sign matching the leading coefficient.
      return seg.a > 0.0 ? std::max(full, 0.0) : 0.0;
    }
    auto [r1, r2] = stable_roots(seg.a, seg.b, seg.c, disc);
    if (seg.a > 0.0) {
      // negative between the clipped roots
      const double nlo = std::clamp(r1, lo, hi);
      const double nhi = std::clamp(r2, lo, hi);
      if (nlo < nhi) negative = antiderivative(seg, nhi) - antiderivative(seg, nlo);
    } else {
      // negative outside the roots
      const double nhi = std::clamp(r1, lo, hi);
      if (nhi > lo) negative = antiderivative(seg, nhi) - antiderivative(seg, lo);
      const double nlo = std::clamp(r2, lo, hi);
      if (nlo < hi) negative += antiderivative(seg, hi) - antiderivative(seg, nlo);
    }
  }
  return std::max(full - negative, 0.0);
}

SplineDensity build_density(const std::vector<double>& positions,
                            const std::vector<double>& endpoint_heights,
                            const std::vector<double>& midpoint_heights, int degree) {
  if (degree != 1 && degree != 2)
    throw ConfigError("build_density: degree must be 1 or 2");
  const size_t k = positions.size();
  if (k < 2) throw ConfigError("build_density: need at least two knots");
  if (endpoint_heights.size() != k)
    throw ConfigError("build_density: expected K endpoint heights");
  if (degree == 2 && midpoint_heights.size() != k - 1)
    throw ConfigError("build_density: expected K-1 midpoint heights");
  if (std::abs(positions.front()) > 1e-9 || std::abs(positions.back() - 1.0) > 1e-9)
    throw ConfigError("build_density: positions must span [0, 1]");

  SplineDensity d;
  d.degree = degree;
  d.knots = positions;
  d.knots.front() = 0.0;
  d.knots.back() = 1.0;
  d.min_spacing = 1.0;
  for (size_t i = 0; i + 1 < k; ++i) {
    const double gap = d.knots[i + 1] - d.knots[i];
    if (!(gap > 0.0)) throw ConfigError("build_density: positions must be strictly sorted");
    d.min_spacing = std::min(d.min_spacing, gap);
  }
  for (double h : endpoint_heights)
    if (h < 0.0) throw ConfigError("build_density: endpoint heights must be nonnegative");

  d.segments.reserve(k - 1);
  double z = 0.0;
  for (size_t i = 0; i + 1 < k; ++i) {
    Segment seg;
    if (degree == 1) {
      seg = lagrange_coefficients({d.knots[i], d.knots[i + 1]},
                                  {endpoint_heights[i], endpoint_heights[i + 1]});
    } else {
      const double mid = 0.5 * (d.knots[i] + d.knots[i + 1]);
      seg = lagrange_coefficients(
          {d.knots[i], mid, d.knots[i + 1]},
          {endpoint_heights[i], midpoint_heights[i], endpoint_heights[i + 1]});
    }
    z += segment_mass(seg, d.knots[i], d.knots[i + 1]);
    d.segments.push_back(seg);
  }
  if (!(z > kDegenerateZ))
    throw NumericalError("build_density: degenerate density, all heights effectively zero");
  d.z = z;
  return d;
}

double density_eval(const SplineDensity& d, double y) {
  if (y < 0.0 || y > 1.0) throw DomainError("density_eval: y outside [0, 1]");
  const size_t idx = locate_segment(d.knots, y);
  d.segment_visits += 1;
  return std::max(d.segments[idx].eval(y), 0.0) / d.z;
}

double density_sup(const SplineDensity& d) {
  double sup = 0.0;
  for (size_t i = 0; i < d.segments.size(); ++i) {
    const Segment& s = d.segments[i];
    const double lo = d.knots[i], hi = d.knots[i + 1];
    sup = std::max(sup, std::max(s.eval(lo), s.eval(hi)));
    if (s.a < 0.0) {
      const double vy = -s.b / (2.0 * s.a);
      if (vy > lo && vy < hi) sup = std::max(sup, s.eval(vy));
    }
  }
  return std::max(sup, 0.0) / d.z;
}

IntervalUnion level_set(const SplineDensity& d, double c) {
  if (c < 0.0) throw DomainError("level_set: level must be nonnegative");
  const double t = c * d.z;  // threshold in unnormalized units
  std::vector<Interval> parts;
  for (size_t i = 0; i < d.segments.size(); ++i) {
    d.segment_visits += 1;
    const Segment& s = d.segments[i];
    const double lo = d.knots[i], hi = d.knots[i + 1];
    if (std::abs(s.a) < kLinearCoefFloor) {
      if (std::abs(s.b) < kLinearCoefFloor) {
        if (s.c > t) parts.push_back({lo, hi});
      } else {
        const double cross = (t - s.c) / s.b;
        if (s.b > 0.0) {
          const double a0 = std::clamp(cross, lo, hi);
          if (a0 < hi) parts.push_back({a0, hi});
        } else {
          const double b0 = std::clamp(cross, lo, hi);
          if (b0 > lo) parts.push_back({lo, b0});
        }
      }
      continue;
    }
    const double disc = s.b * s.b - 4.0 * s.a * (s.c - t);
    if (disc < kDiscriminantFloor) {
      // No real crossings: p - t keeps the sign of its vertex value,
      // -disc/(4a), which is positive exactly when a > 0.
      if (s.a > 0.0) parts.push_back({lo, hi});
      continue;
    }
    auto [r1, r2] = stable_roots(s.a, s.b, s.c - t, disc);
    if (s.a < 0.0) {
      // above the level between the roots
      const double a0 = std::clamp(r1, lo, hi);
      const double b0 = std::clamp(r2, lo, hi);
      if (a0 < b0) parts.push_back({a0, b0});
    } else {
      // above the level outside the roots
      const double b0 = std::clamp(r1, lo, hi);
      if (b0 > lo) parts.push_back({lo, b0});
      const double a0 = std::clamp(r2, lo, hi);
      if (a0 < hi) parts.push_back({a0, hi});
    }
  }
  return IntervalUnion::from_intervals(std::move(parts));
}

double mass_on(const SplineDensity& d, const IntervalUnion& u) {
  double mass = 0.0;
  for (const Interval& iv : u.parts()) {
    size_t i = locate_segment(d.knots, std::clamp(iv.lo, 0.0, 1.0));
    for (; i < d.segments.size() && d.knots[i] < iv.hi; ++i) {
      const double lo = std::max(iv.lo, d.knots[i]);
      const double hi = std::min(iv.hi, d.knots[i + 1]);
      if (hi - lo > 0.0) {
        d.segment_visits += 1;
        mass += segment_mass(d.segments[i], lo, hi);
      }
    }
  }
  return mass / d.z;
}

double mass_below_level(const SplineDensity& d, double c) {
  if (c < 0.0) throw DomainError("mass_below_level: level must be nonnegative");
  const double above = mass_on(d, level_set(d, c));
  return std::clamp(1.0 - above, 0.0, 1.0);
}

SplineDensity construct_set_density(const IntervalUnion& target, double cutoff_density,
                                 ConstructMode mode, size_t max_intervals) {
  const size_t m = target.count();
  if (m < 1 || m > max_intervals)
    throw ConfigError("construct_set_density: interval count outside [1, M]");
  const double total = target.total_size();
  if (mode == ConstructMode::kNd) {
    if (!(cutoff_density * total > 0.0 && cutoff_density * total < 1.0))
      throw ConfigError("construct_set_density: need 0 < cutoff * |target| < 1");
  } else {
    if (!(cutoff_density > 0.0 && cutoff_density < 1.0))
      throw ConfigError("construct_set_density: need 0 < -qhat < 1");
  }

  // Both modes place a uniform plateau of height 1/|target| over the target;
  // short ramps of width delta connect the plateaus to the zero floor.
  const double height = 1.0 / total;
  const double delta = kConstructDelta;
  const auto& ivs = target.parts();

  std::vector<std::pair<double, double>> pts;
  const bool starts_at_zero = ivs.front().lo <= 2.0 * delta;
  if (starts_at_zero) {
    pts.emplace_back(0.0, height);
  } else {
    pts.emplace_back(0.0, 0.0);
  }
  const bool ends_at_one = ivs.back().hi >= 1.0 - 2.0 * delta;
  for (size_t i = 0; i < m; ++i) {
    const double a = ivs[i].lo, b = ivs[i].hi;
    if (!(i == 0 && starts_at_zero)) {
      pts.emplace_back(a - delta, 0.0);
      pts.emplace_back(a, height);
    }
    if (i + 1 == m && ends_at_one) break;  // plateau runs into the padding
    pts.emplace_back(b, height);
    pts.emplace_back(b + delta, 0.0);
  }

  const size_t knot_count = 4 * max_intervals + 2;
  if (pts.size() + 1 > knot_count)
    throw ConfigError("construct_set_density: target too complex for K = 4M+2 knots");
  const double pad_height = ends_at_one ? height : 0.0;
  // Inert knots near one, perturbed by multiples of delta to stay sorted.
  for (size_t need = knot_count - pts.size() - 1; need > 0; --need)
    pts.emplace_back(1.0 - static_cast<double>(need) * delta, pad_height);
  pts.emplace_back(1.0, pad_height);

  std::vector<double> positions, heights;
  positions.reserve(pts.size());
  heights.reserve(pts.size());
  for (const auto& [p, h] : pts) {
    if (!positions.empty() && !(p > positions.back()))
      throw ConfigError("construct_set_density: target geometry too tight for knot spacing");
    positions.push_back(p);
    heights.push_back(h);
  }
  return build_density(positions, heights, {}, 1);
}

}  // namespace spice::spline

#pragma once

#include <cstdint>
#include <vector>

#include "spice/errors.hpp"

namespace spice::spline {

// Quadratics with discriminant below this are treated as rootless; avoids
// catastrophic cancellation on tangent cases.
inline constexpr double kDiscriminantFloor = 1e-12;
// Leading coefficients below this are treated as exactly zero.
inline constexpr double kLinearCoefFloor = 1e-14;

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double size() const { return hi - lo; }
};

// Ordered union of disjoint closed intervals inside [0, 1]. Components with a
// gap below 1e-12 are merged; components shorter than 1e-12 are dropped as
// root-clipping noise.
class IntervalUnion {
 public:
  IntervalUnion() = default;
  static IntervalUnion from_intervals(std::vector<Interval> parts);

  const std::vector<Interval>& parts() const { return parts_; }
  size_t count() const { return parts_.size(); }
  bool empty() const { return parts_.empty(); }
  double total_size() const;
  bool contains(double y) const;

  static constexpr double kMergeGap = 1e-12;
  static constexpr double kMinLength = 1e-12;

 private:
  std::vector<Interval> parts_;
};

// One segment polynomial a*y^2 + b*y + c on [knots[i], knots[i+1]].
struct Segment {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double eval(double y) const { return (a * y + b) * y + c; }
};

// Normalized piecewise-polynomial density on [0, 1]. Immutable after
// construction apart from the segment-visit counter used by complexity tests.
struct SplineDensity {
  int degree = 1;                 // 1 or 2
  std::vector<double> knots;      // K sorted positions, knots.front()=0, back()=1
  std::vector<Segment> segments;  // K-1 polynomials
  double z = 1.0;                 // normalizing constant
  double min_spacing = 0.0;

  mutable uint64_t segment_visits = 0;  // instrumentation, not part of the value

  size_t knot_count() const { return knots.size(); }
};

// Sorted knot positions from K-1 raw widths: softmax, affine squeeze by the
// minimum spacing, cumulative sum, and the final position nudged onto 1.
std::vector<double> knot_positions(const std::vector<double>& raw_widths,
                                   size_t knot_count, double eps);

// tau_i^j = t_i + (j-1) (t_{i+1}-t_i)/n for j = 1..n+1 per segment; flattened
// as segments x (n+1).
std::vector<std::vector<double>> intermediate_grid(const std::vector<double>& positions,
                                                   int degree);

// Unique degree-<=n polynomial through (tau_j, h_j); n = points.size()-1.
Segment lagrange_coefficients(const std::vector<double>& taus,
                              const std::vector<double>& heights);

// Integral of max(poly, 0) over [lo, hi].
double segment_mass(const Segment& seg, double lo, double hi);

// positions: K sorted; endpoint_heights: K values (>= 0); midpoint_heights:
// K-1 values for degree 2 (empty for degree 1).
SplineDensity build_density(const std::vector<double>& positions,
                            const std::vector<double>& endpoint_heights,
                            const std::vector<double>& midpoint_heights, int degree);

double density_eval(const SplineDensity& d, double y);

// Exact supremum of the normalized density over [0, 1].
double density_sup(const SplineDensity& d);

// {y : d(y) > c} as a union of closed intervals.
IntervalUnion level_set(const SplineDensity& d, double c);

// Integral of d over {y : d(y) <= c}; in [0, 1].
double mass_below_level(const SplineDensity& d, double c);

// Mass of the density restricted to an interval union.
double mass_on(const SplineDensity& d, const IntervalUnion& u);

enum class ConstructMode { kNd, kHpd };

// Degree-1 density with K = 4M+2 knots whose ND level set at `cutoff_density`
// (or HPD set at any admissible cutoff) equals `target`.
SplineDensity construct_set_density(const IntervalUnion& target, double cutoff_density,
                                 ConstructMode mode, size_t max_intervals);

}  // namespace spice::spline

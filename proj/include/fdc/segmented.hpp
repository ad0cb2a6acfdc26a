#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "fdc/ale.hpp"
#include "fdc/dataset.hpp"
#include "fdc/error.hpp"

namespace fdc {

struct Segment {
  double lo = 0.0;  // smallest data x in the segment
  double hi = 0.0;  // largest data x in the segment
  double intercept = 0.0;
  double slope = 0.0;
  std::size_t rows = 0;
};

/// Piecewise-linear approximation of one main effect.
///
/// For categorical curves x is the level's position in the curve's effect
/// order and every slope is zero.
struct SegmentedFit {
  std::size_t feature = 0;
  Kind kind = Kind::Numeric;
  std::size_t segments_used = 1;   // K
  std::vector<double> breakpoints;  // K - 1 split points; x <= b goes left
  std::vector<Segment> segments;
  double r2 = 1.0;                 // after slope zeroing
  std::vector<double> r2_path;     // best r2 at K = 1, 2, ... before zeroing
  double slope_threshold = 0.0;    // |slope| at or below this counts as zero
  int mec = 0;

  std::size_t nonzero_slopes() const {
    return static_cast<std::size_t>(std::count_if(segments.begin(), segments.end(), [&](const Segment& s) {
      return std::fabs(s.slope) > slope_threshold;
    }));
  }
};

namespace segmented_detail {

struct Point {
  double x;
  double a;
  double w;  // row count at this x
};

struct Evaluation {
  std::vector<Segment> segments;
  double sse = 0.0;
  bool valid = false;
};

inline Segment fit_segment(std::span<const Point> pts, bool allow_slope) {
  Segment s;
  double w = 0.0, mx = 0.0, ma = 0.0;
  for (const auto& p : pts) {
    w += p.w;
    mx += p.w * p.x;
    ma += p.w * p.a;
  }
  mx /= w;
  ma /= w;
  double sxx = 0.0, sxa = 0.0;
  for (const auto& p : pts) {
    sxx += p.w * (p.x - mx) * (p.x - mx);
    sxa += p.w * (p.x - mx) * (p.a - ma);
  }
  s.slope = allow_slope && sxx > 0.0 ? sxa / sxx : 0.0;
  s.intercept = ma - s.slope * mx;
  s.lo = pts.front().x;
  s.hi = pts.back().x;
  s.rows = static_cast<std::size_t>(w);
  return s;
}

inline double segment_sse(std::span<const Point> pts, const Segment& s) {
  double e = 0.0;
  for (const auto& p : pts) {
    const double r = p.a - (s.intercept + s.slope * p.x);
    e += p.w * r * r;
  }
  return e;
}

/// Index ranges [begin, end) of the points in each segment.
inline std::vector<std::pair<std::size_t, std::size_t>> ranges(std::span<const Point> pts,
                                                               const std::vector<double>& breaks) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t begin = 0;
  for (double b : breaks) {
    std::size_t end = begin;
    while (end < pts.size() && pts[end].x <= b) ++end;
    out.emplace_back(begin, end);
    begin = end;
  }
  out.emplace_back(begin, pts.size());
  return out;
}

inline Evaluation evaluate(std::span<const Point> pts, const std::vector<double>& breaks, bool allow_slope) {
  Evaluation ev;
  for (const auto& [begin, end] : ranges(pts, breaks)) {
    double rows = 0.0;
    for (std::size_t i = begin; i < end; ++i) rows += pts[i].w;
    if (begin == end || rows < 2.0) return ev;
    const auto part = pts.subspan(begin, end - begin);
    ev.segments.push_back(fit_segment(part, allow_slope));
    ev.sse += segment_sse(part, ev.segments.back());
  }
  ev.valid = true;
  return ev;
}

}  // namespace segmented_detail

/// Approximates a main effect by at most max_seg linear segments.
///
/// Fits the pairs (x_i, curve(x_i)) over all data rows. Quality is
/// r2 = 1 - SSE / sum(curve(x_i)^2), the share of the (centered) curve's
/// second moment explained. Starting from one least-squares line, breakpoints
/// are added one at a time while r2 < 1 - epsilon and K < max_seg; each new
/// breakpoint is the interior grid boundary maximizing r2 with earlier ones held
/// fixed, and every segment must keep at least two rows. Afterwards slopes are
/// zeroed greedily (the one costing least r2 first) as long as r2 stays at or
/// above 1 - epsilon. The complexity is MEC_j = K + (nonzero slopes) - 1.
inline SegmentedFit fit_segmented(const AleCurve& curve, std::span<const double> data_values, double epsilon,
                                  std::size_t max_seg) {
  using namespace segmented_detail;
  if (max_seg == 0) throw ConfigError("max_seg must be positive");
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw ConfigError("epsilon must lie in [0, 1)");
  if (data_values.empty()) throw ConfigError("no data values");

  const bool numeric = curve.kind == Kind::Numeric;
  std::vector<Point> raw;
  raw.reserve(data_values.size());
  for (double v : data_values) {
    const double x = numeric ? v : static_cast<double>(curve.level_position(v));
    raw.push_back({x, curve.eval(v), 1.0});
  }
  std::sort(raw.begin(), raw.end(), [](const Point& a, const Point& b) { return a.x < b.x; });
  std::vector<Point> pts;
  for (const auto& p : raw) {
    if (!pts.empty() && pts.back().x == p.x) pts.back().w += 1.0;
    else pts.push_back(p);
  }

  double sst = 0.0;
  double a_min = std::numeric_limits<double>::infinity(), a_max = -a_min;
  for (const auto& p : pts) {
    sst += p.w * p.a * p.a;
    a_min = std::min(a_min, p.a);
    a_max = std::max(a_max, p.a);
  }

  SegmentedFit fit;
  fit.feature = curve.feature;
  fit.kind = curve.kind;
  const double x_range = pts.back().x - pts.front().x;
  fit.slope_threshold = x_range > 0.0 ? 1e-12 * (a_max - a_min) / x_range : 0.0;

  std::vector<double> candidates;
  if (numeric) {
    const auto& z = curve.grid.boundaries;
    if (z.size() > 2) candidates.assign(z.begin() + 1, z.end() - 1);
  } else {
    for (std::size_t k = 0; k + 1 < curve.levels.size(); ++k) candidates.push_back(static_cast<double>(k));
  }

  auto r2_of = [&](double sse) { return sst > 0.0 ? 1.0 - sse / sst : 1.0; };

  Evaluation current = evaluate(pts, fit.breakpoints, numeric);
  if (!current.valid) {
    // fewer than two rows overall; a single constant describes the curve
    current.segments = {fit_segment(pts, false)};
    current.sse = segment_sse(pts, current.segments.front());
    current.valid = true;
  }
  double r2 = r2_of(current.sse);
  fit.r2_path.push_back(r2);

  const double target = 1.0 - epsilon;
  while (fit.breakpoints.size() + 1 < max_seg && r2 < target) {
    std::vector<double> best_breaks;
    Evaluation best;
    double best_r2 = -std::numeric_limits<double>::infinity();
    for (double c : candidates) {
      if (std::find(fit.breakpoints.begin(), fit.breakpoints.end(), c) != fit.breakpoints.end()) continue;
      std::vector<double> trial = fit.breakpoints;
      trial.insert(std::upper_bound(trial.begin(), trial.end(), c), c);
      Evaluation ev = evaluate(pts, trial, numeric);
      if (!ev.valid) continue;
      const double trial_r2 = r2_of(ev.sse);
      if (trial_r2 > best_r2 + 1e-12) {
        best_r2 = trial_r2;
        best = std::move(ev);
        best_breaks = std::move(trial);
      }
    }
    if (!best.valid) break;
    fit.breakpoints = std::move(best_breaks);
    current = std::move(best);
    r2 = best_r2;
    fit.r2_path.push_back(r2);
  }

  // Greedy slope zeroing.
  if (numeric) {
    const auto seg_ranges = ranges(pts, fit.breakpoints);
    for (;;) {
      std::size_t pick = current.segments.size();
      double pick_r2 = -std::numeric_limits<double>::infinity();
      double pick_sse = 0.0;
      Segment pick_segment;
      for (std::size_t s = 0; s < current.segments.size(); ++s) {
        const Segment& seg = current.segments[s];
        if (std::fabs(seg.slope) <= fit.slope_threshold) continue;
        const auto [begin, end] = seg_ranges[s];
        const auto part = std::span<const Point>(pts).subspan(begin, end - begin);
        const Segment flat = fit_segment(part, false);
        const double sse = current.sse - segment_sse(part, seg) + segment_sse(part, flat);
        const double trial_r2 = r2_of(sse);
        if (trial_r2 > pick_r2 + 1e-12) {
          pick = s;
          pick_r2 = trial_r2;
          pick_sse = sse;
          pick_segment = flat;
        }
      }
      if (pick == current.segments.size() || pick_r2 < target) break;
      current.segments[pick] = pick_segment;
      current.sse = pick_sse;
      r2 = pick_r2;
    }
  }

  fit.segments = std::move(current.segments);
  fit.segments_used = fit.segments.size();
  fit.r2 = r2;
  fit.mec = static_cast<int>(fit.segments_used + fit.nonzero_slopes()) - 1;
  return fit;
}

}  // namespace fdc

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "qe/error.hpp"
#include "qe/frame.hpp"

namespace qe {

namespace detail {

inline void require_same_size(const Plane& a, const Plane& b, const char* op) {
  if (!a.same_size(b)) {
    throw Error(ErrorKind::Shape, std::string(op) + ": planes are " + std::to_string(a.width()) + "x" +
                                      std::to_string(a.height()) + " and " + std::to_string(b.width()) + "x" +
                                      std::to_string(b.height()));
  }
}

inline void require_inside(const Plane& a, const Rect& r) {
  if (r.x < 0 || r.y < 0 || r.w <= 0 || r.h <= 0 || r.x + r.w > a.width() || r.y + r.h > a.height()) {
    throw Error(ErrorKind::Shape, "region lies outside the plane");
  }
}

}  // namespace detail

// Sum of squared differences over a region, exact in integer arithmetic.
inline std::int64_t sse_exact(const Plane& a, const Plane& b, const Rect& region) {
  detail::require_same_size(a, b, "sse");
  detail::require_inside(a, region);
  std::int64_t total = 0;
  for (int y = region.y; y < region.y + region.h; ++y) {
    for (int x = region.x; x < region.x + region.w; ++x) {
      const std::int64_t d = static_cast<std::int64_t>(a.at(x, y)) - b.at(x, y);
      total += d * d;
    }
  }
  return total;
}

inline std::int64_t sse_exact(const Plane& a, const Plane& b) {
  return sse_exact(a, b, Rect{0, 0, a.width(), a.height()});
}

inline double sse(const Plane& a, const Plane& b) { return static_cast<double>(sse_exact(a, b)); }

inline double mse(const Plane& a, const Plane& b) {
  return static_cast<double>(sse_exact(a, b)) / static_cast<double>(a.size());
}

inline double l1(const Plane& a, const Plane& b) {
  detail::require_same_size(a, b, "l1");
  std::int64_t total = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    total += std::abs(static_cast<std::int64_t>(a.samples()[i]) - b.samples()[i]);
  }
  return static_cast<double>(total) / static_cast<double>(a.size());
}

inline double psnr_from_mse(double mse_value) {
  if (mse_value == 0.0) return std::numeric_limits<double>::infinity();
  const double peak = static_cast<double>(kMaxSample);
  return 10.0 * std::log10(peak * peak / mse_value);
}

// Identical planes give +infinity.
inline double psnr(const Plane& a, const Plane& b) { return psnr_from_mse(mse(a, b)); }

// ---------------------------------------------------------------------------
// Bjontegaard delta rate
// ---------------------------------------------------------------------------

struct RdPoint {
  double rate = 0.0;
  double psnr = 0.0;
};

// Monotone piecewise cubic Hermite interpolant (Fritsch-Carlson slopes with the
// three-point, shape-preserving end conditions).
class PchipCurve {
 public:
  PchipCurve(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
    const std::size_t n = x_.size();
    if (n < 2 || y_.size() != n) throw Error(ErrorKind::Metric, "interpolation needs at least two points");
    std::vector<double> h(n - 1), delta(n - 1);
    for (std::size_t k = 0; k + 1 < n; ++k) {
      h[k] = x_[k + 1] - x_[k];
      if (!(h[k] > 0.0)) throw Error(ErrorKind::Metric, "interpolation abscissae must be strictly increasing");
      delta[k] = (y_[k + 1] - y_[k]) / h[k];
    }
    slope_.assign(n, 0.0);
    if (n == 2) {
      slope_[0] = slope_[1] = delta[0];
      return;
    }
    for (std::size_t k = 1; k + 1 < n; ++k) {
      if (delta[k - 1] * delta[k] <= 0.0) continue;
      const double w1 = 2.0 * h[k] + h[k - 1];
      const double w2 = h[k] + 2.0 * h[k - 1];
      slope_[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
    }
    slope_[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    slope_[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
  }

  double lo() const { return x_.front(); }
  double hi() const { return x_.back(); }

  double operator()(double x) const {
    const std::size_t k = segment(x);
    const double t = x - x_[k];
    const auto c = coefficients(k);
    return c[0] + t * (c[1] + t * (c[2] + t * c[3]));
  }

  // Exact integral of the interpolant over [a, b], lo() <= a <= b <= hi().
  double integrate(double a, double b) const {
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < x_.size(); ++k) {
      const double s0 = std::max(a, x_[k]);
      const double s1 = std::min(b, x_[k + 1]);
      if (s1 <= s0) continue;
      const auto c = coefficients(k);
      const auto antiderivative = [&](double x) {
        const double t = x - x_[k];
        return t * (c[0] + t * (c[1] / 2.0 + t * (c[2] / 3.0 + t * c[3] / 4.0)));
      };
      total += antiderivative(s1) - antiderivative(s0);
    }
    return total;
  }

  const std::vector<double>& slopes() const { return slope_; }

 private:
  static double end_slope(double h0, double h1, double d0, double d1) {
    double d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    const auto sign = [](double v) { return (v > 0.0) - (v < 0.0); };
    if (sign(d) != sign(d0)) {
      d = 0.0;
    } else if (sign(d0) != sign(d1) && std::abs(d) > std::abs(3.0 * d0)) {
      d = 3.0 * d0;
    }
    return d;
  }

  std::size_t segment(double x) const {
    const auto it = std::upper_bound(x_.begin(), x_.end(), x);
    const auto idx = static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - x_.begin() - 1, 0));
    return std::min(idx, x_.size() - 2);
  }

  std::array<double, 4> coefficients(std::size_t k) const {
    const double h = x_[k + 1] - x_[k];
    const double delta = (y_[k + 1] - y_[k]) / h;
    const double d0 = slope_[k];
    const double d1 = slope_[k + 1];
    return {y_[k], d0, (3.0 * delta - 2.0 * d0 - d1) / h, (d0 + d1 - 2.0 * delta) / (h * h)};
  }

  std::vector<double> x_;
  std::vector<double> y_;
  std::vector<double> slope_;
};

namespace detail {

// Validates a curve and returns log10(rate) as a function of PSNR.
inline PchipCurve log_rate_curve(const std::vector<RdPoint>& points, const char* which) {
  if (points.size() < 4) {
    throw Error(ErrorKind::Metric, std::string(which) + " curve has " + std::to_string(points.size()) +
                                       " points, need at least 4");
  }
  std::vector<double> x, y;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    if (!(p.rate > 0.0) || !std::isfinite(p.rate) || !std::isfinite(p.psnr)) {
      throw Error(ErrorKind::Metric, std::string(which) + " curve point " + std::to_string(i) +
                                         " needs a positive rate and finite PSNR");
    }
    if (i > 0 && !(p.rate > points[i - 1].rate)) {
      throw Error(ErrorKind::Metric, std::string(which) + " curve rates must be strictly increasing");
    }
    if (i > 0 && !(p.psnr > points[i - 1].psnr)) {
      throw Error(ErrorKind::Metric, std::string(which) + " curve PSNR must increase with rate");
    }
    x.push_back(p.psnr);
    y.push_back(std::log10(p.rate));
  }
  return PchipCurve(std::move(x), std::move(y));
}

}  // namespace detail

// Average bitrate difference in percent at equal PSNR; negative means the test curve saves rate.
// log10(rate) is interpolated over PSNR with a monotone piecewise cubic Hermite curve and
// integrated exactly over the overlapping PSNR interval.
inline double bd_rate(const std::vector<RdPoint>& anchor, const std::vector<RdPoint>& test) {
  const PchipCurve a = detail::log_rate_curve(anchor, "anchor");
  const PchipCurve t = detail::log_rate_curve(test, "test");
  const double lo = std::max(a.lo(), t.lo());
  const double hi = std::min(a.hi(), t.hi());
  if (!(hi > lo)) throw Error(ErrorKind::Metric, "anchor and test PSNR ranges do not overlap");
  const double avg_diff = (t.integrate(lo, hi) - a.integrate(lo, hi)) / (hi - lo);
  return 100.0 * (std::pow(10.0, avg_diff) - 1.0);
}

// "rate,psnr" per line; a non-numeric first line is treated as a header.
inline std::vector<RdPoint> read_rd_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open RD curve " + path.string());
  std::vector<RdPoint> points;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    RdPoint p;
    if (!(fields >> p.rate >> p.psnr)) {
      if (line_no == 1) continue;
      throw Error(ErrorKind::Format, path.string() + " line " + std::to_string(line_no) + ": expected rate,psnr");
    }
    points.push_back(p);
  }
  return points;
}

inline void write_rd_csv(const std::filesystem::path& path, const std::vector<RdPoint>& points) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot create " + path.string());
  out << "rate,psnr\n" << std::setprecision(17);
  for (const auto& p : points) out << p.rate << ',' << p.psnr << '\n';
}

}  // namespace qe

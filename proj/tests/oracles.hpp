#pragma once

// Brute-force reference implementations for the verification metrics. They
// recount everything from scratch at each candidate threshold and share no
// code with the library beyond the data types.

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <span>
#include <vector>

namespace kvc::oracle {

struct Point {
  double t, fmr, fnmr;
};

inline std::vector<Point> curve(std::span<const double> g, std::span<const double> i) {
  std::set<double> thresholds(g.begin(), g.end());
  thresholds.insert(i.begin(), i.end());
  const double lo = *thresholds.begin(), hi = *thresholds.rbegin();
  std::vector<double> ts{std::nextafter(lo, -std::numeric_limits<double>::infinity())};
  ts.insert(ts.end(), thresholds.begin(), thresholds.end());
  ts.push_back(std::nextafter(hi, std::numeric_limits<double>::infinity()));
  std::vector<Point> out;
  for (const double t : ts) {
    double fm = 0, fnm = 0;
    for (const double s : i) fm += s >= t ? 1 : 0;
    for (const double s : g) fnm += s < t ? 1 : 0;
    out.push_back({t, fm / static_cast<double>(i.size()), fnm / static_cast<double>(g.size())});
  }
  return out;
}

inline double eer(std::span<const double> g, std::span<const double> i) {
  const auto c = curve(g, i);
  for (const auto& p : c)
    if (p.fmr == p.fnmr) return p.fmr;
  for (std::size_t k = 0; k + 1 < c.size(); ++k) {
    const double d0 = c[k].fmr - c[k].fnmr, d1 = c[k + 1].fmr - c[k + 1].fnmr;
    if (d0 > 0 && d1 < 0) {
      // Intersection of the two straight segments.
      const double w = d0 / (d0 - d1);
      return c[k].fnmr + w * (c[k + 1].fnmr - c[k].fnmr);
    }
  }
  return std::numeric_limits<double>::quiet_NaN();
}

inline double fnmr_at_fmr(std::span<const double> g, std::span<const double> i, double x) {
  const auto c = curve(g, i);
  std::size_t b = 0;
  while (c[b].fmr > x) ++b;
  if (c[b].fmr == x || b == 0) return c[b].fnmr;
  const auto& a = c[b - 1];
  return a.fnmr + (a.fmr - x) / (a.fmr - c[b].fmr) * (c[b].fnmr - a.fnmr);
}

inline double auc(std::span<const double> g, std::span<const double> i) {
  double acc = 0;
  for (const double a : g)
    for (const double b : i) acc += a > b ? 1.0 : a == b ? 0.5 : 0.0;
  return acc / (static_cast<double>(g.size()) * static_cast<double>(i.size()));
}

inline double accuracy(std::span<const double> g, std::span<const double> i, double t) {
  double ok = 0;
  for (const double a : g) ok += a >= t;
  for (const double b : i) ok += b < t;
  return ok / static_cast<double>(g.size() + i.size());
}

// Sort the gallery {g} + impostors descending with the genuine score placed
// after every impostor it ties with, then read off its 1-based position.
inline double rank_n(std::span<const double> g, std::span<const double> i, std::size_t n) {
  double hits = 0;
  for (const double a : g) {
    std::vector<std::pair<double, int>> gallery{{a, 1}};
    for (const double b : i) gallery.push_back({b, 0});
    std::sort(gallery.begin(), gallery.end(), [](const auto& x, const auto& y) {
      if (x.first != y.first) return x.first > y.first;
      return x.second < y.second;
    });
    const auto pos = std::find_if(gallery.begin(), gallery.end(), [](const auto& e) { return e.second == 1; }) -
                     gallery.begin();
    hits += static_cast<std::size_t>(pos) < n ? 1 : 0;
  }
  return hits / static_cast<double>(g.size());
}

}  // namespace kvc::oracle

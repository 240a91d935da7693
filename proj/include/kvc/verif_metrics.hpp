#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "kvc/error.hpp"
#include "kvc/numeric.hpp"
#include "kvc/parallel.hpp"
#include "kvc/protocol.hpp"
#include "kvc/text.hpp"

namespace kvc {

// Decision rule throughout: a comparison is a match iff score >= threshold.

struct SweepPoint {
  double threshold = 0.0;
  double fmr = 0.0;
  double fnmr = 0.0;
};

/// Points in ascending threshold order: a sentinel just below the minimum
/// score, every distinct score, and a sentinel just above the maximum.
using SweepCurve = std::vector<SweepPoint>;

namespace detail {
inline void require_scores(std::span<const double> genuine, std::span<const double> impostor) {
  if (genuine.empty()) throw Error("no genuine scores");
  if (impostor.empty()) throw Error("no impostor scores");
}
}  // namespace detail

/// Sweep over already sorted inputs.
inline SweepCurve sweep_sorted(std::span<const double> g, std::span<const double> i) {
  detail::require_scores(g, i);
  const double n = static_cast<double>(g.size());
  const double m = static_cast<double>(i.size());
  const double lo = std::min(g.front(), i.front());
  const double hi = std::max(g.back(), i.back());

  SweepCurve curve;
  curve.reserve(g.size() + i.size() + 2);
  curve.push_back({std::nextafter(lo, -std::numeric_limits<double>::infinity()), 1.0, 0.0});
  std::size_t gi = 0, ii = 0;  // counts of scores strictly below the threshold
  while (gi < g.size() || ii < i.size()) {
    double t;
    if (gi == g.size()) t = i[ii];
    else if (ii == i.size()) t = g[gi];
    else t = std::min(g[gi], i[ii]);
    curve.push_back({t, static_cast<double>(i.size() - ii) / m, static_cast<double>(gi) / n});
    while (gi < g.size() && g[gi] == t) ++gi;
    while (ii < i.size() && i[ii] == t) ++ii;
  }
  curve.push_back({std::nextafter(hi, std::numeric_limits<double>::infinity()), 0.0, 1.0});
  return curve;
}

inline SweepCurve sweep(std::span<const double> genuine, std::span<const double> impostor) {
  detail::require_scores(genuine, impostor);
  std::vector<double> g(genuine.begin(), genuine.end());
  std::vector<double> i(impostor.begin(), impostor.end());
  std::sort(g.begin(), g.end());
  std::sort(i.begin(), i.end());
  return sweep_sorted(g, i);
}

struct EerResult {
  double rate = 0.0;
  double threshold = 0.0;
};

/// Crossing of FMR and FNMR: an exact crossing point if one exists,
/// otherwise linear interpolation between the bracketing sweep points.
inline EerResult eer(const SweepCurve& curve) {
  for (std::size_t k = 0; k < curve.size(); ++k) {
    const auto& p = curve[k];
    const double d = p.fmr - p.fnmr;
    if (d == 0.0) return {p.fmr, p.threshold};
    if (k + 1 < curve.size()) {
      const auto& q = curve[k + 1];
      const double e = q.fmr - q.fnmr;
      if (d > 0.0 && e < 0.0) {
        const double t = d / (d - e);
        return {p.fmr + t * (q.fmr - p.fmr), p.threshold + t * (q.threshold - p.threshold)};
      }
    }
  }
  throw Error("eer: curve has no FMR/FNMR crossing");
}

inline EerResult eer(std::span<const double> genuine, std::span<const double> impostor) {
  return eer(sweep(genuine, impostor));
}

namespace detail {
inline std::size_t first_at_or_below_fmr(const SweepCurve& curve, double x) {
  if (!(x > 0.0 && x < 1.0)) throw Error("target FMR must lie in (0, 1)");
  for (std::size_t k = 0; k < curve.size(); ++k)
    if (curve[k].fmr <= x) return k;
  return curve.size() - 1;
}
}  // namespace detail

/// Smallest sweep threshold whose FMR does not exceed `x`.
inline double threshold_at_fmr(const SweepCurve& curve, double x) {
  return curve[detail::first_at_or_below_fmr(curve, x)].threshold;
}

/// FNMR at FMR = x, interpolated between the last point above x and the
/// first point at or below it.
inline double fnmr_at_fmr(const SweepCurve& curve, double x) {
  const std::size_t b = detail::first_at_or_below_fmr(curve, x);
  const auto& pb = curve[b];
  if (pb.fmr == x || b == 0) return pb.fnmr;
  const auto& pa = curve[b - 1];
  const double t = (pa.fmr - x) / (pa.fmr - pb.fmr);
  return pa.fnmr + t * (pb.fnmr - pa.fnmr);
}

inline double fnmr_at_fmr(std::span<const double> genuine, std::span<const double> impostor,
                          double x) {
  return fnmr_at_fmr(sweep(genuine, impostor), x);
}

/// Mann-Whitney statistic P(g > i) + 0.5 P(g = i), which equals the area
/// under the ROC curve.
inline double auc(std::span<const double> genuine, std::span<const double> impostor) {
  detail::require_scores(genuine, impostor);
  std::vector<double> imp(impostor.begin(), impostor.end());
  std::sort(imp.begin(), imp.end());
  std::uint64_t twice = 0;  // 2 * (#less) + #equal, exact in integers
  for (const double g : genuine) {
    const auto lo = std::lower_bound(imp.begin(), imp.end(), g);
    const auto hi = std::upper_bound(lo, imp.end(), g);
    twice += 2 * static_cast<std::uint64_t>(lo - imp.begin()) + static_cast<std::uint64_t>(hi - lo);
  }
  return static_cast<double>(twice) /
         (2.0 * static_cast<double>(genuine.size()) * static_cast<double>(impostor.size()));
}

/// Trapezoidal area under TMR(FMR) over the sweep points.
inline double roc_area(const SweepCurve& curve) {
  double area = 0.0;
  for (std::size_t k = 0; k + 1 < curve.size(); ++k) {
    const auto& p = curve[k];
    const auto& q = curve[k + 1];
    area += (p.fmr - q.fmr) * ((1.0 - p.fnmr) + (1.0 - q.fnmr)) * 0.5;
  }
  return area;
}

inline double accuracy_at(std::span<const double> genuine, std::span<const double> impostor,
                          double threshold) {
  std::size_t correct = 0;
  for (const double g : genuine) correct += g >= threshold;
  for (const double i : impostor) correct += i < threshold;
  const std::size_t total = genuine.size() + impostor.size();
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

/// Fraction of genuine scores ranked within the top n against the impostor
/// gallery. Ties with an impostor count against the genuine score.
inline double rank_n(std::span<const double> genuine, std::span<const double> impostor, std::size_t n) {
  if (n == 0) throw Error("rank_n: n must be >= 1");
  if (genuine.empty()) throw Error("rank_n: no genuine scores");
  std::size_t hits = 0;
  for (const double g : genuine) {
    std::size_t above = 0;
    for (const double i : impostor) above += i >= g;
    hits += above < n;
  }
  return static_cast<double>(hits) / static_cast<double>(genuine.size());
}

inline double rank_n(const SubjectScoreProfile& profile, std::size_t n) {
  const auto imp = profile.impostors();
  return rank_n(profile.genuine, imp, n);
}

enum class EvalMode : std::uint8_t { global, mean_per_subject };

inline std::string_view to_string(EvalMode m) {
  return m == EvalMode::global ? "global" : "mean_per_subject";
}

struct VerificationReport {
  EvalMode mode = EvalMode::global;
  std::optional<double> eer;
  std::optional<double> eer_threshold;
  std::optional<double> fnmr_at_fmr_1;
  std::optional<double> fnmr_at_fmr_10;
  std::optional<double> auc;
  std::optional<double> accuracy;
  std::optional<double> rank1;

  nlohmann::ordered_json to_json() const {
    const auto opt = [](const std::optional<double>& v) -> nlohmann::ordered_json {
      if (v && std::isfinite(*v)) return *v;
      return nullptr;
    };
    nlohmann::ordered_json j;
    j["eer"] = opt(eer);
    j["eer_threshold"] = opt(eer_threshold);
    j["fnmr_at_fmr_1"] = opt(fnmr_at_fmr_1);
    j["fnmr_at_fmr_10"] = opt(fnmr_at_fmr_10);
    j["auc"] = opt(auc);
    j["accuracy"] = opt(accuracy);
    j["rank1"] = opt(rank1);
    j["mode"] = std::string(to_string(mode));
    return j;
  }
};

struct PooledScores {
  std::vector<double> genuine;
  std::vector<double> similar_impostor;
  std::vector<double> dissimilar_impostor;

  std::vector<double> impostor() const {
    std::vector<double> out(similar_impostor);
    out.insert(out.end(), dissimilar_impostor.begin(), dissimilar_impostor.end());
    return out;
  }
};

inline PooledScores pool(std::span<const SubjectScoreProfile> profiles) {
  PooledScores out;
  out.genuine.reserve(profiles.size() * kVerificationSessions);
  out.similar_impostor.reserve(profiles.size() * kImpostorProbes);
  out.dissimilar_impostor.reserve(profiles.size() * kImpostorProbes);
  for (const auto& p : profiles) {
    out.genuine.insert(out.genuine.end(), p.genuine.begin(), p.genuine.end());
    out.similar_impostor.insert(out.similar_impostor.end(), p.similar_impostor.begin(),
                                p.similar_impostor.end());
    out.dissimilar_impostor.insert(out.dissimilar_impostor.end(), p.dissimilar_impostor.begin(),
                                   p.dissimilar_impostor.end());
  }
  return out;
}

/// Pools every subject's genuine and impostor scores under one threshold.
inline VerificationReport evaluate_global(std::span<const double> genuine,
                                          std::span<const double> impostor) {
  std::vector<double> g(genuine.begin(), genuine.end());
  std::vector<double> i(impostor.begin(), impostor.end());
  std::sort(g.begin(), g.end());
  std::sort(i.begin(), i.end());
  const auto curve = sweep_sorted(g, i);
  const auto e = eer(curve);

  VerificationReport r;
  r.mode = EvalMode::global;
  r.eer = e.rate;
  r.eer_threshold = e.threshold;
  r.fnmr_at_fmr_1 = fnmr_at_fmr(curve, 0.01);
  r.fnmr_at_fmr_10 = fnmr_at_fmr(curve, 0.10);
  r.auc = auc(g, i);
  r.accuracy = accuracy_at(g, i, e.threshold);
  return r;
}

inline VerificationReport evaluate_global(std::span<const SubjectScoreProfile> profiles) {
  if (profiles.empty()) throw Error("evaluate_global: no profiles");
  const auto pooled = pool(profiles);
  return evaluate_global(pooled.genuine, pooled.impostor());
}

struct SubjectMetrics {
  double eer = 0.0;
  double eer_threshold = 0.0;
  double auc = 0.0;
  double accuracy = 0.0;
  double rank1 = 0.0;
};

inline SubjectMetrics evaluate_subject(const SubjectScoreProfile& p) {
  const auto imp = p.impostors();
  const auto e = eer(p.genuine, imp);
  return {e.rate, e.threshold, auc(p.genuine, imp), accuracy_at(p.genuine, imp, e.threshold),
          rank_n(p.genuine, imp, 1)};
}

/// Per-subject threshold from each subject's 10 genuine and 20 impostor
/// scores; fields are means over subjects. FNMR@FMR is left absent.
inline VerificationReport evaluate_per_subject(std::span<const SubjectScoreProfile> profiles,
                                               unsigned threads = 1) {
  if (profiles.empty()) throw Error("evaluate_per_subject: no profiles");
  std::vector<SubjectMetrics> per(profiles.size());
  parallel_for(profiles.size(), threads, [&](std::size_t k) { per[k] = evaluate_subject(profiles[k]); });

  const auto mean_field = [&](double SubjectMetrics::*field) {
    std::vector<double> v(per.size());
    for (std::size_t k = 0; k < per.size(); ++k) v[k] = per[k].*field;
    return mean_of(v);
  };
  VerificationReport r;
  r.mode = EvalMode::mean_per_subject;
  r.eer = mean_field(&SubjectMetrics::eer);
  r.eer_threshold = mean_field(&SubjectMetrics::eer_threshold);
  r.auc = mean_field(&SubjectMetrics::auc);
  r.accuracy = mean_field(&SubjectMetrics::accuracy);
  r.rank1 = mean_field(&SubjectMetrics::rank1);
  return r;
}

inline constexpr std::size_t kHistogramBins = 100;

struct CurveMarker {
  std::string name;
  double threshold = 0.0;
  double fmr = 0.0;
  double fnmr = 0.0;
};

struct CurveData {
  SweepCurve det;
  std::array<std::array<std::size_t, kHistogramBins>, 3> histogram{};  // genuine, similar, dissimilar
  std::vector<CurveMarker> markers;
};

inline std::size_t histogram_bin(double score) {
  const auto b = static_cast<std::size_t>(std::floor(score * static_cast<double>(kHistogramBins)));
  return std::min(b, kHistogramBins - 1);
}

inline CurveData compute_curves(const PooledScores& scores) {
  CurveData out;
  const auto imp = scores.impostor();
  out.det = sweep(scores.genuine, imp);
  const auto put = [&](std::size_t series, std::span<const double> v) {
    for (const double s : v) ++out.histogram[series][histogram_bin(s)];
  };
  put(0, scores.genuine);
  put(1, scores.similar_impostor);
  put(2, scores.dissimilar_impostor);

  const auto e = eer(out.det);
  out.markers.push_back({"eer", e.threshold, e.rate, e.rate});
  for (const auto& [name, x] : {std::pair{"fmr_1pct", 0.01}, std::pair{"fmr_10pct", 0.10}}) {
    const double t = threshold_at_fmr(out.det, x);
    const auto& p = *std::find_if(out.det.begin(), out.det.end(),
                                  [t](const SweepPoint& q) { return q.threshold == t; });
    out.markers.push_back({name, t, p.fmr, p.fnmr});
  }
  return out;
}

inline std::string format_det(const SweepCurve& curve) {
  std::string out = "threshold,fmr,fnmr\n";
  out.reserve(curve.size() * 40);
  for (const auto& p : curve) {
    text::append_double(out, p.threshold);
    out.push_back(',');
    text::append_double(out, p.fmr);
    out.push_back(',');
    text::append_double(out, p.fnmr);
    out.push_back('\n');
  }
  return out;
}

inline std::string format_roc(const SweepCurve& curve) {
  std::string out = "fmr,tmr\n";
  out.reserve(curve.size() * 28);
  for (const auto& p : curve) {
    text::append_double(out, p.fmr);
    out.push_back(',');
    text::append_double(out, 1.0 - p.fnmr);
    out.push_back('\n');
  }
  return out;
}

inline std::string format_histogram(const CurveData& c) {
  std::string out = "bin_low,bin_high,genuine,similar_impostor,dissimilar_impostor\n";
  for (std::size_t b = 0; b < kHistogramBins; ++b) {
    text::append_double(out, static_cast<double>(b) / kHistogramBins);
    out.push_back(',');
    text::append_double(out, static_cast<double>(b + 1) / kHistogramBins);
    for (const auto& series : c.histogram) {
      out.push_back(',');
      out.append(std::to_string(series[b]));
    }
    out.push_back('\n');
  }
  return out;
}

inline std::string format_markers(const CurveData& c) {
  std::string out = "marker,threshold,fmr,fnmr\n";
  for (const auto& m : c.markers) {
    out.append(m.name).push_back(',');
    text::append_double(out, m.threshold);
    out.push_back(',');
    text::append_double(out, m.fmr);
    out.push_back(',');
    text::append_double(out, m.fnmr);
    out.push_back('\n');
  }
  return out;
}

struct CurvePaths {
  std::filesystem::path det;
  std::filesystem::path roc;
  std::filesystem::path histogram;
  std::filesystem::path markers;

  static CurvePaths in(const std::filesystem::path& dir) {
    return {dir / "det.csv", dir / "roc.csv", dir / "histogram.csv", dir / "markers.csv"};
  }
};

/// Writes DET, ROC, histogram and threshold-marker CSVs.
inline CurveData emit_curves(const PooledScores& scores, const CurvePaths& paths) {
  auto data = compute_curves(scores);
  text::write_file(paths.det, format_det(data.det));
  text::write_file(paths.roc, format_roc(data.det));
  text::write_file(paths.histogram, format_histogram(data));
  text::write_file(paths.markers, format_markers(data));
  return data;
}

}  // namespace kvc

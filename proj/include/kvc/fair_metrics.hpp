#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "kvc/dataset.hpp"
#include "kvc/error.hpp"
#include "kvc/numeric.hpp"
#include "kvc/protocol.hpp"
#include "kvc/verif_metrics.hpp"

namespace kvc {

enum class ThresholdPolicy : std::uint8_t { global_eer_threshold, fmr_1pct_threshold };

inline std::string_view to_string(ThresholdPolicy p) {
  return p == ThresholdPolicy::global_eer_threshold ? "global_eer_threshold" : "fmr_1pct_threshold";
}

/// How subjects are partitioned: 12 age x gender groups, or one attribute.
enum class GroupView : std::uint8_t { full, age, gender };

inline std::size_t group_count(GroupView v) {
  switch (v) {
    case GroupView::full: return kGroupCount;
    case GroupView::age: return kAgeBinCount;
    case GroupView::gender: return kGenderCount;
  }
  return 0;
}

inline std::size_t group_index(const DemographicGroup& g, GroupView v) {
  switch (v) {
    case GroupView::full: return g.index();
    case GroupView::age: return static_cast<std::size_t>(g.age);
    case GroupView::gender: return static_cast<std::size_t>(g.gender);
  }
  return 0;
}

inline std::string group_label(std::size_t index, GroupView v) {
  switch (v) {
    case GroupView::full: return DemographicGroup::from_index(index).label();
    case GroupView::age: return std::string(kAgeBinTokens[index]);
    case GroupView::gender: return std::string(kGenderTokens[index]);
  }
  return {};
}

namespace detail {

// Mean that is exact for constant input and independent of element order.
inline double stable_mean(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double base = v.front();
  for (auto& x : v) x -= base;
  return base + pairwise_sum(v) / static_cast<double>(v.size());
}

inline const DemographicGroup& group_of(const DemographicMap& demographics, const std::string& subject) {
  const auto it = demographics.find(subject);
  if (it == demographics.end())
    throw ValidationError("subject '" + subject + "' has no demographic label");
  return it->second;
}

}  // namespace detail

struct GroupRow {
  std::string label;
  double fmr = 0.0;
  double fnmr = 0.0;
  double eer = 0.0;
  double accuracy = 0.0;
  std::size_t genuine_count = 0;
  std::size_t impostor_count = 0;
};

struct GroupErrorTable {
  ThresholdPolicy policy = ThresholdPolicy::global_eer_threshold;
  GroupView view = GroupView::full;
  double threshold = 0.0;
  std::vector<GroupRow> rows;  // populated groups only, in group index order

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["threshold_policy"] = std::string(to_string(policy));
    j["threshold"] = threshold;
    auto& arr = j["groups"] = nlohmann::ordered_json::array();
    for (const auto& r : rows)
      arr.push_back({{"group", r.label},
                     {"fmr", r.fmr},
                     {"fnmr", r.fnmr},
                     {"eer", r.eer},
                     {"accuracy", r.accuracy},
                     {"genuine_count", r.genuine_count},
                     {"impostor_count", r.impostor_count}});
    return j;
  }
};

/// Per-group error rates at a fixed threshold. Genuine scores count toward
/// the owner's group FNMR and impostor scores toward the owner's group FMR;
/// the per-group EER uses that group's own pooled scores.
inline GroupErrorTable group_table(std::span<const SubjectScoreProfile> profiles,
                                   const DemographicMap& demographics, double threshold,
                                   ThresholdPolicy policy, GroupView view = GroupView::full) {
  const std::size_t n = group_count(view);
  std::vector<std::vector<double>> genuine(n), impostor(n);
  for (const auto& p : profiles) {
    const auto g = group_index(detail::group_of(demographics, p.subject_id), view);
    genuine[g].insert(genuine[g].end(), p.genuine.begin(), p.genuine.end());
    const auto imp = p.impostors();
    impostor[g].insert(impostor[g].end(), imp.begin(), imp.end());
  }

  GroupErrorTable table;
  table.policy = policy;
  table.view = view;
  table.threshold = threshold;
  for (std::size_t g = 0; g < n; ++g) {
    if (genuine[g].empty() && impostor[g].empty()) continue;
    if (genuine[g].empty() || impostor[g].empty())
      throw ValidationError("empty group: " + group_label(g, view) + " lacks genuine or impostor scores");
    GroupRow row;
    row.label = group_label(g, view);
    std::size_t fm = 0, fnm = 0;
    for (const double s : impostor[g]) fm += s >= threshold;
    for (const double s : genuine[g]) fnm += s < threshold;
    row.fmr = static_cast<double>(fm) / static_cast<double>(impostor[g].size());
    row.fnmr = static_cast<double>(fnm) / static_cast<double>(genuine[g].size());
    row.eer = eer(genuine[g], impostor[g]).rate;
    row.accuracy = accuracy_at(genuine[g], impostor[g], threshold);
    row.genuine_count = genuine[g].size();
    row.impostor_count = impostor[g].size();
    table.rows.push_back(std::move(row));
  }
  if (table.rows.empty()) throw ValidationError("group_table: no labeled subjects");
  return table;
}

enum class GroupQuantity : std::uint8_t { eer, accuracy };

inline std::vector<double> cells(const GroupErrorTable& table, GroupQuantity q) {
  std::vector<double> out;
  out.reserve(table.rows.size());
  for (const auto& r : table.rows) out.push_back(q == GroupQuantity::eer ? r.eer : r.accuracy);
  return out;
}

/// Population standard deviation of the cells. Cells are fractions; the
/// result is in percent.
inline double std_metric(std::span<const double> cells) {
  if (cells.size() < 2) throw Error("std_metric: need at least 2 groups");
  std::vector<double> v(cells.begin(), cells.end());
  const double m = detail::stable_mean(v);
  std::vector<double> sq(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) sq[i] = (v[i] - m) * (v[i] - m);
  return 100.0 * std::sqrt(pairwise_sum(sq) / static_cast<double>(v.size()));
}

inline double std_metric(const GroupErrorTable& table, GroupQuantity q = GroupQuantity::eer) {
  return std_metric(cells(table, q));
}

/// max / min over the cells; +infinity when the smallest cell is 0 and the
/// cells differ.
inline double ser_metric(std::span<const double> cells) {
  if (cells.size() < 2) throw Error("ser_metric: need at least 2 groups");
  const auto [lo, hi] = std::minmax_element(cells.begin(), cells.end());
  if (*lo == *hi) return 1.0;
  if (*lo == 0.0) return std::numeric_limits<double>::infinity();
  return *hi / *lo;
}

inline double ser_metric(const GroupErrorTable& table, GroupQuantity q = GroupQuantity::eer) {
  return ser_metric(cells(table, q));
}

namespace detail {
inline double max_gap(std::span<const double> v) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return *hi - *lo;
}
inline void require_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error("alpha must lie in [0, 1]");
}
inline std::vector<double> fmrs(const GroupErrorTable& t) {
  std::vector<double> v;
  for (const auto& r : t.rows) v.push_back(r.fmr);
  return v;
}
inline std::vector<double> fnmrs(const GroupErrorTable& t) {
  std::vector<double> v;
  for (const auto& r : t.rows) v.push_back(r.fnmr);
  return v;
}
}  // namespace detail

/// Fairness discrepancy rate: 1 - (alpha * max FMR gap + (1 - alpha) * max
/// FNMR gap). 1 is fair.
inline double fdr(std::span<const double> fmr, std::span<const double> fnmr, double alpha) {
  detail::require_alpha(alpha);
  if (fmr.empty() || fnmr.empty()) throw Error("fdr: no groups");
  return 1.0 - (alpha * detail::max_gap(fmr) + (1.0 - alpha) * detail::max_gap(fnmr));
}

inline double fdr(const GroupErrorTable& t, double alpha) {
  return fdr(detail::fmrs(t), detail::fnmrs(t), alpha);
}

namespace detail {
// max/min ratio; 1 when all equal (including all zero), +inf for a zero min.
inline double spread_ratio(std::span<const double> v) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  if (*lo == *hi) return 1.0;
  if (*lo == 0.0) return std::numeric_limits<double>::infinity();
  return *hi / *lo;
}
}  // namespace detail

/// Inequity rate: (max/min FMR)^alpha * (max/min FNMR)^(1-alpha). 1 is fair;
/// +infinity flags a zero denominator.
inline double ir(std::span<const double> fmr, std::span<const double> fnmr, double alpha) {
  detail::require_alpha(alpha);
  if (fmr.empty() || fnmr.empty()) throw Error("ir: no groups");
  const double a = detail::spread_ratio(fmr);
  const double b = detail::spread_ratio(fnmr);
  if (std::isinf(a) && alpha > 0.0) return a;
  if (std::isinf(b) && alpha < 1.0) return b;
  return (alpha > 0.0 ? std::pow(a, alpha) : 1.0) * (alpha < 1.0 ? std::pow(b, 1.0 - alpha) : 1.0);
}

inline double ir(const GroupErrorTable& t, double alpha) {
  return ir(detail::fmrs(t), detail::fnmrs(t), alpha);
}

/// Gini coefficient with the n/(n-1) small-sample correction; 0 when the
/// mean rate is 0.
inline double gini(std::span<const double> rates) {
  const std::size_t n = rates.size();
  if (n < 2) throw Error("gini: need at least 2 groups");
  const double mean = detail::stable_mean({rates.begin(), rates.end()});
  if (mean == 0.0) return 0.0;
  std::vector<double> diffs;
  diffs.reserve(n * n);
  for (const double a : rates)
    for (const double b : rates) diffs.push_back(std::fabs(a - b));
  const double nn = static_cast<double>(n);
  return (nn / (nn - 1.0)) * (pairwise_sum(diffs) / (2.0 * nn * nn * mean));
}

/// alpha * G(FMR) + (1 - alpha) * G(FNMR). 0 is fair.
inline double garbe(std::span<const double> fmr, std::span<const double> fnmr, double alpha) {
  detail::require_alpha(alpha);
  return alpha * gini(fmr) + (1.0 - alpha) * gini(fnmr);
}

inline double garbe(const GroupErrorTable& t, double alpha) {
  return garbe(detail::fmrs(t), detail::fnmrs(t), alpha);
}

enum class Attribute : std::uint8_t { age, gender };

inline std::string_view to_string(Attribute a) { return a == Attribute::age ? "age" : "gender"; }

/// Symmetric matrix of mean impostor scores between owner group i and probe
/// group j for one attribute; (i, j) and (j, i) comparisons share a cell.
struct SirMatrix {
  Attribute attribute = Attribute::age;
  std::size_t n = 0;
  std::vector<std::string> labels;
  std::vector<double> mean;         // n x n, symmetric
  std::vector<std::size_t> count;   // n x n, symmetric

  double at(std::size_t i, std::size_t j) const { return mean[i * n + j]; }
  std::size_t count_at(std::size_t i, std::size_t j) const { return count[i * n + j]; }

  /// Builds a matrix from cell means given as a full n x n row-major array;
  /// only the upper triangle is read.
  static SirMatrix from_means(std::size_t n, std::span<const double> values,
                              Attribute attribute = Attribute::age) {
    if (values.size() != n * n) throw Error("SirMatrix::from_means: expected n*n values");
    SirMatrix m;
    m.attribute = attribute;
    m.n = n;
    m.mean.assign(n * n, 0.0);
    m.count.assign(n * n, 1);
    for (std::size_t i = 0; i < n; ++i) {
      m.labels.push_back(std::to_string(i));
      for (std::size_t j = i; j < n; ++j) m.mean[i * n + j] = m.mean[j * n + i] = values[i * n + j];
    }
    return m;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["attribute"] = std::string(to_string(attribute));
    j["labels"] = labels;
    auto rows = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < n; ++i) {
      auto row = nlohmann::ordered_json::array();
      for (std::size_t k = 0; k < n; ++k) row.push_back(at(i, k));
      rows.push_back(std::move(row));
    }
    j["matrix"] = std::move(rows);
    return j;
  }
};

/// Cell means from the 5-enrolment-averaged impostor scores.
inline SirMatrix build_sir_matrix(std::span<const SubjectScoreProfile> profiles,
                                  const DemographicMap& demographics, Attribute attribute) {
  const GroupView view = attribute == Attribute::age ? GroupView::age : GroupView::gender;
  const std::size_t n = group_count(view);
  std::vector<std::vector<double>> cell(n * n);
  const auto add = [&](std::size_t a, std::size_t b, double s) {
    if (a > b) std::swap(a, b);
    cell[a * n + b].push_back(s);
  };
  for (const auto& p : profiles) {
    const auto a = group_index(detail::group_of(demographics, p.subject_id), view);
    for (std::size_t k = 0; k < kImpostorProbes; ++k) {
      add(a, group_index(detail::group_of(demographics, p.similar_probe_subjects[k]), view),
          p.similar_impostor[k]);
      add(a, group_index(detail::group_of(demographics, p.dissimilar_probe_subjects[k]), view),
          p.dissimilar_impostor[k]);
    }
  }
  SirMatrix m;
  m.attribute = attribute;
  m.n = n;
  m.mean.assign(n * n, 0.0);
  m.count.assign(n * n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    m.labels.push_back(group_label(i, view));
    for (std::size_t j = i; j < n; ++j) {
      const auto& v = cell[i * n + j];
      const double mu = detail::stable_mean(v);
      m.mean[i * n + j] = m.mean[j * n + i] = mu;
      m.count[i * n + j] = m.count[j * n + i] = v.size();
    }
  }
  return m;
}

/// Skewed impostor ratio in percent: 100 * (mean diagonal cell / mean
/// upper-triangle cell - 1). 0 means no demographic skew.
inline double sir(const SirMatrix& m) {
  if (m.n < 2) throw Error("sir: need at least 2 groups");
  std::vector<double> diag, off;
  for (std::size_t i = 0; i < m.n; ++i) {
    for (std::size_t j = i; j < m.n; ++j) {
      if (m.count_at(i, j) == 0)
        throw ValidationError("sir: no impostor comparisons for pair " + m.labels[i] + " vs " +
                              m.labels[j]);
      (i == j ? diag : off).push_back(m.at(i, j));
    }
  }
  const double d = detail::stable_mean(diag);
  const double o = detail::stable_mean(off);
  if (o == 0.0) return d == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return 100.0 * (d / o - 1.0);
}

inline double sir(std::span<const SubjectScoreProfile> profiles, const DemographicMap& demographics,
                  Attribute attribute) {
  return sir(build_sir_matrix(profiles, demographics, attribute));
}

inline constexpr double kDefaultAlpha = 0.5;

struct FairnessReport {
  double alpha = kDefaultAlpha;
  double std_pct = 0.0;           // per-group EER
  double ser = 1.0;
  double std_accuracy_pct = 0.0;  // per-group accuracy at the global EER threshold
  double ser_accuracy = 1.0;
  double fdr = 1.0;
  double ir = 1.0;
  double garbe = 0.0;
  double sir_age_pct = 0.0;
  double sir_gender_pct = 0.0;
  GroupErrorTable eer_table;
  GroupErrorTable fmr_table;
  SirMatrix sir_age;
  SirMatrix sir_gender;

  nlohmann::ordered_json to_json() const {
    const auto num = [](double v) -> nlohmann::ordered_json {
      if (std::isfinite(v)) return v;
      return nullptr;
    };
    nlohmann::ordered_json j;
    j["std_pct"] = num(std_pct);
    j["ser"] = num(ser);
    j["fdr"] = num(fdr);
    j["ir"] = num(ir);
    j["garbe"] = num(garbe);
    j["sir_age_pct"] = num(sir_age_pct);
    j["sir_gender_pct"] = num(sir_gender_pct);
    j["alpha"] = alpha;
    j["threshold_policy"] = {{"std_ser", std::string(to_string(eer_table.policy))},
                             {"fdr_ir_garbe", std::string(to_string(fmr_table.policy))}};
    j["std_accuracy_pct"] = num(std_accuracy_pct);
    j["ser_accuracy"] = num(ser_accuracy);
    j["infinite"] = {{"ser", std::isinf(ser)},
                     {"ser_accuracy", std::isinf(ser_accuracy)},
                     {"ir", std::isinf(ir)},
                     {"sir_age_pct", std::isinf(sir_age_pct)},
                     {"sir_gender_pct", std::isinf(sir_gender_pct)}};
    j["group_table_eer_threshold"] = eer_table.to_json();
    j["group_table_fmr_1pct_threshold"] = fmr_table.to_json();
    j["sir_age_matrix"] = sir_age.to_json();
    j["sir_gender_matrix"] = sir_gender.to_json();
    return j;
  }
};

/// STD/SER at the global EER threshold, FDR/IR/GARBE at the global FMR = 1%
/// threshold, SIR over age and gender separately.
inline FairnessReport fairness_report(std::span<const SubjectScoreProfile> profiles,
                                      const DemographicMap& demographics,
                                      double alpha = kDefaultAlpha) {
  detail::require_alpha(alpha);
  if (profiles.empty()) throw Error("fairness_report: no profiles");
  const auto pooled = pool(profiles);
  const auto curve = sweep(pooled.genuine, pooled.impostor());
  const double eer_threshold = eer(curve).threshold;
  const double fmr1_threshold = threshold_at_fmr(curve, 0.01);

  FairnessReport r;
  r.alpha = alpha;
  r.eer_table = group_table(profiles, demographics, eer_threshold, ThresholdPolicy::global_eer_threshold);
  r.fmr_table = group_table(profiles, demographics, fmr1_threshold, ThresholdPolicy::fmr_1pct_threshold);
  if (r.eer_table.rows.size() < 2)
    throw ValidationError("fairness_report: need at least 2 populated demographic groups");
  r.std_pct = std_metric(r.eer_table, GroupQuantity::eer);
  r.ser = ser_metric(r.eer_table, GroupQuantity::eer);
  r.std_accuracy_pct = std_metric(r.eer_table, GroupQuantity::accuracy);
  r.ser_accuracy = ser_metric(r.eer_table, GroupQuantity::accuracy);
  r.fdr = fdr(r.fmr_table, alpha);
  r.ir = ir(r.fmr_table, alpha);
  r.garbe = garbe(r.fmr_table, alpha);
  r.sir_age = build_sir_matrix(profiles, demographics, Attribute::age);
  r.sir_gender = build_sir_matrix(profiles, demographics, Attribute::gender);
  r.sir_age_pct = sir(r.sir_age);
  r.sir_gender_pct = sir(r.sir_gender);
  return r;
}

}  // namespace kvc

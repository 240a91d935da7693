#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "kvc/dataset.hpp"
#include "kvc/error.hpp"
#include "kvc/features.hpp"
#include "kvc/numeric.hpp"
#include "kvc/parallel.hpp"
#include "kvc/protocol.hpp"

namespace kvc {

/// Per-channel (mean, std, median) triples followed by log(session length).
using Embedding = std::vector<double>;

constexpr std::size_t embedding_width(FeatureSet fs) { return 3 * channel_count(fs) + 1; }

inline Embedding embed(const FeatureSequence& seq) {
  const auto stats = feature_matrix_stats(seq);
  Embedding out;
  out.reserve(3 * stats.size() + 1);
  for (const auto& s : stats) {
    out.push_back(s.mean);
    out.push_back(s.stddev);
    out.push_back(s.median);
  }
  out.push_back(std::log(static_cast<double>(seq.rows)));
  return out;
}

inline double distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw Error("distance: embedding widths differ (" + std::to_string(a.size()) + " vs " +
                std::to_string(b.size()) + ")");
  double ss = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) ss += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(ss);
}

/// Per-dimension z-scaling fitted on a batch. Dimensions with zero spread
/// are only centred.
class Standardizer {
 public:
  Standardizer() = default;

  static Standardizer fit(std::span<const Embedding> batch) {
    Standardizer s;
    if (batch.empty()) return s;
    const std::size_t w = batch.front().size();
    s.mean_.assign(w, 0.0);
    s.scale_.assign(w, 1.0);
    std::vector<double> column(batch.size());
    for (std::size_t k = 0; k < w; ++k) {
      for (std::size_t i = 0; i < batch.size(); ++i) {
        if (batch[i].size() != w) throw Error("Standardizer::fit: ragged batch");
        column[i] = batch[i][k];
      }
      s.mean_[k] = mean_of(column);
      const double sd = population_std(column);
      s.scale_[k] = sd > 0.0 ? sd : 1.0;
    }
    return s;
  }

  Embedding apply(std::span<const double> e) const {
    if (e.size() != mean_.size()) throw Error("Standardizer::apply: width mismatch");
    Embedding out(e.size());
    for (std::size_t k = 0; k < e.size(); ++k) out[k] = (e[k] - mean_[k]) / scale_[k];
    return out;
  }

  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& scale() const { return scale_; }

 private:
  std::vector<double> mean_;
  std::vector<double> scale_;
};

/// Batch min-max normalisation turned into similarity: 1 - (d - min) / (max - min).
/// A batch with no spread maps to 0.5 everywhere.
inline std::vector<double> normalize_distances(std::span<const double> distances) {
  std::vector<double> out(distances.size(), 0.5);
  if (distances.empty()) return out;
  const auto [lo, hi] = std::minmax_element(distances.begin(), distances.end());
  const double span = *hi - *lo;
  if (!(span > 0.0)) return out;
  for (std::size_t i = 0; i < distances.size(); ++i) {
    const double s = 1.0 - (distances[i] - *lo) / span;
    out[i] = std::clamp(s, 0.0, 1.0);
  }
  return out;
}

struct VerifierOutput {
  std::vector<double> distances;
  std::vector<double> scores;
};

/// Anything that turns a plan into aligned similarity scores in [0, 1].
class Verifier {
 public:
  virtual ~Verifier() = default;
  virtual VerifierOutput score(const ComparisonPlan& plan, const Dataset& dataset) const = 0;
};

/// Training-free statistical baseline: session embeddings, z-scaled over the
/// sessions the plan touches, compared by Euclidean distance.
class BaselineVerifier final : public Verifier {
 public:
  explicit BaselineVerifier(FeatureSet fs = FeatureSet::F5, unsigned threads = 1)
      : feature_set_(fs), threads_(threads) {}

  VerifierOutput score(const ComparisonPlan& plan, const Dataset& dataset) const override {
    // Resolve every referenced session once, with the subject that owns it.
    const std::size_t n_sessions = plan.session_ids.size();
    std::vector<std::int64_t> owner_of(n_sessions, -1);
    for (const auto& r : plan.records) {
      owner_of[r.probe_session] = r.probe_subject;
      owner_of[r.enrol_session] = r.owner;
    }
    std::vector<std::uint32_t> used;
    for (std::uint32_t s = 0; s < n_sessions; ++s)
      if (owner_of[s] >= 0) used.push_back(s);
    // Fit order by session id keeps the batch statistics independent of
    // record order.
    std::sort(used.begin(), used.end(), [&](std::uint32_t a, std::uint32_t b) {
      return plan.session_ids[a] < plan.session_ids[b];
    });

    std::vector<const Session*> sessions(n_sessions, nullptr);
    for (const auto s : used) {
      const auto& subject_id = plan.subject_ids[static_cast<std::size_t>(owner_of[s])];
      const auto subj = dataset.subjects.find(subject_id);
      if (subj == dataset.subjects.end())
        throw ValidationError("missing session reference: subject '" + subject_id + "' not in dataset");
      const auto sess = subj->second.sessions.find(plan.session_ids[s]);
      if (sess == subj->second.sessions.end())
        throw ValidationError("missing session reference: session '" + plan.session_ids[s] +
                              "' of subject '" + subject_id + "' not in dataset");
      sessions[s] = &sess->second;
    }

    std::vector<Embedding> batch(used.size());
    parallel_for(used.size(), threads_, [&](std::size_t k) {
      batch[k] = embed(extract(*sessions[used[k]], feature_set_));
    });
    const auto scaler = Standardizer::fit(batch);
    std::vector<Embedding> scaled(n_sessions);
    parallel_for(used.size(), threads_, [&](std::size_t k) { scaled[used[k]] = scaler.apply(batch[k]); });

    VerifierOutput out;
    out.distances.resize(plan.size());
    parallel_for(plan.size(), threads_, [&](std::size_t i) {
      const auto& r = plan.records[i];
      out.distances[i] = distance(scaled[r.enrol_session], scaled[r.probe_session]);
    });
    out.scores = normalize_distances(out.distances);
    return out;
  }

  FeatureSet feature_set() const { return feature_set_; }

 private:
  FeatureSet feature_set_;
  unsigned threads_;
};

inline VerifierOutput score_plan(const ComparisonPlan& plan, const Dataset& dataset, FeatureSet fs,
                                 unsigned threads = 1) {
  return BaselineVerifier(fs, threads).score(plan, dataset);
}

}  // namespace kvc

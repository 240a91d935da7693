#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "kvc/dataset.hpp"
#include "kvc/error.hpp"
#include "kvc/parallel.hpp"
#include "kvc/rng.hpp"

namespace kvc {

struct TimingOffset {
  double hold_time_s = 0.0;
  double inter_key_s = 0.0;
};

/// Parameters of a synthetic population. All times are in seconds.
///
/// Each subject gets a mean hold time and a mean inter-key time drawn as
/// population mean + group offset + subject_variance * N(0, 1), and a per
/// channel log-spread drawn uniformly from [spread_min, spread_max]. Each
/// session drifts its means by session_variance * N(0, 1). Keystroke hold
/// and inter-key times are log-normal with the session mean and the
/// subject's log-spread; key codes follow English letter frequencies.
struct SynthConfig {
  std::size_t subjects = 0;  // total; 0 means subjects_per_group * 12
  std::size_t subjects_per_group = 10;
  std::size_t sessions_per_subject = kMinSessionsForEvaluation;
  double chars_mean = 48.0;
  double chars_spread = 18.0;
  std::size_t chars_min = 10;
  double hold_time_s = 0.100;
  double inter_key_s = 0.150;
  double subject_variance = 0.030;
  double session_variance = 0.004;
  double spread_min = 0.20;
  double spread_max = 0.45;
  std::map<std::string, TimingOffset> demographic_offsets;  // key: "18-26/female"
  std::uint64_t seed = 1;

  std::size_t total_subjects() const { return subjects != 0 ? subjects : subjects_per_group * kGroupCount; }

  void validate() const {
    if (total_subjects() == 0) throw ValidationError("synth: zero subjects");
    if (sessions_per_subject < kMinSessionsForEvaluation)
      throw ValidationError("synth: sessions_per_subject must be >= " +
                            std::to_string(kMinSessionsForEvaluation));
    if (chars_min < kMinEventsPerSession)
      throw ValidationError("synth: chars_min must be >= " + std::to_string(kMinEventsPerSession));
    if (!(chars_mean > 0.0) || chars_spread < 0.0) throw ValidationError("synth: invalid chars_mean/chars_spread");
    if (!(hold_time_s > 0.0) || !(inter_key_s > 0.0))
      throw ValidationError("synth: hold_time_s and inter_key_s must be positive");
    if (subject_variance < 0.0 || session_variance < 0.0)
      throw ValidationError("synth: variances must be >= 0");
    if (spread_min < 0.0 || spread_max < spread_min)
      throw ValidationError("synth: need 0 <= spread_min <= spread_max");
    for (const auto& [label, off] : demographic_offsets) {
      bool known = false;
      for (const auto& g : all_groups()) known = known || g.label() == label;
      if (!known) throw ValidationError("synth: unknown demographic group '" + label + "'");
    }
  }
};

inline SynthConfig synth_config_from_json(const nlohmann::json& j) {
  static const std::set<std::string> kKeys = {
      "subjects",        "subjects_per_group", "sessions_per_subject", "chars_mean",
      "chars_spread",    "chars_min",          "hold_time_s",          "inter_key_s",
      "subject_variance", "session_variance",  "spread_min",           "spread_max",
      "demographic_offsets", "seed"};
  if (!j.is_object()) throw ValidationError("synth config must be a JSON object");
  for (const auto& [key, value] : j.items())
    if (!kKeys.contains(key)) throw ValidationError("synth config: unknown key '" + key + "'");
  SynthConfig c;
  try {
    c.subjects = j.value("subjects", c.subjects);
    c.subjects_per_group = j.value("subjects_per_group", c.subjects_per_group);
    c.sessions_per_subject = j.value("sessions_per_subject", c.sessions_per_subject);
    c.chars_mean = j.value("chars_mean", c.chars_mean);
    c.chars_spread = j.value("chars_spread", c.chars_spread);
    c.chars_min = j.value("chars_min", c.chars_min);
    c.hold_time_s = j.value("hold_time_s", c.hold_time_s);
    c.inter_key_s = j.value("inter_key_s", c.inter_key_s);
    c.subject_variance = j.value("subject_variance", c.subject_variance);
    c.session_variance = j.value("session_variance", c.session_variance);
    c.spread_min = j.value("spread_min", c.spread_min);
    c.spread_max = j.value("spread_max", c.spread_max);
    c.seed = j.value("seed", c.seed);
    if (j.contains("demographic_offsets")) {
      for (const auto& [label, off] : j.at("demographic_offsets").items())
        c.demographic_offsets[label] = {off.value("hold_time_s", 0.0), off.value("inter_key_s", 0.0)};
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("synth config: ") + e.what());
  }
  c.validate();
  return c;
}

inline nlohmann::ordered_json to_json(const SynthConfig& c) {
  nlohmann::ordered_json j;
  j["subjects"] = c.subjects;
  j["subjects_per_group"] = c.subjects_per_group;
  j["sessions_per_subject"] = c.sessions_per_subject;
  j["chars_mean"] = c.chars_mean;
  j["chars_spread"] = c.chars_spread;
  j["chars_min"] = c.chars_min;
  j["hold_time_s"] = c.hold_time_s;
  j["inter_key_s"] = c.inter_key_s;
  j["subject_variance"] = c.subject_variance;
  j["session_variance"] = c.session_variance;
  j["spread_min"] = c.spread_min;
  j["spread_max"] = c.spread_max;
  auto& offs = j["demographic_offsets"] = nlohmann::ordered_json::object();
  for (const auto& [label, o] : c.demographic_offsets)
    offs[label] = {{"hold_time_s", o.hold_time_s}, {"inter_key_s", o.inter_key_s}};
  j["seed"] = c.seed;
  return j;
}

struct SynthResult {
  Dataset dataset;              // demographics attached
  std::size_t floored_times = 0;  // timing draws clamped to the 1 ms / 10 ms floors
};

namespace detail {

// Space plus a-z with approximate English frequencies (per mille).
struct KeyTable {
  std::array<std::uint8_t, 27> codes{};
  std::array<std::uint32_t, 27> cumulative{};
};

inline const KeyTable& key_table() {
  static const KeyTable table = [] {
    constexpr std::array<std::uint32_t, 26> letters = {82, 15, 28, 43, 127, 22, 20, 61, 70, 2, 8, 40, 24,
                                                       67, 75, 19, 1,  60, 63, 91, 28, 10, 24, 2, 20, 1};
    KeyTable t;
    std::uint32_t acc = 180;  // space
    t.codes[0] = ' ';
    t.cumulative[0] = acc;
    for (std::size_t i = 0; i < letters.size(); ++i) {
      acc += letters[i];
      t.codes[i + 1] = static_cast<std::uint8_t>('a' + i);
      t.cumulative[i + 1] = acc;
    }
    return t;
  }();
  return table;
}

inline std::uint8_t draw_key(SplitMix64& rng) {
  const auto& t = key_table();
  const auto r = static_cast<std::uint32_t>(rng.below(t.cumulative.back()));
  const auto it = std::upper_bound(t.cumulative.begin(), t.cumulative.end(), r);
  return t.codes[static_cast<std::size_t>(it - t.cumulative.begin())];
}

// Log-normal draw with the given arithmetic mean and log-space spread.
inline double lognormal_mean(SplitMix64& rng, double mean, double log_sd) {
  return std::exp(std::log(mean) - 0.5 * log_sd * log_sd + log_sd * rng.normal());
}

inline std::string subject_name(std::size_t k) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "s%06zu", k);
  return buf;
}

inline std::string session_name(const std::string& subject, std::size_t k) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "_%03zu", k);
  return subject + buf;
}

}  // namespace detail

/// Deterministic in (config, seed) and independent of `threads`: every
/// subject draws from its own stream derived from (seed, subject index).
inline SynthResult generate(const SynthConfig& config, unsigned threads = 1) {
  config.validate();
  const std::size_t n = config.total_subjects();
  std::array<TimingOffset, kGroupCount> offsets{};
  for (const auto& g : all_groups()) {
    const auto it = config.demographic_offsets.find(g.label());
    if (it != config.demographic_offsets.end()) offsets[g.index()] = it->second;
  }

  constexpr double kMinMeanTime = 0.010;
  std::vector<SubjectRecord> records(n);
  std::vector<std::size_t> floored(n, 0);
  parallel_for(n, threads, [&](std::size_t k) {
    SplitMix64 rng(derive_seed(config.seed, k));
    auto& rec = records[k];
    rec.id = detail::subject_name(k);
    const auto group = DemographicGroup::from_index(k % kGroupCount);
    rec.demographics = group;
    const auto& off = offsets[group.index()];

    const auto floor_at = [&](double v, double lo) {
      if (v < lo) {
        ++floored[k];
        return lo;
      }
      return v;
    };
    const double ht_mean = floor_at(config.hold_time_s + off.hold_time_s + config.subject_variance * rng.normal(), kMinMeanTime);
    const double ikt_mean = floor_at(config.inter_key_s + off.inter_key_s + config.subject_variance * rng.normal(), kMinMeanTime);
    const double ht_spread = config.spread_min + (config.spread_max - config.spread_min) * rng.uniform();
    const double ikt_spread = config.spread_min + (config.spread_max - config.spread_min) * rng.uniform();

    for (std::size_t s = 0; s < config.sessions_per_subject; ++s) {
      Session session;
      session.id = detail::session_name(rec.id, s);
      const double session_ht = floor_at(ht_mean + config.session_variance * rng.normal(), kMinMeanTime);
      const double session_ikt = floor_at(ikt_mean + config.session_variance * rng.normal(), kMinMeanTime);
      const double len_draw = std::round(config.chars_mean + config.chars_spread * rng.normal());
      const auto length = static_cast<std::size_t>(std::max(static_cast<double>(config.chars_min), len_draw));
      session.events.reserve(length);
      std::int64_t press = static_cast<std::int64_t>(rng.below(1000));
      for (std::size_t e = 0; e < length; ++e) {
        auto hold = static_cast<std::int64_t>(std::llround(detail::lognormal_mean(rng, session_ht, ht_spread) * 1000.0));
        if (hold < 1) {
          ++floored[k];
          hold = 1;
        }
        const auto gap = static_cast<std::int64_t>(std::llround(detail::lognormal_mean(rng, session_ikt, ikt_spread) * 1000.0));
        const std::uint8_t key = detail::draw_key(rng);
        session.events.push_back({press, press + hold, key});
        press = press + hold + gap;
      }
      rec.sessions.emplace(session.id, std::move(session));
    }
  });

  SynthResult out;
  for (auto& rec : records) {
    auto id = rec.id;
    out.dataset.subjects.emplace(std::move(id), std::move(rec));
  }
  for (const auto f : floored) out.floored_times += f;
  return out;
}

/// Same population with every demographic offset removed, so group labels
/// carry no timing information.
inline SynthResult null_bias_population(SynthConfig config, unsigned threads = 1) {
  config.demographic_offsets.clear();
  return generate(config, threads);
}

/// Control population: all sessions are pooled and dealt back to subjects at
/// random, keeping session ids, session counts and labels.
inline Dataset shuffle_session_labels(const Dataset& dataset, std::uint64_t seed) {
  std::vector<const Session*> pool;
  for (const auto& [id, subject] : dataset.subjects)
    for (const auto& [sid, session] : subject.sessions) pool.push_back(&session);
  SplitMix64 rng(seed);
  for (std::size_t i = pool.size(); i > 1; --i) std::swap(pool[i - 1], pool[rng.below(i)]);

  Dataset out;
  out.scenario = dataset.scenario;
  std::size_t next = 0;
  for (const auto& [id, subject] : dataset.subjects) {
    SubjectRecord rec;
    rec.id = id;
    rec.demographics = subject.demographics;
    for (std::size_t k = 0; k < subject.sessions.size(); ++k) {
      const Session* s = pool[next++];
      rec.sessions.emplace(s->id, *s);
    }
    out.subjects.emplace(id, std::move(rec));
  }
  return out;
}

struct DatasetSummary {
  std::size_t subjects = 0;
  std::size_t sessions = 0;
  double mean_session_length = 0.0;
  std::size_t groups = 0;
  std::size_t unlabeled = 0;
};

inline DatasetSummary summarize(const Dataset& dataset) {
  DatasetSummary s;
  std::set<std::size_t> groups;
  std::size_t events = 0;
  for (const auto& [id, subject] : dataset.subjects) {
    ++s.subjects;
    if (subject.demographics) groups.insert(subject.demographics->index());
    else ++s.unlabeled;
    for (const auto& [sid, session] : subject.sessions) {
      ++s.sessions;
      events += session.events.size();
    }
  }
  s.groups = groups.size();
  s.mean_session_length = s.sessions == 0 ? 0.0 : static_cast<double>(events) / static_cast<double>(s.sessions);
  return s;
}

/// Writes events.csv and metadata.csv into `dir`.
inline void write_dataset_files(const Dataset& dataset, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_events(dataset, dir / "events.csv");
  save_metadata(dataset, dir / "metadata.csv");
}

}  // namespace kvc

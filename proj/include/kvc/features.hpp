#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kvc/dataset.hpp"
#include "kvc/error.hpp"
#include "kvc/text.hpp"

namespace kvc {

enum class Channel : std::uint8_t { HT, IPT, IRT, IKT, ASCII, IPT2, IRT2, IKT2, IPT3, IRT3, IKT3 };

inline constexpr std::array<std::string_view, 11> kChannelNames = {
    "HT", "IPT", "IRT", "IKT", "ASCII", "IPT2", "IRT2", "IKT2", "IPT3", "IRT3", "IKT3"};

inline std::string_view to_string(Channel c) { return kChannelNames[static_cast<std::size_t>(c)]; }

/// Number of following keystrokes a channel needs.
constexpr std::size_t lookahead(Channel c) {
  switch (c) {
    case Channel::HT:
    case Channel::ASCII: return 0;
    case Channel::IPT:
    case Channel::IRT:
    case Channel::IKT: return 1;
    case Channel::IPT2:
    case Channel::IRT2:
    case Channel::IKT2: return 2;
    case Channel::IPT3:
    case Channel::IRT3:
    case Channel::IKT3: return 3;
  }
  return 0;
}

enum class FeatureSet : std::uint8_t { F4, F5, F10, F11 };

namespace detail {
using C = Channel;
inline constexpr std::array<Channel, 4> kF4 = {C::HT, C::IPT, C::IRT, C::IKT};
inline constexpr std::array<Channel, 5> kF5 = {C::HT, C::IPT, C::IRT, C::IKT, C::ASCII};
inline constexpr std::array<Channel, 10> kF10 = {C::HT,  C::IPT,  C::IRT,  C::IKT,  C::IPT2,
                                                 C::IRT2, C::IKT2, C::IPT3, C::IRT3, C::IKT3};
inline constexpr std::array<Channel, 11> kF11 = {C::HT,   C::IPT,  C::IRT,  C::IKT,
                                                 C::IPT2, C::IRT2, C::IKT2, C::IPT3,
                                                 C::IRT3, C::IKT3, C::ASCII};
}  // namespace detail

/// Channels of a feature set, in canonical column order.
constexpr std::span<const Channel> channels(FeatureSet fs) {
  switch (fs) {
    case FeatureSet::F4: return detail::kF4;
    case FeatureSet::F5: return detail::kF5;
    case FeatureSet::F10: return detail::kF10;
    case FeatureSet::F11: return detail::kF11;
  }
  return {};
}

constexpr std::size_t channel_count(FeatureSet fs) { return channels(fs).size(); }

inline std::string_view to_string(FeatureSet fs) {
  switch (fs) {
    case FeatureSet::F4: return "4f";
    case FeatureSet::F5: return "5f";
    case FeatureSet::F10: return "10f";
    case FeatureSet::F11: return "11f";
  }
  return "?";
}

inline std::optional<FeatureSet> parse_feature_set(std::string_view s) {
  std::string lower(s);
  for (auto& ch : lower) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  if (lower == "4f") return FeatureSet::F4;
  if (lower == "5f") return FeatureSet::F5;
  if (lower == "10f") return FeatureSet::F10;
  if (lower == "11f") return FeatureSet::F11;
  return std::nullopt;
}

/// Per-keystroke feature rows of one session. Time channels are in seconds,
/// ASCII in [0, 1]. Entries whose look-ahead runs past the session end hold
/// 0 and are excluded by `valid()`.
struct FeatureSequence {
  FeatureSet feature_set = FeatureSet::F5;
  std::string source_session_id;
  std::size_t rows = 0;
  std::vector<double> values;          // row-major, rows x width()
  std::vector<std::uint8_t> padded;    // per row: any entry filled

  std::size_t width() const { return channel_count(feature_set); }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(values).subspan(i * width(), width());
  }
  double at(std::size_t row, std::size_t col) const { return values[row * width() + col]; }
  bool valid(std::size_t row, std::size_t col) const {
    return row + lookahead(channels(feature_set)[col]) < rows;
  }
};

inline FeatureSequence extract(const Session& session, FeatureSet fs) {
  const auto& ev = session.events;
  const std::size_t n = ev.size();
  if (n < kMinEventsPerSession)
    throw ValidationError("session '" + session.id + "' has " + std::to_string(n) +
                          " events; feature extraction needs at least " +
                          std::to_string(kMinEventsPerSession));

  const auto cols = channels(fs);
  FeatureSequence seq;
  seq.feature_set = fs;
  seq.source_session_id = session.id;
  seq.rows = n;
  seq.values.assign(n * cols.size(), 0.0);
  seq.padded.assign(n, 0);

  // Differences are taken on integer milliseconds, then converted.
  const auto seconds = [](std::int64_t ms) { return static_cast<double>(ms) / 1000.0; };
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      const Channel ch = cols[c];
      const std::size_t k = lookahead(ch);
      if (i + k >= n) {
        seq.padded[i] = 1;
        continue;
      }
      const auto& a = ev[i];
      const auto& b = ev[i + k];
      double v = 0.0;
      switch (ch) {
        case Channel::HT: v = seconds(a.release_ms - a.press_ms); break;
        case Channel::ASCII: v = static_cast<double>(a.key_code) / 255.0; break;
        case Channel::IPT:
        case Channel::IPT2:
        case Channel::IPT3: v = seconds(b.press_ms - a.press_ms); break;
        case Channel::IRT:
        case Channel::IRT2:
        case Channel::IRT3: v = seconds(b.release_ms - a.release_ms); break;
        case Channel::IKT:
        case Channel::IKT2:
        case Channel::IKT3: v = seconds(b.press_ms - a.release_ms); break;
      }
      seq.values[i * cols.size() + c] = v;
    }
  }
  return seq;
}

struct ChannelStats {
  double mean = 0.0;
  double stddev = 0.0;  // population
  double median = 0.0;
};

inline double median_of(std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

/// Mean, population standard deviation and median per channel, over
/// non-padded entries only.
inline std::vector<ChannelStats> feature_matrix_stats(const FeatureSequence& seq) {
  if (seq.rows == 0) throw Error("feature_matrix_stats: empty sequence");
  std::vector<ChannelStats> out(seq.width());
  std::vector<double> column;
  for (std::size_t c = 0; c < seq.width(); ++c) {
    column.clear();
    for (std::size_t r = 0; r < seq.rows; ++r)
      if (seq.valid(r, c)) column.push_back(seq.at(r, c));
    if (column.empty()) continue;
    double sum = 0.0;
    for (double x : column) sum += x;
    const double mean = sum / static_cast<double>(column.size());
    double ss = 0.0;
    for (double x : column) ss += (x - mean) * (x - mean);
    out[c].mean = mean;
    out[c].stddev = std::sqrt(ss / static_cast<double>(column.size()));
    out[c].median = median_of(column);
  }
  return out;
}

/// CSV dump: channel names in canonical order plus a `padded` flag column.
inline std::string format_features(const FeatureSequence& seq) {
  std::string out;
  for (const Channel ch : channels(seq.feature_set)) {
    out.append(to_string(ch)).push_back(',');
  }
  out.append("padded\n");
  for (std::size_t r = 0; r < seq.rows; ++r) {
    for (std::size_t c = 0; c < seq.width(); ++c) {
      text::append_double(out, seq.at(r, c));
      out.push_back(',');
    }
    out.push_back(seq.padded[r] ? '1' : '0');
    out.push_back('\n');
  }
  return out;
}

}  // namespace kvc

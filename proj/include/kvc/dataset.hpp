#pragma once

#include <algorithm>
#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include <json.hpp>

#include "kvc/error.hpp"
#include "kvc/text.hpp"

namespace kvc {

// Sessions below this are excluded from evaluation.
inline constexpr std::size_t kMinSessionsForEvaluation = 15;
// Trigraph features need i+3 to exist for at least one row.
inline constexpr std::size_t kMinEventsPerSession = 4;

struct KeyEvent {
  std::int64_t press_ms = 0;
  std::int64_t release_ms = 0;
  std::uint8_t key_code = 0;

  friend auto operator<=>(const KeyEvent&, const KeyEvent&) = default;
};

struct Session {
  std::string id;
  std::vector<KeyEvent> events;

  friend bool operator==(const Session&, const Session&) = default;
};

enum class AgeBin : std::uint8_t { y10_13, y14_17, y18_26, y27_35, y36_44, y45_79 };
enum class Gender : std::uint8_t { male, female };

inline constexpr std::size_t kAgeBinCount = 6;
inline constexpr std::size_t kGenderCount = 2;
inline constexpr std::size_t kGroupCount = kAgeBinCount * kGenderCount;

inline constexpr std::array<std::string_view, kAgeBinCount> kAgeBinTokens = {
    "10-13", "14-17", "18-26", "27-35", "36-44", "45-79"};
inline constexpr std::array<std::string_view, kGenderCount> kGenderTokens = {
    "male", "female"};

inline std::string_view to_string(AgeBin a) { return kAgeBinTokens[static_cast<std::size_t>(a)]; }
inline std::string_view to_string(Gender g) { return kGenderTokens[static_cast<std::size_t>(g)]; }

inline std::optional<AgeBin> parse_age_bin(std::string_view token) {
  for (std::size_t i = 0; i < kAgeBinTokens.size(); ++i)
    if (kAgeBinTokens[i] == token) return static_cast<AgeBin>(i);
  return std::nullopt;
}

inline std::optional<Gender> parse_gender(std::string_view token) {
  for (std::size_t i = 0; i < kGenderTokens.size(); ++i)
    if (kGenderTokens[i] == token) return static_cast<Gender>(i);
  return std::nullopt;
}

struct DemographicGroup {
  AgeBin age = AgeBin::y10_13;
  Gender gender = Gender::male;

  /// Dense index in [0, 12): age-major, gender-minor.
  constexpr std::size_t index() const {
    return static_cast<std::size_t>(age) * kGenderCount + static_cast<std::size_t>(gender);
  }
  static constexpr DemographicGroup from_index(std::size_t i) {
    return {static_cast<AgeBin>(i / kGenderCount), static_cast<Gender>(i % kGenderCount)};
  }
  std::string label() const {
    return std::string(to_string(age)) + "/" + std::string(to_string(gender));
  }

  friend auto operator<=>(const DemographicGroup&, const DemographicGroup&) = default;
};

inline std::array<DemographicGroup, kGroupCount> all_groups() {
  std::array<DemographicGroup, kGroupCount> out{};
  for (std::size_t i = 0; i < kGroupCount; ++i) out[i] = DemographicGroup::from_index(i);
  return out;
}

struct SubjectRecord {
  std::string id;
  std::optional<DemographicGroup> demographics;
  std::map<std::string, Session, std::less<>> sessions;

  friend bool operator==(const SubjectRecord&, const SubjectRecord&) = default;
};

enum class Scenario : std::uint8_t { desktop, mobile };

struct Dataset {
  std::map<std::string, SubjectRecord, std::less<>> subjects;
  Scenario scenario = Scenario::desktop;

  std::size_t session_count() const {
    std::size_t n = 0;
    for (const auto& [id, s] : subjects) n += s.sessions.size();
    return n;
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

using DemographicMap = std::map<std::string, DemographicGroup, std::less<>>;

inline constexpr std::string_view kEventHeader =
    "subject_id,session_id,key_code,press_ts_ms,release_ts_ms";
inline constexpr std::string_view kMetadataHeader = "subject_id,age_bin,gender";

namespace detail {

inline void expect_header(text::LineReader& reader, std::string_view expected,
                          const std::string& path) {
  std::string_view line;
  if (!reader.next(line)) throw FormatError(path + ": empty file");
  if (!line.empty() && line.starts_with("\xEF\xBB\xBF")) line.remove_prefix(3);
  if (line != expected)
    throw FormatError(at_line(path, 1) + "expected header '" + std::string(expected) + "'");
}

}  // namespace detail

/// Parses an event CSV from memory. `path` only labels error messages.
inline Dataset parse_events(std::string_view buffer, const std::string& path = "<events>",
                            Scenario scenario = Scenario::desktop) {
  text::LineReader reader(buffer);
  detail::expect_header(reader, kEventHeader, path);

  struct PendingEvent {
    KeyEvent event;
    std::size_t line;
  };
  std::map<std::string, std::map<std::string, std::vector<PendingEvent>, std::less<>>, std::less<>>
      pending;
  std::map<std::string, std::string, std::less<>> session_owner;

  std::vector<std::string_view> fields;
  std::string_view line;
  std::string_view last_subject, last_session;
  std::vector<PendingEvent>* current = nullptr;
  while (reader.next(line)) {
    if (line.empty()) continue;
    const auto where = [&] { return at_line(path, reader.number()); };
    text::split(line, fields);
    if (fields.size() != 5)
      throw FormatError(where() + "expected 5 fields, got " + std::to_string(fields.size()));
    const auto subject = text::trim(fields[0]);
    const auto session = text::trim(fields[1]);
    if (subject.empty() || session.empty())
      throw FormatError(where() + "empty subject_id or session_id");
    const auto code = text::parse_int<int>(fields[2]);
    const auto press = text::parse_int<std::int64_t>(fields[3]);
    const auto release = text::parse_int<std::int64_t>(fields[4]);
    if (!code || *code < 0 || *code > 255) throw FormatError(where() + "key_code must be an integer in [0, 255]");
    if (!press || !release) throw FormatError(where() + "timestamps must be integer milliseconds");
    if (*release < *press) throw FormatError(where() + "release_ts_ms precedes press_ts_ms");

    if (current == nullptr || subject != last_subject || session != last_session) {
      auto owner = session_owner.find(session);
      if (owner == session_owner.end()) {
        session_owner.emplace(std::string(session), std::string(subject));
      } else if (owner->second != subject) {
        throw FormatError(where() + "session '" + std::string(session) +
                          "' already belongs to subject '" + owner->second + "'");
      }
      auto subj_it = pending.find(subject);
      if (subj_it == pending.end()) subj_it = pending.emplace(std::string(subject), decltype(pending)::mapped_type{}).first;
      auto sess_it = subj_it->second.find(session);
      if (sess_it == subj_it->second.end())
        sess_it = subj_it->second.emplace(std::string(session), std::vector<PendingEvent>{}).first;
      current = &sess_it->second;
      last_subject = subj_it->first;
      last_session = sess_it->first;
    }
    current->push_back({{*press, *release, static_cast<std::uint8_t>(*code)}, reader.number()});
  }

  Dataset out;
  out.scenario = scenario;
  for (auto& [subject_id, sessions] : pending) {
    SubjectRecord record;
    record.id = subject_id;
    for (auto& [session_id, events] : sessions) {
      std::sort(events.begin(), events.end(), [](const PendingEvent& a, const PendingEvent& b) {
        return std::tie(a.event, a.line) < std::tie(b.event, b.line);
      });
      for (std::size_t i = 1; i < events.size(); ++i) {
        if (events[i].event == events[i - 1].event)
          throw FormatError(at_line(path, events[i].line) + "duplicate event (same as line " +
                            std::to_string(events[i - 1].line) + ")");
      }
      Session s;
      s.id = session_id;
      s.events.reserve(events.size());
      for (const auto& e : events) s.events.push_back(e.event);
      record.sessions.emplace(session_id, std::move(s));
    }
    out.subjects.emplace(subject_id, std::move(record));
  }
  return out;
}

inline Dataset load_events(const std::filesystem::path& path,
                           Scenario scenario = Scenario::desktop) {
  return parse_events(text::read_file(path), path.string(), scenario);
}

inline std::string format_events(const Dataset& dataset) {
  std::string out;
  out.append(kEventHeader).push_back('\n');
  for (const auto& [subject_id, subject] : dataset.subjects) {
    for (const auto& [session_id, session] : subject.sessions) {
      for (const auto& e : session.events) {
        out.append(subject_id).push_back(',');
        out.append(session_id).push_back(',');
        out.append(std::to_string(e.key_code)).push_back(',');
        out.append(std::to_string(e.press_ms)).push_back(',');
        out.append(std::to_string(e.release_ms)).push_back('\n');
      }
    }
  }
  return out;
}

inline void save_events(const Dataset& dataset, const std::filesystem::path& path) {
  text::write_file(path, format_events(dataset));
}

inline DemographicMap parse_metadata(std::string_view buffer, const std::string& path = "<metadata>") {
  text::LineReader reader(buffer);
  detail::expect_header(reader, kMetadataHeader, path);
  DemographicMap out;
  std::vector<std::string_view> fields;
  std::string_view line;
  while (reader.next(line)) {
    if (line.empty()) continue;
    const auto where = at_line(path, reader.number());
    text::split(line, fields);
    if (fields.size() != 3)
      throw FormatError(where + "expected 3 fields, got " + std::to_string(fields.size()));
    const auto subject = text::trim(fields[0]);
    if (subject.empty()) throw FormatError(where + "empty subject_id");
    const auto age = parse_age_bin(text::trim(fields[1]));
    if (!age) throw FormatError(where + "unknown age bin '" + std::string(text::trim(fields[1])) + "'");
    const auto gender = parse_gender(text::trim(fields[2]));
    if (!gender) throw FormatError(where + "unknown gender '" + std::string(text::trim(fields[2])) + "'");
    if (!out.emplace(std::string(subject), DemographicGroup{*age, *gender}).second)
      throw FormatError(where + "duplicate subject_id '" + std::string(subject) + "'");
  }
  return out;
}

inline DemographicMap read_metadata(const std::filesystem::path& path) {
  return parse_metadata(text::read_file(path), path.string());
}

/// Attaches demographics to `dataset`. Subjects missing from the metadata
/// stay unlabeled; metadata rows for unknown subjects become warnings.
inline Dataset attach_metadata(Dataset dataset, const DemographicMap& metadata,
                               std::vector<std::string>* warnings = nullptr) {
  for (const auto& [subject_id, group] : metadata) {
    auto it = dataset.subjects.find(subject_id);
    if (it == dataset.subjects.end()) {
      if (warnings) warnings->push_back("metadata subject '" + subject_id + "' not in dataset");
      continue;
    }
    it->second.demographics = group;
  }
  return dataset;
}

inline Dataset load_metadata(const std::filesystem::path& path, Dataset dataset,
                             std::vector<std::string>* warnings = nullptr) {
  return attach_metadata(std::move(dataset), read_metadata(path), warnings);
}

inline DemographicMap demographics_of(const Dataset& dataset) {
  DemographicMap out;
  for (const auto& [id, subject] : dataset.subjects)
    if (subject.demographics) out.emplace(id, *subject.demographics);
  return out;
}

inline std::string format_metadata(const Dataset& dataset) {
  std::string out;
  out.append(kMetadataHeader).push_back('\n');
  for (const auto& [id, subject] : dataset.subjects) {
    if (!subject.demographics) continue;
    out.append(id).push_back(',');
    out.append(to_string(subject.demographics->age)).push_back(',');
    out.append(to_string(subject.demographics->gender)).push_back('\n');
  }
  return out;
}

inline void save_metadata(const Dataset& dataset, const std::filesystem::path& path) {
  text::write_file(path, format_metadata(dataset));
}

struct SessionRef {
  std::string subject_id;
  std::string session_id;
  std::size_t events = 0;
  friend bool operator==(const SessionRef&, const SessionRef&) = default;
};

struct ValidationReport {
  std::vector<std::string> insufficient_sessions;
  std::vector<std::string> unlabeled;
  std::vector<SessionRef> short_sessions;

  bool ok() const {
    return insufficient_sessions.empty() && unlabeled.empty() && short_sessions.empty();
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["insufficient_sessions"] = insufficient_sessions;
    j["unlabeled"] = unlabeled;
    auto& shorts = j["short_sessions"] = nlohmann::ordered_json::array();
    for (const auto& s : short_sessions)
      shorts.push_back({{"subject_id", s.subject_id}, {"session_id", s.session_id}, {"events", s.events}});
    return j;
  }
};

inline ValidationReport validate_for_evaluation(const Dataset& dataset) {
  ValidationReport report;
  for (const auto& [id, subject] : dataset.subjects) {
    if (subject.sessions.size() < kMinSessionsForEvaluation) report.insufficient_sessions.push_back(id);
    if (!subject.demographics) report.unlabeled.push_back(id);
    for (const auto& [sid, session] : subject.sessions)
      if (session.events.size() < kMinEventsPerSession)
        report.short_sessions.push_back({id, sid, session.events.size()});
  }
  return report;
}

}  // namespace kvc

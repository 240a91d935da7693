#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "kvc/dataset.hpp"
#include "kvc/error.hpp"
#include "kvc/rng.hpp"
#include "kvc/text.hpp"

namespace kvc {

inline constexpr std::size_t kEnrolmentSessions = 5;
inline constexpr std::size_t kVerificationSessions = 10;
inline constexpr std::size_t kImpostorProbes = 10;  // per impostor kind
inline constexpr std::size_t kRecordsPerSubject =
    kEnrolmentSessions * (kVerificationSessions + 2 * kImpostorProbes);

enum class Role : std::uint8_t { genuine, similar_impostor, dissimilar_impostor };

inline constexpr std::array<std::string_view, 3> kRoleTokens = {
    "genuine", "similar_impostor", "dissimilar_impostor"};

inline std::string_view to_string(Role r) { return kRoleTokens[static_cast<std::size_t>(r)]; }

inline std::optional<Role> parse_role(std::string_view s) {
  for (std::size_t i = 0; i < kRoleTokens.size(); ++i)
    if (kRoleTokens[i] == s) return static_cast<Role>(i);
  return std::nullopt;
}

/// One 1-vs-1 comparison. Fields index into the plan's id tables.
struct ComparisonRecord {
  std::uint32_t owner = 0;
  std::uint32_t probe_subject = 0;
  std::uint32_t probe_session = 0;
  std::uint32_t enrol_session = 0;
  Role role = Role::genuine;

  friend bool operator==(const ComparisonRecord&, const ComparisonRecord&) = default;
};

struct SubjectAssignment {
  std::uint32_t subject = 0;
  std::array<std::uint32_t, kEnrolmentSessions> enrolment{};
  std::array<std::uint32_t, kVerificationSessions> verification{};

  friend bool operator==(const SubjectAssignment&, const SubjectAssignment&) = default;
};

struct ComparisonPlan {
  std::vector<std::string> subject_ids;
  std::vector<std::string> session_ids;
  std::vector<SubjectAssignment> assignments;
  std::vector<ComparisonRecord> records;
  std::optional<std::uint64_t> rng_seed;

  std::size_t size() const { return records.size(); }

  friend bool operator==(const ComparisonPlan&, const ComparisonPlan&) = default;
};

namespace detail {

// Interns strings into a dense index table.
class Interner {
 public:
  explicit Interner(std::vector<std::string>& table) : table_(table) {
    for (std::uint32_t i = 0; i < table_.size(); ++i) index_.emplace(table_[i], i);
  }

  std::uint32_t operator()(std::string_view s) {
    key_.assign(s);
    auto it = index_.find(key_);
    if (it != index_.end()) return it->second;
    const auto id = static_cast<std::uint32_t>(table_.size());
    table_.push_back(key_);
    index_.emplace(key_, id);
    return id;
  }

 private:
  std::vector<std::string>& table_;
  std::unordered_map<std::string, std::uint32_t> index_;
  std::string key_;
};

struct ImpostorDraw {
  std::uint32_t subject;  // index into the owner-ordered subject list
  std::uint32_t slot;     // verification session slot, [0, 10)
  friend bool operator==(const ImpostorDraw&, const ImpostorDraw&) = default;
};

// Draws `kImpostorProbes` distinct (subject, verification slot) pairs. The
// candidate list is addressed through `pick`, which maps [0, pool_size) to a
// subject index. Each draw consumes rng.below(pool_size) then rng.below(10).
template <typename Pick>
std::array<ImpostorDraw, kImpostorProbes> draw_impostors(SplitMix64& rng, std::size_t pool_size,
                                                         Pick&& pick) {
  std::array<ImpostorDraw, kImpostorProbes> out{};
  std::size_t filled = 0;
  while (filled < kImpostorProbes) {
    const ImpostorDraw d{pick(rng.below(pool_size)),
                         static_cast<std::uint32_t>(rng.below(kVerificationSessions))};
    if (std::find(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(filled), d) !=
        out.begin() + static_cast<std::ptrdiff_t>(filled))
      continue;
    out[filled++] = d;
  }
  return out;
}

}  // namespace detail

/// Builds the comparison plan. For each subject (in subject_id order) the
/// first 5 sessions by session_id are enrolment and the next 10 are
/// verification; extra sessions are ignored. Impostor probes are drawn from
/// other subjects' verification sessions with a SplitMix64 stream seeded by
/// `seed`, without replacement within one owner's list.
inline ComparisonPlan build_plan(const Dataset& dataset, std::uint64_t seed) {
  ComparisonPlan plan;
  plan.rng_seed = seed;
  if (dataset.subjects.empty()) throw ValidationError("build_plan: dataset has no subjects");

  std::vector<const SubjectRecord*> subjects;
  std::array<std::vector<std::uint32_t>, kGroupCount> members;
  for (const auto& [id, subject] : dataset.subjects) {
    if (!subject.demographics)
      throw ValidationError("build_plan: subject '" + id + "' has no demographic label");
    if (subject.sessions.size() < kMinSessionsForEvaluation)
      throw ValidationError("build_plan: subject '" + id + "' has " +
                            std::to_string(subject.sessions.size()) + " sessions, needs " +
                            std::to_string(kMinSessionsForEvaluation));
    members[subject.demographics->index()].push_back(static_cast<std::uint32_t>(subjects.size()));
    subjects.push_back(&subject);
  }

  std::array<std::vector<std::uint32_t>, kGroupCount> dissimilar_pool;
  for (std::size_t g = 0; g < kGroupCount; ++g) {
    if (members[g].empty()) continue;
    const auto group = DemographicGroup::from_index(g);
    if (members[g].size() < 2)
      throw ValidationError("no similar impostor pool: group " + group.label() +
                            " has a single subject");
    for (std::size_t h = 0; h < kGroupCount; ++h) {
      const auto other = DemographicGroup::from_index(h);
      if (other.age != group.age && other.gender != group.gender)
        dissimilar_pool[g].insert(dissimilar_pool[g].end(), members[h].begin(), members[h].end());
    }
    if (dissimilar_pool[g].empty())
      throw ValidationError("no dissimilar impostor pool: no subject differs from group " +
                            group.label() + " in both age bin and gender");
  }

  plan.subject_ids.reserve(subjects.size());
  plan.session_ids.reserve(subjects.size() * (kEnrolmentSessions + kVerificationSessions));
  plan.assignments.reserve(subjects.size());
  for (const auto* subject : subjects) {
    SubjectAssignment a;
    a.subject = static_cast<std::uint32_t>(plan.subject_ids.size());
    plan.subject_ids.push_back(subject->id);
    auto it = subject->sessions.begin();
    for (auto& e : a.enrolment) {
      e = static_cast<std::uint32_t>(plan.session_ids.size());
      plan.session_ids.push_back((it++)->first);
    }
    for (auto& v : a.verification) {
      v = static_cast<std::uint32_t>(plan.session_ids.size());
      plan.session_ids.push_back((it++)->first);
    }
    plan.assignments.push_back(a);
  }

  SplitMix64 rng(seed);
  plan.records.reserve(subjects.size() * kRecordsPerSubject);
  const auto emit = [&plan](const SubjectAssignment& owner, std::uint32_t probe_subject,
                            std::uint32_t probe_session, Role role) {
    for (const auto enrol : owner.enrolment)
      plan.records.push_back({owner.subject, probe_subject, probe_session, enrol, role});
  };

  for (std::uint32_t s = 0; s < subjects.size(); ++s) {
    const auto& owner = plan.assignments[s];
    for (const auto v : owner.verification) emit(owner, s, v, Role::genuine);

    const auto g = subjects[s]->demographics->index();
    const auto& same = members[g];
    const auto self = static_cast<std::size_t>(std::find(same.begin(), same.end(), s) - same.begin());
    const auto similar = detail::draw_impostors(rng, same.size() - 1, [&](std::uint64_t j) {
      return same[j < self ? j : j + 1];
    });
    for (const auto& d : similar)
      emit(owner, d.subject, plan.assignments[d.subject].verification[d.slot], Role::similar_impostor);

    const auto& pool = dissimilar_pool[g];
    const auto dissimilar = detail::draw_impostors(rng, pool.size(), [&](std::uint64_t j) {
      return pool[j];
    });
    for (const auto& d : dissimilar)
      emit(owner, d.subject, plan.assignments[d.subject].verification[d.slot],
           Role::dissimilar_impostor);
  }
  return plan;
}

inline constexpr std::string_view kPlanHeader =
    "owner_subject,role,probe_subject,probe_session,enrol_session";
inline constexpr std::string_view kBlindPlanHeader = "probe_session,enrol_session";

inline std::string format_plan(const ComparisonPlan& plan) {
  std::string out;
  out.reserve(plan.size() * 48);
  out.append(kPlanHeader).push_back('\n');
  for (const auto& r : plan.records) {
    out.append(plan.subject_ids[r.owner]).push_back(',');
    out.append(to_string(r.role)).push_back(',');
    out.append(plan.subject_ids[r.probe_subject]).push_back(',');
    out.append(plan.session_ids[r.probe_session]).push_back(',');
    out.append(plan.session_ids[r.enrol_session]).push_back('\n');
  }
  return out;
}

inline std::string format_blind_plan(const ComparisonPlan& plan) {
  std::string out;
  out.reserve(plan.size() * 24);
  out.append(kBlindPlanHeader).push_back('\n');
  for (const auto& r : plan.records) {
    out.append(plan.session_ids[r.probe_session]).push_back(',');
    out.append(plan.session_ids[r.enrol_session]).push_back('\n');
  }
  return out;
}

/// Parses a full (non-blind) plan file. Assignments are reconstructed from
/// the genuine records; the seed is not recoverable from the file.
inline ComparisonPlan parse_plan(std::string_view buffer, const std::string& path = "<plan>") {
  text::LineReader reader(buffer);
  detail::expect_header(reader, kPlanHeader, path);
  ComparisonPlan plan;
  detail::Interner subject_index(plan.subject_ids);
  detail::Interner session_index(plan.session_ids);
  std::vector<std::string_view> fields;
  std::string_view line;
  while (reader.next(line)) {
    if (line.empty()) continue;
    text::split(line, fields);
    if (fields.size() != 5)
      throw FormatError(at_line(path, reader.number()) + "expected 5 fields, got " +
                        std::to_string(fields.size()));
    const auto role = parse_role(text::trim(fields[1]));
    if (!role)
      throw FormatError(at_line(path, reader.number()) + "unknown role '" +
                        std::string(text::trim(fields[1])) + "'");
    for (const auto f : {fields[0], fields[2], fields[3], fields[4]})
      if (text::trim(f).empty()) throw FormatError(at_line(path, reader.number()) + "empty field");
    plan.records.push_back({subject_index(text::trim(fields[0])), subject_index(text::trim(fields[2])),
                            session_index(text::trim(fields[3])), session_index(text::trim(fields[4])),
                            *role});
  }

  // Owners in order of first appearance; enrolment/verification from the
  // genuine block.
  std::vector<std::int64_t> slot_of(plan.subject_ids.size(), -1);
  std::vector<std::size_t> enrol_filled, verif_filled;
  for (const auto& r : plan.records) {
    if (slot_of[r.owner] < 0) {
      slot_of[r.owner] = static_cast<std::int64_t>(plan.assignments.size());
      plan.assignments.push_back({r.owner, {}, {}});
      enrol_filled.push_back(0);
      verif_filled.push_back(0);
    }
    if (r.role != Role::genuine) continue;
    const auto k = static_cast<std::size_t>(slot_of[r.owner]);
    auto& a = plan.assignments[k];
    const auto contains = [](auto& arr, std::size_t n, std::uint32_t v) {
      return std::find(arr.begin(), arr.begin() + static_cast<std::ptrdiff_t>(n), v) !=
             arr.begin() + static_cast<std::ptrdiff_t>(n);
    };
    if (!contains(a.enrolment, enrol_filled[k], r.enrol_session) && enrol_filled[k] < kEnrolmentSessions)
      a.enrolment[enrol_filled[k]++] = r.enrol_session;
    if (!contains(a.verification, verif_filled[k], r.probe_session) &&
        verif_filled[k] < kVerificationSessions)
      a.verification[verif_filled[k]++] = r.probe_session;
  }
  return plan;
}

inline ComparisonPlan load_plan(const std::filesystem::path& path) {
  return parse_plan(text::read_file(path), path.string());
}

inline void save_plan(const ComparisonPlan& plan, const std::filesystem::path& path) {
  text::write_file(path, format_plan(plan));
}

inline void save_blind_plan(const ComparisonPlan& plan, const std::filesystem::path& path) {
  text::write_file(path, format_blind_plan(plan));
}

/// Score submission file: one decimal score per line, aligned with the plan.
inline std::vector<double> parse_scores(std::string_view buffer, const std::string& path = "<scores>") {
  std::vector<double> out;
  out.reserve(buffer.size() / 8);
  text::LineReader reader(buffer);
  std::string_view line;
  while (reader.next(line)) {
    if (text::trim(line).empty()) {
      // A lone trailing newline is not a record; blank lines elsewhere are.
      throw FormatError(at_line(path, reader.number()) + "empty line");
    }
    const auto v = text::parse_double(line);
    if (!v) throw FormatError(at_line(path, reader.number()) + "non-numeric score '" + std::string(line) + "'");
    if (!std::isfinite(*v) || *v < 0.0 || *v > 1.0)
      throw FormatError(at_line(path, reader.number()) + "score " + std::string(text::trim(line)) +
                        " outside [0, 1]");
    out.push_back(*v);
  }
  return out;
}

inline std::vector<double> load_scores(const std::filesystem::path& path) {
  return parse_scores(text::read_file(path), path.string());
}

inline std::string format_scores(std::span<const double> scores) {
  std::string out;
  out.reserve(scores.size() * 20);
  for (const double s : scores) {
    text::append_double(out, s);
    out.push_back('\n');
  }
  return out;
}

inline void save_scores(std::span<const double> scores, const std::filesystem::path& path) {
  text::write_file(path, format_scores(scores));
}

/// Per-subject scores, each the mean over the 5 enrolment comparisons.
struct SubjectScoreProfile {
  std::string subject_id;
  std::array<double, kVerificationSessions> genuine{};
  std::array<double, kImpostorProbes> similar_impostor{};
  std::array<double, kImpostorProbes> dissimilar_impostor{};
  std::array<std::string, kImpostorProbes> similar_probe_subjects{};
  std::array<std::string, kImpostorProbes> dissimilar_probe_subjects{};

  std::array<double, 2 * kImpostorProbes> impostors() const {
    std::array<double, 2 * kImpostorProbes> out{};
    std::copy(similar_impostor.begin(), similar_impostor.end(), out.begin());
    std::copy(dissimilar_impostor.begin(), dissimilar_impostor.end(),
              out.begin() + static_cast<std::ptrdiff_t>(kImpostorProbes));
    return out;
  }

  friend bool operator==(const SubjectScoreProfile&, const SubjectScoreProfile&) = default;
};

/// Averages the 5 enrolment comparisons of every probe. Requires the plan's
/// canonical layout: each probe occupies 5 consecutive records, and each
/// owner has 10 probes per role.
inline std::vector<SubjectScoreProfile> aggregate(const ComparisonPlan& plan,
                                                  std::span<const double> scores) {
  if (scores.size() != plan.size())
    throw FormatError("score count " + std::to_string(scores.size()) +
                      " does not match plan length " + std::to_string(plan.size()));
  if (plan.size() % kEnrolmentSessions != 0)
    throw FormatError("plan length " + std::to_string(plan.size()) + " is not a multiple of " +
                      std::to_string(kEnrolmentSessions));
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (!(scores[i] >= 0.0 && scores[i] <= 1.0))
      throw FormatError("score " + std::to_string(i + 1) + " outside [0, 1]");

  struct Builder {
    SubjectScoreProfile profile;
    std::array<std::size_t, 3> filled{};
  };
  std::vector<std::int64_t> slot_of(plan.subject_ids.size(), -1);
  std::vector<Builder> builders;

  for (std::size_t base = 0; base < plan.size(); base += kEnrolmentSessions) {
    const auto& head = plan.records[base];
    double sum = 0.0;
    for (std::size_t e = 0; e < kEnrolmentSessions; ++e) {
      const auto& r = plan.records[base + e];
      if (r.owner != head.owner || r.role != head.role || r.probe_subject != head.probe_subject ||
          r.probe_session != head.probe_session)
        throw FormatError("plan record " + std::to_string(base + e + 1) +
                          " breaks the canonical 5-enrolment block layout");
      sum += scores[base + e];
    }
    if (slot_of[head.owner] < 0) {
      slot_of[head.owner] = static_cast<std::int64_t>(builders.size());
      builders.emplace_back();
      builders.back().profile.subject_id = plan.subject_ids[head.owner];
    }
    auto& b = builders[static_cast<std::size_t>(slot_of[head.owner])];
    const auto role = static_cast<std::size_t>(head.role);
    auto& k = b.filled[role];
    const std::size_t cap = head.role == Role::genuine ? kVerificationSessions : kImpostorProbes;
    if (k >= cap)
      throw FormatError("subject '" + b.profile.subject_id + "' has more than " + std::to_string(cap) +
                        " " + std::string(to_string(head.role)) + " probes");
    const double mean = sum / static_cast<double>(kEnrolmentSessions);
    switch (head.role) {
      case Role::genuine: b.profile.genuine[k] = mean; break;
      case Role::similar_impostor:
        b.profile.similar_impostor[k] = mean;
        b.profile.similar_probe_subjects[k] = plan.subject_ids[head.probe_subject];
        break;
      case Role::dissimilar_impostor:
        b.profile.dissimilar_impostor[k] = mean;
        b.profile.dissimilar_probe_subjects[k] = plan.subject_ids[head.probe_subject];
        break;
    }
    ++k;
  }

  std::vector<SubjectScoreProfile> out;
  out.reserve(builders.size());
  for (auto& b : builders) {
    if (b.filled[0] != kVerificationSessions || b.filled[1] != kImpostorProbes ||
        b.filled[2] != kImpostorProbes)
      throw FormatError("subject '" + b.profile.subject_id + "' has an incomplete profile (" +
                        std::to_string(b.filled[0]) + "/" + std::to_string(b.filled[1]) + "/" +
                        std::to_string(b.filled[2]) + " probes)");
    out.push_back(std::move(b.profile));
  }
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.subject_id < b.subject_id; });
  return out;
}

inline nlohmann::ordered_json profiles_to_json(std::span<const SubjectScoreProfile> profiles) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& p : profiles) {
    nlohmann::ordered_json j;
    j["subject_id"] = p.subject_id;
    j["genuine"] = p.genuine;
    j["similar_impostor"] = p.similar_impostor;
    j["dissimilar_impostor"] = p.dissimilar_impostor;
    j["similar_probe_subjects"] = p.similar_probe_subjects;
    j["dissimilar_probe_subjects"] = p.dissimilar_probe_subjects;
    arr.push_back(std::move(j));
  }
  return arr;
}

}  // namespace kvc

#include <gtest/gtest.h>

#include <algorithm>

#include "kvc/dataset.hpp"
#include "kvc/synth.hpp"
#include "support.hpp"

namespace kvc {
namespace {

std::string events_csv(const std::string& body) { return std::string(kEventHeader) + "\n" + body; }

template <typename Fn>
std::string error_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

TEST(Events, MinimalFileLoads) {
  const auto d = parse_events(events_csv("S1,A,97,0,100\nS1,A,98,150,300\n"));
  ASSERT_EQ(d.subjects.size(), 1u);
  const auto& s = d.subjects.at("S1");
  ASSERT_EQ(s.sessions.size(), 1u);
  EXPECT_EQ(s.sessions.at("A").events.size(), 2u);
  EXPECT_FALSE(s.demographics.has_value());
}

TEST(Events, ReleaseBeforePressNamesLine) {
  const auto msg = error_of([] { parse_events(events_csv("S1,A,97,0,100\nS1,A,98,300,150\n"), "ev.csv"); });
  EXPECT_NE(msg.find("ev.csv:3:"), std::string::npos) << msg;
  EXPECT_NE(msg.find("release_ts_ms precedes press_ts_ms"), std::string::npos) << msg;
}

TEST(Events, MalformedLinesReportLineNumbers) {
  EXPECT_NE(error_of([] { parse_events(events_csv("S1,A,97,0\n"), "f"); }).find("f:2:"), std::string::npos);
  EXPECT_NE(error_of([] { parse_events(events_csv("S1,A,97,0,1\nS1,A,256,0,1\n"), "f"); }).find("f:3: key_code"),
            std::string::npos);
  EXPECT_NE(error_of([] { parse_events(events_csv("S1,A,97,0.5,1\n"), "f"); }).find("f:2: timestamps"),
            std::string::npos);
  EXPECT_NE(error_of([] { parse_events(events_csv(",A,97,0,1\n"), "f"); }).find("f:2: empty"), std::string::npos);
  EXPECT_THROW(parse_events("subject,session\nS1,A\n"), FormatError);
  EXPECT_THROW(parse_events(""), FormatError);
}

TEST(Events, DuplicateRowRejected) {
  const auto msg = error_of([] { parse_events(events_csv("S1,A,97,0,100\nS1,A,98,5,9\nS1,A,97,0,100\n"), "f"); });
  EXPECT_NE(msg.find("duplicate event"), std::string::npos) << msg;
}

TEST(Events, SessionSharedBetweenSubjectsRejected) {
  const auto msg = error_of([] { parse_events(events_csv("S1,A,97,0,100\nS2,A,98,5,9\n"), "f"); });
  EXPECT_NE(msg.find("f:3:"), std::string::npos) << msg;
  EXPECT_NE(msg.find("already belongs"), std::string::npos) << msg;
}

TEST(Events, EventsSortedByPressTime) {
  const auto d = parse_events(events_csv("S1,A,99,400,450\nS1,A,97,0,100\nS1,A,98,150,300\n"));
  const auto& ev = d.subjects.at("S1").sessions.at("A").events;
  ASSERT_EQ(ev.size(), 3u);
  EXPECT_EQ(ev[0].press_ms, 0);
  EXPECT_EQ(ev[1].press_ms, 150);
  EXPECT_EQ(ev[2].press_ms, 400);
}

TEST(Events, NegativeAndCarriageReturnInputAccepted) {
  const auto d = parse_events(std::string(kEventHeader) + "\r\nS1,A,32,-20,-5\r\n");
  EXPECT_EQ(d.subjects.at("S1").sessions.at("A").events.at(0).press_ms, -20);
}

TEST(Events, RoundTripSyntheticPopulation) {
  auto cfg = testing::small_config();
  cfg.subjects = 100;
  const auto d = generate(cfg).dataset;
  testing::TempDir dir;
  write_dataset_files(d, dir.path());
  const auto back = load_metadata(dir / "metadata.csv", load_events(dir / "events.csv"));
  EXPECT_TRUE(back == d);
}

TEST(Events, LineOrderDoesNotMatter) {
  auto cfg = testing::small_config(2);
  const auto d = generate(cfg).dataset;
  const auto text = format_events(d);
  std::vector<std::string> lines;
  std::size_t start = text.find('\n') + 1;
  while (start < text.size()) {
    const auto end = text.find('\n', start);
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  SplitMix64 rng(5);
  for (std::size_t i = lines.size(); i > 1; --i) std::swap(lines[i - 1], lines[rng.below(i)]);
  std::string shuffled = std::string(kEventHeader) + "\n";
  for (const auto& l : lines) shuffled += l + "\n";
  auto back = parse_events(shuffled);
  EXPECT_TRUE(back == parse_events(text));
}

TEST(Metadata, AttachesGroups) {
  auto d = parse_events(events_csv("S1,A,97,0,100\nS2,B,97,0,100\n"));
  std::vector<std::string> warnings;
  d = attach_metadata(d, parse_metadata("subject_id,age_bin,gender\nS1,18-26,female\nS9,10-13,male\n"), &warnings);
  ASSERT_TRUE(d.subjects.at("S1").demographics.has_value());
  EXPECT_EQ(*d.subjects.at("S1").demographics, (DemographicGroup{AgeBin::y18_26, Gender::female}));
  EXPECT_FALSE(d.subjects.at("S2").demographics.has_value());
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("S9"), std::string::npos);
}

TEST(Metadata, UnknownTokensRejected) {
  const auto age = error_of([] { parse_metadata("subject_id,age_bin,gender\nS1,18-27,female\n"); });
  EXPECT_NE(age.find("unknown age bin"), std::string::npos) << age;
  const auto gender = error_of([] { parse_metadata("subject_id,age_bin,gender\nS1,18-26,other\n"); });
  EXPECT_NE(gender.find("unknown gender"), std::string::npos) << gender;
  EXPECT_THROW(parse_metadata("subject_id,age_bin,gender\nS1,18-26,male\nS1,18-26,male\n"), FormatError);
}

TEST(Metadata, LabelledAndUnlabeledCountsAtCorpusScale) {
  constexpr std::size_t total = 40'639, labelled = 25'832;
  std::string events(kEventHeader);
  events += '\n';
  std::string meta(kMetadataHeader);
  meta += '\n';
  for (std::size_t i = 0; i < total; ++i) {
    const auto id = "u" + std::to_string(i);
    events += id + "," + id + "_0,97,0,10\n";
    if (i < labelled) meta += id + ",14-17,male\n";
  }
  const auto d = attach_metadata(parse_events(events), parse_metadata(meta));
  const auto report = validate_for_evaluation(d);
  EXPECT_EQ(report.unlabeled.size(), total - labelled);
  EXPECT_EQ(report.unlabeled.size(), 14'807u);
  EXPECT_EQ(demographics_of(d).size(), labelled);
}

TEST(Validation, CleanDatasetPasses) {
  const auto d = generate(testing::small_config(1)).dataset;
  EXPECT_TRUE(validate_for_evaluation(d).ok());
}

TEST(Validation, FlagsShortfallsSorted) {
  auto d = generate(testing::small_config(1)).dataset;
  auto& b = d.subjects.at("s000005");
  b.sessions.erase(b.sessions.begin());
  auto& a = d.subjects.at("s000002");
  a.sessions.begin()->second.events.resize(3);
  d.subjects.at("s000001").demographics.reset();
  d.subjects.at("s000000").demographics.reset();

  const auto r = validate_for_evaluation(d);
  EXPECT_FALSE(r.ok());
  EXPECT_EQ(r.insufficient_sessions, std::vector<std::string>{"s000005"});
  EXPECT_EQ(r.unlabeled, (std::vector<std::string>{"s000000", "s000001"}));
  ASSERT_EQ(r.short_sessions.size(), 1u);
  EXPECT_EQ(r.short_sessions[0].subject_id, "s000002");
  EXPECT_EQ(r.short_sessions[0].events, 3u);
  const auto j = r.to_json();
  EXPECT_TRUE(j.contains("insufficient_sessions") && j.contains("unlabeled") && j.contains("short_sessions"));
}

TEST(Demographics, TwelveDistinctGroups) {
  const auto groups = all_groups();
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    EXPECT_EQ(groups[i].index(), i);
    EXPECT_EQ(DemographicGroup::from_index(i), groups[i]);
    labels.push_back(groups[i].label());
  }
  std::sort(labels.begin(), labels.end());
  EXPECT_EQ(std::unique(labels.begin(), labels.end()), labels.end());
  EXPECT_EQ(groups.size(), 12u);
}

}  // namespace
}  // namespace kvc

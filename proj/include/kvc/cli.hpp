#pragma once

#include <filesystem>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "kvc/dataset.hpp"
#include "kvc/error.hpp"
#include "kvc/fair_metrics.hpp"
#include "kvc/features.hpp"
#include "kvc/protocol.hpp"
#include "kvc/synth.hpp"
#include "kvc/text.hpp"
#include "kvc/verif_metrics.hpp"
#include "kvc/verifier.hpp"

namespace kvc::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 1;
inline constexpr int kExitInternal = 2;

struct SynthArgs {
  fs::path config;
  fs::path out_dir;
};

struct ValidateArgs {
  fs::path events;
  std::optional<fs::path> metadata;
};

struct ExtractArgs {
  fs::path events;
  std::string session;
  std::string features = "5f";
  std::optional<fs::path> out;
};

struct PlanArgs {
  fs::path events;
  std::optional<fs::path> metadata;
  std::uint64_t seed = 0;
  fs::path out_dir;
};

struct ScoreArgs {
  fs::path events;
  fs::path plan;
  std::string features = "5f";
  fs::path out;
};

struct EvaluateArgs {
  fs::path plan;
  fs::path scores;
  std::optional<fs::path> metadata;
  double alpha = kDefaultAlpha;
  std::string mode = "both";
  fs::path out_dir;
  bool profiles = false;
};

namespace detail {

inline void write_json(const fs::path& path, const nlohmann::ordered_json& j) {
  text::write_file(path, j.dump(2) + "\n");
}

inline FeatureSet feature_set_or_throw(const std::string& token) {
  const auto fs = parse_feature_set(token);
  if (!fs) throw ValidationError("unknown feature set '" + token + "' (expected 4f, 5f, 10f or 11f)");
  return *fs;
}

inline std::vector<EvalMode> modes_or_throw(const std::string& token) {
  if (token == "global") return {EvalMode::global};
  if (token == "mean_per_subject") return {EvalMode::mean_per_subject};
  if (token == "both") return {EvalMode::global, EvalMode::mean_per_subject};
  throw ValidationError("unknown mode '" + token + "' (expected global, mean_per_subject or both)");
}

inline std::string fixed(double v, int digits) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

}  // namespace detail

inline int cmd_synth(const SynthArgs& args, unsigned threads, std::ostream& out) {
  const auto config = synth_config_from_json(
      [&] {
        try {
          return nlohmann::json::parse(text::read_file(args.config));
        } catch (const nlohmann::json::parse_error& e) {
          throw FormatError(args.config.string() + ": " + e.what());
        }
      }());
  const auto result = generate(config, threads);
  write_dataset_files(result.dataset, args.out_dir);
  const auto s = summarize(result.dataset);
  out << "subjects: " << s.subjects << "\n"
      << "sessions: " << s.sessions << "\n"
      << "mean session length: " << detail::fixed(s.mean_session_length, 2) << "\n"
      << "groups: " << s.groups << "\n";
  if (result.floored_times > 0)
    out << "warning: " << result.floored_times << " timing draws clamped to the minimum\n";
  out << "wrote " << (args.out_dir / "events.csv").string() << " and "
      << (args.out_dir / "metadata.csv").string() << "\n";
  return kExitOk;
}

inline Dataset load_dataset(const fs::path& events, const std::optional<fs::path>& metadata,
                            std::ostream* warn) {
  auto dataset = load_events(events);
  if (metadata) {
    std::vector<std::string> warnings;
    dataset = load_metadata(*metadata, std::move(dataset), &warnings);
    if (warn)
      for (const auto& w : warnings) *warn << "warning: " << w << "\n";
  }
  return dataset;
}

inline int cmd_validate(const ValidateArgs& args, std::ostream& out, std::ostream& err) {
  const auto dataset = load_dataset(args.events, args.metadata, &err);
  const auto report = validate_for_evaluation(dataset);
  out << report.to_json().dump(2) << "\n";
  return report.ok() ? kExitOk : kExitInput;
}

inline int cmd_extract(const ExtractArgs& args, std::ostream& out) {
  const auto dataset = load_events(args.events);
  for (const auto& [id, subject] : dataset.subjects) {
    const auto it = subject.sessions.find(args.session);
    if (it == subject.sessions.end()) continue;
    const auto csv = format_features(extract(it->second, detail::feature_set_or_throw(args.features)));
    if (args.out) text::write_file(*args.out, csv);
    else out << csv;
    return kExitOk;
  }
  throw ValidationError("session '" + args.session + "' not found in " + args.events.string());
}

inline std::string describe(const ValidationReport& r) {
  std::string msg = "dataset is not ready for evaluation:";
  const auto list = [&](const char* what, const std::vector<std::string>& ids) {
    if (ids.empty()) return;
    msg += std::string("\n  ") + what + " (" + std::to_string(ids.size()) + "):";
    for (std::size_t k = 0; k < ids.size() && k < 20; ++k) msg += " " + ids[k];
    if (ids.size() > 20) msg += " ...";
  };
  list("fewer than 15 sessions", r.insufficient_sessions);
  list("no demographic label", r.unlabeled);
  std::vector<std::string> shorts;
  for (const auto& s : r.short_sessions) shorts.push_back(s.subject_id + "/" + s.session_id);
  list("sessions under 4 events", shorts);
  return msg;
}

inline int cmd_plan(const PlanArgs& args, std::ostream& out, std::ostream& err) {
  if (!args.metadata) throw ValidationError("plan: a metadata file (-m) is required");
  const auto dataset = load_dataset(args.events, args.metadata, &err);
  const auto report = validate_for_evaluation(dataset);
  if (!report.ok()) throw ValidationError(describe(report));
  const auto plan = build_plan(dataset, args.seed);
  fs::create_directories(args.out_dir);
  save_plan(plan, args.out_dir / "plan.csv");
  save_blind_plan(plan, args.out_dir / "plan_blind.csv");
  const auto subjects = plan.assignments.size();
  out << "subjects: " << subjects << "\n"
      << "records: " << plan.size() << " (150 x " << subjects << " = " << kRecordsPerSubject * subjects << ")\n"
      << "seed: " << args.seed << "\n"
      << "wrote " << (args.out_dir / "plan.csv").string() << " and "
      << (args.out_dir / "plan_blind.csv").string() << "\n";
  return kExitOk;
}

inline int cmd_score(const ScoreArgs& args, unsigned threads, std::ostream& out) {
  const auto fs = detail::feature_set_or_throw(args.features);
  const auto dataset = load_events(args.events);
  const auto plan = load_plan(args.plan);
  const auto result = score_plan(plan, dataset, fs, threads);
  if (args.out.has_parent_path()) fs::create_directories(args.out.parent_path());
  save_scores(result.scores, args.out);
  out << "scored " << result.scores.size() << " comparisons with " << to_string(fs) << " features\n"
      << "wrote " << args.out.string() << "\n";
  return kExitOk;
}

inline int cmd_evaluate(const EvaluateArgs& args, unsigned threads, std::ostream& out) {
  const auto modes = detail::modes_or_throw(args.mode);
  if (!(args.alpha >= 0.0 && args.alpha <= 1.0)) throw ValidationError("--alpha must lie in [0, 1]");
  const auto plan = load_plan(args.plan);
  const auto scores = load_scores(args.scores);
  if (scores.size() != plan.size())
    throw FormatError(args.scores.string() + ": score count " + std::to_string(scores.size()) +
                      " does not match plan length " + std::to_string(plan.size()));
  const auto profiles = aggregate(plan, scores);
  fs::create_directories(args.out_dir);

  for (const auto mode : modes) {
    const auto report = mode == EvalMode::global ? evaluate_global(profiles)
                                                 : evaluate_per_subject(profiles, threads);
    const auto path = args.out_dir / ("report_" + std::string(to_string(mode)) + ".json");
    detail::write_json(path, report.to_json());
    out << to_string(mode) << ": EER " << detail::fixed(100.0 * *report.eer, 2) << "%, AUC "
        << detail::fixed(*report.auc, 4) << "\n";
  }

  if (args.metadata) {
    const auto demographics = read_metadata(*args.metadata);
    const auto fairness = fairness_report(profiles, demographics, args.alpha);
    detail::write_json(args.out_dir / "fairness.json", fairness.to_json());
    out << "fairness: STD " << detail::fixed(fairness.std_pct, 3) << "%, SIR_a "
        << detail::fixed(fairness.sir_age_pct, 3) << ", SIR_g " << detail::fixed(fairness.sir_gender_pct, 3)
        << "\n";
  } else {
    out << "fairness: skipped (no metadata)\n";
  }

  emit_curves(pool(profiles), CurvePaths::in(args.out_dir));
  if (args.profiles) detail::write_json(args.out_dir / "profiles.json", profiles_to_json(profiles));
  out << "wrote reports and curves to " << args.out_dir.string() << "\n";
  return kExitOk;
}

/// Parses the command line and dispatches. Library errors map to exit code 1
/// for bad input and 2 for anything else.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Keystroke verification benchmark: synthesize, plan, score and evaluate."};
  app.require_subcommand(1);
  app.fallthrough();
  unsigned threads = 0;
  app.add_option("--threads", threads, "Worker threads (0 = all cores)")->capture_default_str();

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Generate a synthetic population");
  c_synth->add_option("-c,--config", synth.config, "SynthConfig JSON")->required();
  c_synth->add_option("-o,--out", synth.out_dir, "Output directory")->required();

  ValidateArgs validate;
  auto* c_validate = app.add_subcommand("validate", "Check a dataset against the evaluation requirements");
  c_validate->add_option("-d,--events", validate.events, "Event CSV")->required();
  c_validate->add_option("-m,--metadata", validate.metadata, "Metadata CSV");

  ExtractArgs extract_args;
  auto* c_extract = app.add_subcommand("extract", "Dump the feature rows of one session");
  c_extract->add_option("-d,--events", extract_args.events, "Event CSV")->required();
  c_extract->add_option("--session", extract_args.session, "Session id")->required();
  c_extract->add_option("--features", extract_args.features, "4f, 5f, 10f or 11f")->capture_default_str();
  c_extract->add_option("-o,--out", extract_args.out, "Output CSV (default stdout)");

  PlanArgs plan;
  auto* c_plan = app.add_subcommand("plan", "Build the comparison plan");
  c_plan->add_option("-d,--events", plan.events, "Event CSV")->required();
  c_plan->add_option("-m,--metadata", plan.metadata, "Metadata CSV");
  c_plan->add_option("--seed", plan.seed, "Plan seed")->required();
  c_plan->add_option("-o,--out", plan.out_dir, "Output directory")->required();

  ScoreArgs score;
  auto* c_score = app.add_subcommand("score", "Score a plan with the baseline verifier");
  c_score->add_option("-d,--events", score.events, "Event CSV")->required();
  c_score->add_option("-p,--plan", score.plan, "Plan CSV")->required();
  c_score->add_option("--features", score.features, "4f, 5f, 10f or 11f")->capture_default_str();
  c_score->add_option("-o,--out", score.out, "Score file")->required();

  EvaluateArgs evaluate;
  auto* c_evaluate = app.add_subcommand("evaluate", "Compute verification and fairness reports");
  c_evaluate->add_option("-p,--plan", evaluate.plan, "Plan CSV")->required();
  c_evaluate->add_option("-s,--scores", evaluate.scores, "Score file")->required();
  c_evaluate->add_option("-m,--metadata", evaluate.metadata, "Metadata CSV");
  c_evaluate->add_option("--alpha", evaluate.alpha, "Fairness weight in [0, 1]")->capture_default_str();
  c_evaluate->add_option("--mode", evaluate.mode, "global, mean_per_subject or both")->capture_default_str();
  c_evaluate->add_option("-o,--out", evaluate.out_dir, "Output directory")->required();
  c_evaluate->add_flag("--profiles", evaluate.profiles, "Also write profiles.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }

  const unsigned workers = resolve_threads(threads);
  try {
    if (*c_synth) return cmd_synth(synth, workers, out);
    if (*c_validate) return cmd_validate(validate, out, err);
    if (*c_extract) return cmd_extract(extract_args, out);
    if (*c_plan) return cmd_plan(plan, out, err);
    if (*c_score) return cmd_score(score, workers, out);
    if (*c_evaluate) return cmd_evaluate(evaluate, workers, out);
  } catch (const FormatError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitInternal;
}

}  // namespace kvc::cli

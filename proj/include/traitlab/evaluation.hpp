#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "traitlab/domain.hpp"

namespace traitlab::evaluation {

// One benchmark question. Multiple-choice options are positional; the
// option id is its letter ("A" + index). GAIA items have no options and
// a free-form gold answer.
struct BenchmarkItem {
  BenchmarkKind benchmark = BenchmarkKind::MMLU;
  std::string id;
  std::string subject;  // MMLU subject bucket
  std::string context;  // BBQ ambiguous context
  std::string question;
  std::vector<std::string> options;
  std::string gold;  // option letter, or free-form for GAIA

  // BBQ official metadata. For ambiguous items the gold letter is the
  // Unknown option; stereotyped_option indexes the option naming the
  // stereotyped group.
  std::string context_condition;
  std::string question_polarity;  // "neg" | "nonneg"
  int stereotyped_option = -1;
};

std::string option_letter(int index);

// Extracted answers keyed by item id; nullopt marks Unparseable.
using AnswerMap = std::map<std::string, std::optional<std::string>>;

// Scans for the last "FINAL ANSWER:" marker line and returns the trimmed
// remainder of that line; nullopt when the marker never appears.
std::optional<std::string> extract_final_answer(const std::string& response);
inline constexpr std::string_view kFinalAnswerMarker = "FINAL ANSWER:";

struct MmluScore {
  std::map<std::string, double> per_subject;
  double accuracy_avg = 0.0;
  int n_items = 0;
  int n_correct = 0;
};

struct GaiaScore {
  double accuracy = 0.0;
  int n_items = 0;
  int n_correct = 0;
};

// Unparseable answers count as incorrect; a missing map entry throws
// MissingAnswers.
MmluScore score_mmlu(const std::vector<BenchmarkItem>& items, const AnswerMap& answers);
GaiaScore score_gaia(const std::vector<BenchmarkItem>& items, const AnswerMap& answers);

struct BbqScore {
  double s_amb = 0.0;  // percentage points in [-100, 100]
  int n_items = 0;
  int n_unknown = 0;
  int n_biased = 0;
  int n_antibiased = 0;
};

// S_AMB over ambiguous items:
//   acc      = n_unknown / n_items
//   bias_dis = 2 * n_biased / (n_biased + n_antibiased) - 1  (0 when both zero)
//   S_AMB    = 100 * (1 - acc) * bias_dis
BbqScore bbq_score_from_counts(int n_items, int n_unknown, int n_biased, int n_antibiased);
BbqScore score_bbq_ambiguous(const std::vector<BenchmarkItem>& items, const AnswerMap& answers);

// One within-run performance change in the benchmark's native units.
struct DeltaRecord {
  MethodLabel method = MethodLabel::ICL;
  ModelLabel model;
  TraitLabel trait = TraitLabel::Openness;
  BenchmarkKind benchmark = BenchmarkKind::MMLU;
  double baseline = 0.0;
  double manipulated = 0.0;
  double delta = 0.0;  // always exactly manipulated - baseline
};

// Validates both values against the benchmark's legal range.
DeltaRecord compute_delta(double baseline, double manipulated, BenchmarkKind benchmark);

// One evaluated condition of a run. condition == nullopt is the Baseline.
struct RunResult {
  std::string run_id;
  MethodLabel method = MethodLabel::ICL;
  ModelLabel model;
  std::optional<TraitLabel> condition;
  std::map<BenchmarkKind, AnswerMap> answers;
  std::map<BenchmarkKind, double> scores;  // headline value per benchmark

  std::string condition_name() const;
};

// Within-run delta assembly: every trait run must share the baseline's
// run id, method and model (CrossRunMismatch) and its exact item sets
// (ItemSetMismatch). One DeltaRecord per (trait, benchmark).
std::vector<DeltaRecord> assemble_run(const RunResult& baseline,
                                      const std::vector<RunResult>& trait_runs);

// --- files ---

std::vector<BenchmarkItem> load_mmlu_items(const std::filesystem::path& path);
std::vector<BenchmarkItem> load_gaia_items(const std::filesystem::path& path);
std::vector<BenchmarkItem> load_bbq_items(const std::filesystem::path& path);

// Tab-separated delta records; loading re-checks the delta identity,
// serializing canonical files round-trips byte-identically.
std::string serialize_delta_records(const std::vector<DeltaRecord>& records);
std::vector<DeltaRecord> parse_delta_records(const std::string& text);
void save_delta_records(const std::filesystem::path& path, const std::vector<DeltaRecord>& records);
std::vector<DeltaRecord> load_delta_records(const std::filesystem::path& path);

void save_run_result(const std::filesystem::path& path, const RunResult& run);
RunResult load_run_result(const std::filesystem::path& path);

// Wide per-trait delta table in the usual results layout: one row per
// (model, method, benchmark), trait columns in Ext/Agr/Neu/Ope/Con order.
std::string render_delta_table(const std::vector<DeltaRecord>& records);

}  // namespace traitlab::evaluation

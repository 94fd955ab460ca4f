#pragma once

// Answer normalization, token-F1/EM scoring, dual-track (original vs new
// answer) reporting, counter-memory update rates, and benchmark driving.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kpref/gateway.hpp"
#include "kpref/prompts.hpp"

namespace kpref {

// Lowercase (ASCII), strip punctuation, drop whole-word articles a/an/the,
// collapse whitespace. Matches the usual extractive-QA convention.
std::string normalize_answer(const std::string& s);

// Token-multiset F1 over normalized strings. Both empty -> 1, one empty -> 0.
double token_f1(const std::string& pred, const std::string& gold);
bool exact_match(const std::string& pred, const std::string& gold);

double best_f1(const std::string& pred, const std::vector<std::string>& golds);
bool best_em(const std::string& pred, const std::vector<std::string>& golds);

enum class Verdict { Same, Different, Ambiguous };

const char* verdict_name(Verdict v);
Verdict verdict_from_name(const std::string& name);

// Same iff exact normalized match or F1 > 0.8; Different iff F1 < 0.2.
Verdict classify_f1(double f1, bool exact);
Verdict classify_answer(const std::string& pred, const std::vector<std::string>& golds);

// Closed-book probe outcome for one item, measured against its gold answers.
struct ProbeVerdict {
    Verdict verdict = Verdict::Ambiguous;
    std::string parametric_answer;
    double f1 = 0.0;
};

struct EvalItem {
    std::string id;
    std::string question;            // without the assumption
    std::optional<std::string> assumption;
    std::vector<std::string> contexts;
    std::vector<std::string> gold;     // target answers (counterfactual track)
    std::vector<std::string> alt_gold; // original-world answers, may be empty
    std::string subset;                // grouping label for reports
};

std::vector<EvalItem> read_items(const std::string& path);
void write_items(const std::vector<EvalItem>& items, const std::string& path);

struct TrackScores {
    size_t n = 0;
    double f1 = 0.0; // x100
    double em = 0.0; // x100
    std::optional<double> f1_orig, em_orig;   // alt_gold track
    std::optional<double> f1_ratio, em_ratio; // new / original
};

struct MetricsReport {
    TrackScores overall;
    std::map<std::string, TrackScores> per_subset;
    size_t missing_predictions = 0;
    std::optional<double> p_update_correct;   // counter-memory reports only
    std::optional<double> p_update_incorrect;
};

// new / original on already-x100 scores (the printed-table arithmetic).
double score_ratio(double new_score, double orig_score);

MetricsReport score_run(const std::map<std::string, std::string>& preds,
                        const std::vector<EvalItem>& items);

// Over items whose closed-book verdict is Different (the counter-memory
// subset): P(U_c) = % answered Same vs gold open-book; P(U_i) = % answered
// Different vs gold AND Different vs the recorded parametric answer.
// Ambiguous outcomes count toward neither.
MetricsReport counter_memory_report(const std::map<std::string, ProbeVerdict>& probes,
                                    const std::map<std::string, std::string>& preds,
                                    const std::vector<EvalItem>& items);

enum class EvalMode { Normal, AssumptionInQuestion, AssumptionInInstruction };

EvalMode eval_mode_from_name(const std::string& name);

struct BenchmarkConfig {
    EvalMode mode = EvalMode::Normal;
    size_t shots = 0; // 0, 3, or 5
    std::vector<Exemplar> exemplars;
    GenerationConfig gen = GenerationConfig::infer256();
};

struct BenchmarkRun {
    std::vector<std::pair<std::string, std::string>> preds; // item id -> prediction
    size_t n_fallback = 0; // no <answer> tag; trimmed full text used
    size_t n_error = 0;    // gateway failure; empty prediction recorded

    std::map<std::string, std::string> pred_map() const;
};

// Renders one prompt per item (mode/shots applied), completes them in one
// order-preserving batch, extracts <answer> spans.
BenchmarkRun run_benchmark(const std::vector<EvalItem>& items, Gateway& gateway,
                           const BenchmarkConfig& cfg);

// Closed-book probe for every item.
std::map<std::string, ProbeVerdict> probe_items(const std::vector<EvalItem>& items,
                                                Gateway& gateway,
                                                const std::vector<Exemplar>& exemplars,
                                                const GenerationConfig& gen);

void write_report_json(const MetricsReport& r, const std::string& path);
void write_report_csv(const MetricsReport& r, const std::string& path);

void write_verdicts(const std::map<std::string, ProbeVerdict>& verdicts,
                    const std::string& path);
std::map<std::string, ProbeVerdict> read_verdicts(const std::string& path);

void write_preds(const BenchmarkRun& run, const std::string& path);
std::map<std::string, std::string> read_preds(const std::string& path);

} // namespace kpref

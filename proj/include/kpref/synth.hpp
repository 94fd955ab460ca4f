#pragma once

// QA-instance synthesis: single-hop (counterfactual + probe-filtered factual)
// from passages, multi-hop from fact chains / counterfactual pairs, plus the
// plan-driven orchestration over a whole corpus.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kpref/corpus.hpp"
#include "kpref/editor.hpp"
#include "kpref/eval.hpp"
#include "kpref/gateway.hpp"
#include "kpref/kg.hpp"
#include "kpref/miner.hpp"

namespace kpref {

enum class InstanceKind { ShFactual, ShCounterfactual, MhFactual, MhCounterfactual };

const char* instance_kind_name(InstanceKind k);
InstanceKind instance_kind_from_name(const std::string& name);
bool is_multi_hop(InstanceKind k);
bool is_counterfactual(InstanceKind k);

struct InstancePassage {
    std::string text;
    std::string origin; // "source" | "synthesized" | "noise"
};

struct QAInstance {
    std::string id;
    InstanceKind kind = InstanceKind::ShFactual;
    std::string question; // assumption included inline for counterfactual multi-hop
    std::optional<std::string> assumption;
    std::vector<LabelTriple> assumption_hold;    // kept for assumption re-shuffling
    std::vector<LabelTriple> assumption_retract;
    std::vector<std::string> answers; // answers[0] is the primary answer
    std::vector<std::string> alt_answers; // original-world answers, counterfactual only
    std::vector<InstancePassage> passages;
    std::optional<std::string> derivation;
    std::map<std::string, std::string> provenance; // source/template/model/seed
};

void write_instances(const std::vector<QAInstance>& instances, const std::string& path);
std::vector<QAInstance> read_instances(const std::string& path);

std::vector<Exemplar> load_exemplars(const std::string& path);

// Closed-book probe of one question against expected answers.
ProbeVerdict probe_parametric(const std::string& question,
                              const std::vector<std::string>& golds,
                              Gateway& gateway,
                              const std::vector<Exemplar>& exemplars,
                              const GenerationConfig& gen = GenerationConfig::infer128());

// Question must contain the head label and no other chain entity label
// (case-insensitive substring matching).
bool validate_mh_question(const std::string& question, const std::string& head_label,
                          const std::vector<std::string>& other_labels);

constexpr size_t kSynthMaxAttempts = 3;
constexpr size_t kProbeShots = 3;
constexpr size_t kMhQuestionShots = 5;

std::optional<QAInstance> synth_sh_counterfactual(const PassageDoc& doc, Gateway& gateway,
                                                  uint64_t seed, const std::string& model);

/// Probe-first filtering: question+answer are parsed, every probe endpoint is
// asked closed-book, and a Same verdict from any of them discards the item
// before the remaining components are used. `probe_filtered`, when given, is
// set iff the discard came from the probe rather than failed synthesis.
std::optional<QAInstance> synth_sh_factual(const PassageDoc& doc, Gateway& gateway,
                                           const std::vector<Gateway*>& probe_endpoints,
                                           const std::vector<Exemplar>& probe_exemplars,
                                           uint64_t seed, const std::string& model,
                                           bool* probe_filtered = nullptr);

std::optional<QAInstance> synth_mh_factual(const KnowledgeGraph& g, const FactChain& chain,
                                           Gateway& gateway,
                                           const std::vector<Exemplar>& question_exemplars,
                                           uint64_t seed, const std::string& model);

std::optional<QAInstance> synth_mh_counterfactual(const KnowledgeGraph& g,
                                                  const CounterfactualPair& pair,
                                                  Gateway& gateway,
                                                  const std::vector<Exemplar>& question_exemplars,
                                                  uint64_t seed, const std::string& model,
                                                  bool invert_assumption = false);

// Per-hop instance counts: {1: n} is single-hop, {2..4: n} multi-hop.
struct SynthPlan {
    std::map<size_t, size_t> factual;
    std::map<size_t, size_t> counterfactual;

    size_t total() const;
    static SynthPlan load(const std::string& path);
};

struct SynthStats {
    size_t requested = 0;
    size_t emitted = 0;
    size_t skipped_synthesis = 0; // tag/validation failures after retries
    size_t skipped_probe = 0;     // factual question known parametrically
    size_t skipped_duplicate = 0; // normalized-question dedup
    size_t short_supply = 0;      // plan wanted more source items than exist
};

struct SynthConfig {
    uint64_t seed = 0;
    std::string model;
    bool invert_assumption = false;
};

// Seeded disjoint sampling of source passages/chains/pairs per plan cell,
// synthesis, dedup on normalized question text, canonical id order.
std::vector<QAInstance> run_synthesis(const KnowledgeGraph& g, const Corpus& corpus,
                                      const std::vector<FactChain>& chains,
                                      const std::vector<CounterfactualPair>& pairs,
                                      const SynthPlan& plan, Gateway& gateway,
                                      const std::vector<Gateway*>& probe_endpoints,
                                      const std::vector<Exemplar>& probe_exemplars,
                                      const std::vector<Exemplar>& question_exemplars,
                                      const SynthConfig& cfg, SynthStats* stats = nullptr);

// Rendered "(h, r, t)" with display labels.
LabelTriple triple_labels(const KnowledgeGraph& g, const Triple& t);
std::string render_triples(const KnowledgeGraph& g, const std::vector<Triple>& ts);

} // namespace kpref

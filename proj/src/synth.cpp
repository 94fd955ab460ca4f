#include "kpref/synth.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "kpref/jsonl.hpp"
#include "kpref/rng.hpp"

namespace kpref {

const char* instance_kind_name(InstanceKind k) {
    switch (k) {
        case InstanceKind::ShFactual: return "SH-Factual";
        case InstanceKind::ShCounterfactual: return "SH-Counterfactual";
        case InstanceKind::MhFactual: return "MH-Factual";
        case InstanceKind::MhCounterfactual: return "MH-Counterfactual";
    }
    return "?";
}

InstanceKind instance_kind_from_name(const std::string& name) {
    if (name == "SH-Factual") return InstanceKind::ShFactual;
    if (name == "SH-Counterfactual") return InstanceKind::ShCounterfactual;
    if (name == "MH-Factual") return InstanceKind::MhFactual;
    if (name == "MH-Counterfactual") return InstanceKind::MhCounterfactual;
    throw ConfigError("unknown instance kind: " + name);
}

bool is_multi_hop(InstanceKind k) {
    return k == InstanceKind::MhFactual || k == InstanceKind::MhCounterfactual;
}

bool is_counterfactual(InstanceKind k) {
    return k == InstanceKind::ShCounterfactual || k == InstanceKind::MhCounterfactual;
}

namespace {

json label_triples_to_json(const std::vector<LabelTriple>& ts) {
    json arr = json::array();
    for (const auto& t : ts) arr.push_back(json::array({t.head, t.relation, t.tail}));
    return arr;
}

std::vector<LabelTriple> label_triples_from_json(const json& arr) {
    std::vector<LabelTriple> ts;
    for (const auto& t : arr)
        ts.push_back({t[0].get<std::string>(), t[1].get<std::string>(), t[2].get<std::string>()});
    return ts;
}

} // namespace

void write_instances(const std::vector<QAInstance>& instances, const std::string& path) {
    JsonlWriter out(path);
    out.write(meta_record("qa-instances"));
    for (const auto& inst : instances) {
        json rec;
        rec["id"] = inst.id;
        rec["kind"] = instance_kind_name(inst.kind);
        rec["question"] = inst.question;
        if (inst.assumption) rec["assumption"] = *inst.assumption;
        if (!inst.assumption_hold.empty()) {
            rec["assumption_hold"] = label_triples_to_json(inst.assumption_hold);
            rec["assumption_retract"] = label_triples_to_json(inst.assumption_retract);
        }
        rec["answers"] = inst.answers;
        if (!inst.alt_answers.empty()) rec["alt_answers"] = inst.alt_answers;
        json passages = json::array();
        for (const auto& p : inst.passages)
            passages.push_back(json{{"text", p.text}, {"origin", p.origin}});
        rec["passages"] = passages;
        if (inst.derivation) rec["derivation"] = *inst.derivation;
        rec["provenance"] = inst.provenance;
        out.write(rec);
    }
}

std::vector<QAInstance> read_instances(const std::string& path) {
    std::vector<QAInstance> instances;
    for_each_jsonl(path, [&](const json& rec, size_t line) {
        if (is_meta_record(rec)) return;
        std::string where = path + ":" + std::to_string(line);
        QAInstance inst;
        inst.id = require_string(rec, "id", where);
        inst.kind = instance_kind_from_name(require_string(rec, "kind", where));
        inst.question = require_string(rec, "question", where);
        if (rec.contains("assumption")) inst.assumption = rec["assumption"].get<std::string>();
        if (rec.contains("assumption_hold")) {
            inst.assumption_hold = label_triples_from_json(rec["assumption_hold"]);
            inst.assumption_retract = label_triples_from_json(rec["assumption_retract"]);
        }
        if (!rec.contains("answers") || !rec["answers"].is_array() || rec["answers"].empty())
            throw SchemaError(where + ": instance needs non-empty 'answers'");
        for (const auto& a : rec["answers"]) inst.answers.push_back(a.get<std::string>());
        if (rec.contains("alt_answers"))
            for (const auto& a : rec["alt_answers"]) inst.alt_answers.push_back(a.get<std::string>());
        if (!rec.contains("passages") || !rec["passages"].is_array() || rec["passages"].empty())
            throw SchemaError(where + ": instance needs non-empty 'passages'");
        for (const auto& p : rec["passages"])
            inst.passages.push_back({p.at("text").get<std::string>(),
                                     p.value("origin", "source")});
        if (rec.contains("derivation")) inst.derivation = rec["derivation"].get<std::string>();
        if (rec.contains("provenance"))
            for (const auto& [k, v] : rec["provenance"].items())
                inst.provenance[k] = v.get<std::string>();
        instances.push_back(std::move(inst));
    });
    return instances;
}

std::vector<Exemplar> load_exemplars(const std::string& path) {
    std::vector<Exemplar> out;
    for_each_jsonl(path, [&](const json& rec, size_t line) {
        if (is_meta_record(rec)) return;
        std::string where = path + ":" + std::to_string(line);
        Exemplar ex;
        ex.input = require_string(rec, "input", where);
        ex.response = require_string(rec, "response", where);
        ex.assumption = rec.value("assumption", "");
        out.push_back(std::move(ex));
    });
    return out;
}

ProbeVerdict probe_parametric(const std::string& question,
                              const std::vector<std::string>& golds,
                              Gateway& gateway,
                              const std::vector<Exemplar>& exemplars,
                              const GenerationConfig& gen) {
    RenderContext ctx;
    ctx.question = question;
    ctx.exemplars = exemplars;
    std::string raw = gateway.complete(render_closed_book(ctx), gen);
    auto tagged = extract_tagged(raw, "answer");
    ProbeVerdict v;
    v.parametric_answer = tagged ? *tagged : trim(raw);
    v.f1 = best_f1(v.parametric_answer, golds);
    v.verdict = classify_f1(v.f1, best_em(v.parametric_answer, golds));
    return v;
}

namespace {

std::string lower_ascii(const std::string& s) {
    std::string out = s;
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return char(std::tolower(c)); });
    return out;
}

std::vector<Exemplar> first_shots(const std::vector<Exemplar>& pool, size_t n,
                                  const char* what) {
    if (pool.size() < n)
        throw ConfigError(std::string(what) + " needs " + std::to_string(n)
                          + " exemplars, got " + std::to_string(pool.size()));
    return {pool.begin(), pool.begin() + n};
}

} // namespace

bool validate_mh_question(const std::string& question, const std::string& head_label,
                          const std::vector<std::string>& other_labels) {
    std::string q = lower_ascii(question);
    if (q.find(lower_ascii(head_label)) == std::string::npos) return false;
    for (const auto& label : other_labels) {
        if (label.empty()) continue;
        if (q.find(lower_ascii(label)) != std::string::npos) return false;
    }
    return true;
}

LabelTriple triple_labels(const KnowledgeGraph& g, const Triple& t) {
    return {g.entity_label(t.head), g.relation_label(t.relation), g.entity_label(t.tail)};
}

std::string render_triples(const KnowledgeGraph& g, const std::vector<Triple>& ts) {
    std::string out;
    for (size_t i = 0; i < ts.size(); ++i) {
        if (i) out += ", ";
        out += render_label_triple(triple_labels(g, ts[i]));
    }
    return out;
}

namespace {

struct ShParts {
    std::string question, answer;
    std::optional<std::string> explanation;
    std::vector<std::string> extra_passages;
};

// One completion per attempt; question+answer tags are mandatory.
std::optional<ShParts> synth_sh_parts(const PassageDoc& doc, TemplateKind kind,
                                      Gateway& gateway) {
    RenderContext ctx;
    ctx.passage = doc.text;
    const std::string prompt = render(kind, ctx);
    for (size_t attempt = 0; attempt < kSynthMaxAttempts; ++attempt) {
        std::string raw;
        try {
            raw = gateway.complete(prompt, GenerationConfig::synth_sh());
        } catch (const Error& e) {
            std::cerr << "warning: completion failed for doc " << doc.id
                      << ": " << e.what() << "\n";
            continue;
        }
        auto q = extract_tagged(raw, "question");
        auto a = extract_tagged(raw, "answer");
        if (!q || !a || q->empty() || a->empty()) continue;
        ShParts parts;
        parts.question = *q;
        parts.answer = *a;
        parts.explanation = extract_tagged(raw, "explanation");
        parts.extra_passages = extract_all_passages(raw);
        return parts;
    }
    return std::nullopt;
}

QAInstance sh_instance(const PassageDoc& doc, InstanceKind kind, const ShParts& parts,
                       uint64_t seed, const std::string& model) {
    QAInstance inst;
    inst.kind = kind;
    inst.id = (kind == InstanceKind::ShFactual ? "shf-" : "shcf-") + doc.id;
    inst.question = parts.question;
    inst.answers = {parts.answer};
    inst.passages.push_back({doc.text, "source"});
    for (const auto& p : parts.extra_passages)
        inst.passages.push_back({p, "synthesized"});
    inst.derivation = parts.explanation;
    inst.provenance = {{"source", doc.id},
                       {"template", template_kind_name(kind == InstanceKind::ShFactual
                                                           ? TemplateKind::SynthSHFactual
                                                           : TemplateKind::SynthSHCounterfactual)},
                       {"model", model},
                       {"seed", std::to_string(seed)}};
    return inst;
}

} // namespace

std::optional<QAInstance> synth_sh_counterfactual(const PassageDoc& doc, Gateway& gateway,
                                                  uint64_t seed, const std::string& model) {
    auto parts = synth_sh_parts(doc, TemplateKind::SynthSHCounterfactual, gateway);
    if (!parts) return std::nullopt;
    return sh_instance(doc, InstanceKind::ShCounterfactual, *parts, seed, model);
}

std::optional<QAInstance> synth_sh_factual(const PassageDoc& doc, Gateway& gateway,
                                           const std::vector<Gateway*>& probe_endpoints,
                                           const std::vector<Exemplar>& probe_exemplars,
                                           uint64_t seed, const std::string& model,
                                           bool* probe_filtered) {
    if (probe_filtered) *probe_filtered = false;
    auto parts = synth_sh_parts(doc, TemplateKind::SynthSHFactual, gateway);
    if (!parts) return std::nullopt;

    // Probe before touching the remaining components: a question any base
    // endpoint already answers from parametric knowledge is discarded.
    auto shots = probe_endpoints.empty()
                     ? std::vector<Exemplar>{}
                     : first_shots(probe_exemplars, kProbeShots, "parametric probing");
    for (Gateway* probe : probe_endpoints) {
        ProbeVerdict v = probe_parametric(parts->question, {parts->answer}, *probe, shots);
        if (v.verdict == Verdict::Same) {
            if (probe_filtered) *probe_filtered = true;
            return std::nullopt;
        }
    }
    return sh_instance(doc, InstanceKind::ShFactual, *parts, seed, model);
}

namespace {

// Shared multi-hop flow. The generation chain supplies head/tail/answer;
// validation additionally excludes `extra_entity_labels` (the original
// chain's entities for counterfactual items).
struct MhSpec {
    const FactChain* generation_chain = nullptr;
    std::vector<Triple> support;
    std::vector<std::string> other_entity_labels; // all labels except head
    std::string source_id;
    InstanceKind kind = InstanceKind::MhFactual;
};

std::optional<QAInstance> synth_mh_common(const KnowledgeGraph& g, const MhSpec& spec,
                                          Gateway& gateway,
                                          const std::vector<Exemplar>& question_exemplars,
                                          uint64_t seed, const std::string& model) {
    const FactChain& chain = *spec.generation_chain;
    const std::string head_label = g.entity_label(chain.triples.front().head);
    const std::string tail_label = g.entity_label(chain.triples.back().tail);

    RenderContext qctx;
    qctx.head_label = head_label;
    qctx.tail_label = tail_label;
    qctx.fact_chain = render_triples(g, chain.triples);
    qctx.exemplars = first_shots(question_exemplars, kMhQuestionShots,
                                 "multi-hop question synthesis");
    const std::string qprompt = render(TemplateKind::SynthMHQuestion, qctx);

    std::string question;
    for (size_t attempt = 0; attempt < kSynthMaxAttempts && question.empty(); ++attempt) {
        std::string raw;
        try {
            raw = gateway.complete(qprompt, GenerationConfig::synth_mh());
        } catch (const Error& e) {
            std::cerr << "warning: question synthesis failed for " << spec.source_id
                      << ": " << e.what() << "\n";
            continue;
        }
        auto tagged = extract_tagged(raw, "question");
        std::string candidate = tagged ? *tagged : trim(raw);
        if (candidate.empty()) continue;
        if (validate_mh_question(candidate, head_label, spec.other_entity_labels))
            question = candidate;
    }
    if (question.empty()) {
        std::cerr << "warning: skipping " << spec.source_id
                  << " (no valid multi-hop question after "
                  << kSynthMaxAttempts << " attempts)\n";
        return std::nullopt;
    }

    QAInstance inst;
    inst.kind = spec.kind;
    inst.id = (spec.kind == InstanceKind::MhFactual ? "mhf-" : "mhcf-") + spec.source_id;
    inst.answers = {tail_label};

    // One supporting passage per factual triple, each told to avoid
    // conflicting with the sibling triples of this instance.
    for (size_t i = 0; i < spec.support.size(); ++i) {
        const Triple& t = spec.support[i];
        std::vector<Triple> siblings;
        for (size_t j = 0; j < spec.support.size(); ++j)
            if (j != i) siblings.push_back(spec.support[j]);
        RenderContext pctx;
        pctx.triple = render_label_triple(triple_labels(g, t));
        pctx.head_label = g.entity_label(t.head);
        pctx.tail_label = g.entity_label(t.tail);
        pctx.other_triples = render_triples(g, siblings);
        const std::string pprompt = render(TemplateKind::SynthMHPassage, pctx);
        std::optional<std::string> passage;
        for (size_t attempt = 0; attempt < kSynthMaxAttempts && !passage; ++attempt) {
            try {
                passage = extract_tagged(gateway.complete(pprompt, GenerationConfig::synth_mh()),
                                         "passage");
            } catch (const Error& e) {
                std::cerr << "warning: passage synthesis failed for " << spec.source_id
                          << ": " << e.what() << "\n";
            }
        }
        if (!passage || passage->empty()) {
            std::cerr << "warning: skipping " << spec.source_id
                      << " (no passage for triple " << i + 1 << ")\n";
            return std::nullopt;
        }
        inst.passages.push_back({*passage, "synthesized"});
    }

    RenderContext dctx;
    dctx.question = question;
    dctx.answer = tail_label;
    dctx.gold_knowledge = render_triples(g, chain.triples);
    const std::string dprompt = render(TemplateKind::SynthMHDerivation, dctx);
    std::optional<std::string> derivation;
    for (size_t attempt = 0; attempt < kSynthMaxAttempts && !derivation; ++attempt) {
        try {
            derivation = extract_tagged(gateway.complete(dprompt, GenerationConfig::synth_mh()),
                                        "explanation");
        } catch (const Error& e) {
            std::cerr << "warning: derivation synthesis failed for " << spec.source_id
                      << ": " << e.what() << "\n";
        }
    }
    if (!derivation || derivation->empty()) {
        std::cerr << "warning: skipping " << spec.source_id << " (no derivation)\n";
        return std::nullopt;
    }
    inst.derivation = derivation;
    inst.question = question;
    inst.provenance = {{"source", spec.source_id},
                       {"template", template_kind_name(TemplateKind::SynthMHQuestion)},
                       {"model", model},
                       {"seed", std::to_string(seed)}};
    return inst;
}

std::vector<std::string> non_head_labels(const KnowledgeGraph& g,
                                         const std::vector<std::string>& entity_ids,
                                         const std::string& head_id) {
    std::vector<std::string> labels;
    for (const auto& id : entity_ids)
        if (id != head_id) labels.push_back(g.entity_label(id));
    std::sort(labels.begin(), labels.end());
    labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
    return labels;
}

} // namespace

std::optional<QAInstance> synth_mh_factual(const KnowledgeGraph& g, const FactChain& chain,
                                           Gateway& gateway,
                                           const std::vector<Exemplar>& question_exemplars,
                                           uint64_t seed, const std::string& model) {
    MhSpec spec;
    spec.generation_chain = &chain;
    spec.support = chain.triples;
    spec.other_entity_labels = non_head_labels(g, chain.entity_ids(),
                                               chain.triples.front().head);
    spec.source_id = chain_id(chain);
    spec.kind = InstanceKind::MhFactual;
    return synth_mh_common(g, spec, gateway, question_exemplars, seed, model);
}

std::optional<QAInstance> synth_mh_counterfactual(const KnowledgeGraph& g,
                                                  const CounterfactualPair& pair,
                                                  Gateway& gateway,
                                                  const std::vector<Exemplar>& question_exemplars,
                                                  uint64_t seed, const std::string& model,
                                                  bool invert_assumption) {
    MhSpec spec;
    spec.generation_chain = &pair.edited;
    spec.support = triples_to_support(pair);
    std::vector<std::string> ids = pair.edited.entity_ids();
    auto orig_ids = pair.original.entity_ids();
    ids.insert(ids.end(), orig_ids.begin(), orig_ids.end());
    spec.other_entity_labels = non_head_labels(g, ids, pair.edited.triples.front().head);
    spec.source_id = pair_id(pair);
    spec.kind = InstanceKind::MhCounterfactual;

    auto inst = synth_mh_common(g, spec, gateway, question_exemplars, seed, model);
    if (!inst) return std::nullopt;

    Assumption a = verbalize_assumption(g, pair, invert_assumption);
    inst->assumption = a.text;
    inst->assumption_hold = a.hold;
    inst->assumption_retract = a.retract;
    inst->question = a.text + " " + inst->question;
    inst->alt_answers = {g.entity_label(pair.original.triples.back().tail)};
    return inst;
}

size_t SynthPlan::total() const {
    size_t n = 0;
    for (const auto& [hop, count] : factual) n += count;
    for (const auto& [hop, count] : counterfactual) n += count;
    return n;
}

SynthPlan SynthPlan::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw ParseError(path, 1, "invalid JSON");
    SynthPlan plan;
    auto read_side = [&](const char* key, std::map<size_t, size_t>& out) {
        if (!doc.contains(key)) return;
        for (const auto& [hop_str, count] : doc[key].items()) {
            size_t hop = std::stoul(hop_str);
            if (hop < 1 || hop > 4)
                throw ConfigError(path + ": plan hop " + hop_str + " outside [1,4]");
            out[hop] = count.get<size_t>();
        }
    };
    read_side("factual", plan.factual);
    read_side("counterfactual", plan.counterfactual);
    if (plan.total() == 0) throw ConfigError(path + ": plan is empty");
    return plan;
}

namespace {

template <typename T>
std::vector<const T*> sample_items(const std::vector<const T*>& pool, size_t want,
                                   uint64_t seed, SynthStats* stats) {
    if (want > pool.size() && stats) ++stats->short_supply;
    Rng rng(seed);
    auto idx = rng.sample_indices(pool.size(), std::min(want, pool.size()));
    std::vector<const T*> out;
    for (size_t i : idx) out.push_back(pool[i]);
    return out;
}

} // namespace

std::vector<QAInstance> run_synthesis(const KnowledgeGraph& g, const Corpus& corpus,
                                      const std::vector<FactChain>& chains,
                                      const std::vector<CounterfactualPair>& pairs,
                                      const SynthPlan& plan, Gateway& gateway,
                                      const std::vector<Gateway*>& probe_endpoints,
                                      const std::vector<Exemplar>& probe_exemplars,
                                      const std::vector<Exemplar>& question_exemplars,
                                      const SynthConfig& cfg, SynthStats* stats) {
    SynthStats local;
    SynthStats& st = stats ? *stats : local;
    st.requested = plan.total();

    std::vector<QAInstance> out;
    std::set<std::string> seen_questions;
    auto emit = [&](std::optional<QAInstance> inst) {
        if (!inst) {
            ++st.skipped_synthesis;
            return;
        }
        std::string key = normalize_answer(inst->question);
        if (!seen_questions.insert(key).second) {
            ++st.skipped_duplicate;
            return;
        }
        ++st.emitted;
        out.push_back(std::move(*inst));
    };

    // Single-hop: one disjoint seeded draw covers both factual and
    // counterfactual source passages.
    size_t want_f = plan.factual.count(1) ? plan.factual.at(1) : 0;
    size_t want_cf = plan.counterfactual.count(1) ? plan.counterfactual.at(1) : 0;
    size_t want_sh = want_f + want_cf;
    if (want_sh > corpus.size()) {
        ++st.short_supply;
        want_f = std::min(want_f, corpus.size());
        want_cf = std::min(want_cf, corpus.size() - want_f);
    }
    if (want_f + want_cf > 0) {
        auto docs = sample_passages(corpus, want_f + want_cf, mix_seed(cfg.seed, fnv1a("sh")));
        for (size_t i = 0; i < docs.size(); ++i) {
            if (i < want_f) {
                bool probe_filtered = false;
                auto inst = synth_sh_factual(docs[i], gateway, probe_endpoints,
                                             probe_exemplars, cfg.seed, cfg.model,
                                             &probe_filtered);
                if (!inst && probe_filtered) {
                    ++st.skipped_probe;
                    continue;
                }
                emit(std::move(inst));
            } else {
                emit(synth_sh_counterfactual(docs[i], gateway, cfg.seed, cfg.model));
            }
        }
    }

    // Multi-hop cells, one seeded sample per (side, hop).
    for (const auto& [hop, count] : plan.factual) {
        if (hop < 2) continue;
        std::vector<const FactChain*> pool;
        for (const auto& c : chains)
            if (c.hops() == hop) pool.push_back(&c);
        auto picked = sample_items(pool, count, mix_seed(cfg.seed, fnv1a("mhf" + std::to_string(hop))), &st);
        for (const FactChain* c : picked)
            emit(synth_mh_factual(g, *c, gateway, question_exemplars, cfg.seed, cfg.model));
    }
    for (const auto& [hop, count] : plan.counterfactual) {
        if (hop < 2) continue;
        std::vector<const CounterfactualPair*> pool;
        for (const auto& p : pairs)
            if (p.hops() == hop) pool.push_back(&p);
        auto picked = sample_items(pool, count, mix_seed(cfg.seed, fnv1a("mhcf" + std::to_string(hop))), &st);
        for (const CounterfactualPair* p : picked)
            emit(synth_mh_counterfactual(g, *p, gateway, question_exemplars, cfg.seed,
                                         cfg.model, cfg.invert_assumption));
    }

    std::sort(out.begin(), out.end(),
              [](const QAInstance& a, const QAInstance& b) { return a.id < b.id; });
    return out;
}

} // namespace kpref

#include "kpref/eval.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "kpref/jsonl.hpp"

namespace kpref {

std::string normalize_answer(const std::string& s) {
    std::string lowered;
    lowered.reserve(s.size());
    for (unsigned char c : s) {
        if (std::ispunct(c)) continue; // ASCII punctuation only; bytes >127 pass through
        lowered.push_back(char(std::tolower(c)));
    }
    std::istringstream ss(lowered);
    std::string tok, out;
    while (ss >> tok) {
        if (tok == "a" || tok == "an" || tok == "the") continue;
        if (!out.empty()) out += " ";
        out += tok;
    }
    return out;
}

namespace {

std::vector<std::string> tokens(const std::string& normalized) {
    std::vector<std::string> out;
    std::istringstream ss(normalized);
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    return out;
}

} // namespace

double token_f1(const std::string& pred, const std::string& gold) {
    auto p = tokens(normalize_answer(pred));
    auto g = tokens(normalize_answer(gold));
    if (p.empty() || g.empty()) return (p.empty() && g.empty()) ? 1.0 : 0.0;
    std::map<std::string, int> gc;
    for (const auto& t : g) ++gc[t];
    int common = 0;
    for (const auto& t : p) {
        auto it = gc.find(t);
        if (it != gc.end() && it->second > 0) {
            ++common;
            --it->second;
        }
    }
    if (common == 0) return 0.0;
    double precision = double(common) / double(p.size());
    double recall = double(common) / double(g.size());
    return 2.0 * precision * recall / (precision + recall);
}

bool exact_match(const std::string& pred, const std::string& gold) {
    return normalize_answer(pred) == normalize_answer(gold);
}

double best_f1(const std::string& pred, const std::vector<std::string>& golds) {
    double best = 0.0;
    for (const auto& g : golds) best = std::max(best, token_f1(pred, g));
    return best;
}

bool best_em(const std::string& pred, const std::vector<std::string>& golds) {
    for (const auto& g : golds)
        if (exact_match(pred, g)) return true;
    return false;
}

const char* verdict_name(Verdict v) {
    switch (v) {
        case Verdict::Same: return "Same";
        case Verdict::Different: return "Different";
        case Verdict::Ambiguous: return "Ambiguous";
    }
    return "?";
}

Verdict verdict_from_name(const std::string& name) {
    if (name == "Same") return Verdict::Same;
    if (name == "Different") return Verdict::Different;
    if (name == "Ambiguous") return Verdict::Ambiguous;
    throw ConfigError("unknown verdict: " + name);
}

Verdict classify_f1(double f1, bool exact) {
    if (exact || f1 > 0.8) return Verdict::Same;
    if (f1 < 0.2) return Verdict::Different;
    return Verdict::Ambiguous;
}

Verdict classify_answer(const std::string& pred, const std::vector<std::string>& golds) {
    return classify_f1(best_f1(pred, golds), best_em(pred, golds));
}

std::vector<EvalItem> read_items(const std::string& path) {
    std::vector<EvalItem> items;
    std::set<std::string> ids;
    for_each_jsonl(path, [&](const json& rec, size_t line) {
        if (is_meta_record(rec)) return;
        std::string where = path + ":" + std::to_string(line);
        EvalItem it;
        it.id = require_string(rec, "id", where);
        it.question = require_string(rec, "question", where);
        if (rec.contains("assumption") && rec["assumption"].is_string())
            it.assumption = rec["assumption"].get<std::string>();
        for (const char* key : {"contexts", "gold"})
            if (!rec.contains(key) || !rec[key].is_array())
                throw SchemaError(where + ": missing array field '" + std::string(key) + "'");
        for (const auto& c : rec["contexts"]) it.contexts.push_back(c.get<std::string>());
        for (const auto& a : rec["gold"]) it.gold.push_back(a.get<std::string>());
        if (it.gold.empty()) throw SchemaError(where + ": empty gold list");
        if (rec.contains("alt_gold"))
            for (const auto& a : rec["alt_gold"]) it.alt_gold.push_back(a.get<std::string>());
        it.subset = rec.value("subset", "");
        if (!ids.insert(it.id).second)
            throw IntegrityError(path + ": duplicate item id " + it.id);
        items.push_back(std::move(it));
    });
    return items;
}

void write_items(const std::vector<EvalItem>& items, const std::string& path) {
    JsonlWriter out(path);
    out.write(meta_record("eval-items"));
    for (const auto& it : items) {
        json rec;
        rec["id"] = it.id;
        rec["question"] = it.question;
        if (it.assumption) rec["assumption"] = *it.assumption;
        rec["contexts"] = it.contexts;
        rec["gold"] = it.gold;
        if (!it.alt_gold.empty()) rec["alt_gold"] = it.alt_gold;
        if (!it.subset.empty()) rec["subset"] = it.subset;
        out.write(rec);
    }
}

double score_ratio(double new_score, double orig_score) {
    return new_score / orig_score;
}

namespace {

struct Accum {
    size_t n = 0, n_alt = 0;
    double f1 = 0, em = 0, f1_orig = 0, em_orig = 0;

    void add(double f1_i, double em_i) {
        ++n;
        f1 += f1_i;
        em += em_i;
    }
    void add_alt(double f1_i, double em_i) {
        ++n_alt;
        f1_orig += f1_i;
        em_orig += em_i;
    }

    TrackScores finish() const {
        TrackScores t;
        t.n = n;
        if (n) {
            t.f1 = 100.0 * f1 / double(n);
            t.em = 100.0 * em / double(n);
        }
        if (n && n_alt == n) { // dual track only when every item carries it
            t.f1_orig = 100.0 * f1_orig / double(n);
            t.em_orig = 100.0 * em_orig / double(n);
            if (*t.f1_orig > 0) t.f1_ratio = score_ratio(t.f1, *t.f1_orig);
            if (*t.em_orig > 0) t.em_ratio = score_ratio(t.em, *t.em_orig);
        }
        return t;
    }
};

} // namespace

MetricsReport score_run(const std::map<std::string, std::string>& preds,
                        const std::vector<EvalItem>& items) {
    MetricsReport report;
    Accum overall;
    std::map<std::string, Accum> by_subset;
    for (const auto& item : items) {
        auto it = preds.find(item.id);
        std::string pred;
        if (it == preds.end())
            ++report.missing_predictions;
        else
            pred = it->second;
        double f1 = best_f1(pred, item.gold);
        double em = best_em(pred, item.gold) ? 1.0 : 0.0;
        overall.add(f1, em);
        if (!item.subset.empty()) by_subset[item.subset].add(f1, em);
        if (!item.alt_gold.empty()) {
            double f1o = best_f1(pred, item.alt_gold);
            double emo = best_em(pred, item.alt_gold) ? 1.0 : 0.0;
            overall.add_alt(f1o, emo);
            if (!item.subset.empty()) by_subset[item.subset].add_alt(f1o, emo);
        }
    }
    report.overall = overall.finish();
    for (const auto& [name, acc] : by_subset) report.per_subset[name] = acc.finish();
    return report;
}

MetricsReport counter_memory_report(const std::map<std::string, ProbeVerdict>& probes,
                                    const std::map<std::string, std::string>& preds,
                                    const std::vector<EvalItem>& items) {
    std::vector<const EvalItem*> subset;
    for (const auto& item : items) {
        auto it = probes.find(item.id);
        if (it == probes.end())
            throw IntegrityError("counter_memory_report: no probe verdict for item " + item.id);
        if (it->second.verdict == Verdict::Different) subset.push_back(&item);
    }

    MetricsReport report;
    Accum overall;
    std::map<std::string, Accum> by_subset;
    size_t correct = 0, incorrect = 0;
    for (const EvalItem* item : subset) {
        auto it = preds.find(item->id);
        std::string pred;
        if (it == preds.end())
            ++report.missing_predictions;
        else
            pred = it->second;
        overall.add(best_f1(pred, item->gold), best_em(pred, item->gold) ? 1.0 : 0.0);
        if (!item->subset.empty())
            by_subset[item->subset].add(best_f1(pred, item->gold),
                                        best_em(pred, item->gold) ? 1.0 : 0.0);

        Verdict vs_gold = classify_answer(pred, item->gold);
        if (vs_gold == Verdict::Same) {
            ++correct;
        } else if (vs_gold == Verdict::Different) {
            const ProbeVerdict& probe = probes.at(item->id);
            Verdict vs_param = classify_answer(pred, {probe.parametric_answer});
            if (vs_param == Verdict::Different) ++incorrect;
        }
    }
    report.overall = overall.finish();
    for (const auto& [name, acc] : by_subset) report.per_subset[name] = acc.finish();
    if (!subset.empty()) {
        report.p_update_correct = 100.0 * double(correct) / double(subset.size());
        report.p_update_incorrect = 100.0 * double(incorrect) / double(subset.size());
    }
    return report;
}

EvalMode eval_mode_from_name(const std::string& name) {
    if (name == "normal") return EvalMode::Normal;
    if (name == "assumption-in-question") return EvalMode::AssumptionInQuestion;
    if (name == "assumption-in-instruction") return EvalMode::AssumptionInInstruction;
    throw ConfigError("unknown eval mode: " + name);
}

std::map<std::string, std::string> BenchmarkRun::pred_map() const {
    return {preds.begin(), preds.end()};
}

namespace {

std::string integrated_question(const EvalItem& item) {
    if (item.assumption && !item.assumption->empty())
        return *item.assumption + " " + item.question;
    return item.question;
}

} // namespace

BenchmarkRun run_benchmark(const std::vector<EvalItem>& items, Gateway& gateway,
                           const BenchmarkConfig& cfg) {
    if (cfg.shots > cfg.exemplars.size())
        throw ConfigError("requested " + std::to_string(cfg.shots)
                          + "-shot but only " + std::to_string(cfg.exemplars.size())
                          + " exemplars are available");
    std::vector<Exemplar> shots(cfg.exemplars.begin(), cfg.exemplars.begin() + cfg.shots);

    std::vector<std::string> prompts;
    prompts.reserve(items.size());
    for (const auto& item : items) {
        RenderContext ctx;
        ctx.exemplars = shots;
        ctx.passages = item.contexts;
        switch (cfg.mode) {
            case EvalMode::Normal:
                ctx.question = integrated_question(item);
                prompts.push_back(render(TemplateKind::ContextQA, ctx));
                break;
            case EvalMode::AssumptionInQuestion:
                ctx.question = integrated_question(item);
                prompts.push_back(render(TemplateKind::ExplicitAssumptionInQuestion, ctx));
                break;
            case EvalMode::AssumptionInInstruction:
                if (!item.assumption || item.assumption->empty())
                    throw ConfigError("assumption-in-instruction mode needs a separable "
                                      "assumption; item " + item.id + " has none");
                ctx.question = item.question;
                ctx.assumption = item.assumption;
                prompts.push_back(render(TemplateKind::ExplicitAssumptionInInstruction, ctx));
                break;
        }
    }

    auto results = gateway.complete_batch(prompts, cfg.gen);
    BenchmarkRun run;
    for (size_t i = 0; i < items.size(); ++i) {
        std::string pred;
        if (!results[i].ok) {
            ++run.n_error;
        } else if (auto tagged = extract_tagged(results[i].text, "answer")) {
            pred = *tagged;
        } else {
            pred = trim(results[i].text);
            ++run.n_fallback;
        }
        run.preds.emplace_back(items[i].id, pred);
    }
    return run;
}

std::map<std::string, ProbeVerdict> probe_items(const std::vector<EvalItem>& items,
                                                Gateway& gateway,
                                                const std::vector<Exemplar>& exemplars,
                                                const GenerationConfig& gen) {
    std::vector<std::string> prompts;
    for (const auto& item : items) {
        RenderContext ctx;
        ctx.exemplars = exemplars;
        ctx.question = integrated_question(item);
        prompts.push_back(render_closed_book(ctx));
    }
    auto results = gateway.complete_batch(prompts, gen);
    std::map<std::string, ProbeVerdict> verdicts;
    for (size_t i = 0; i < items.size(); ++i) {
        ProbeVerdict v;
        std::string answer;
        if (results[i].ok) {
            auto tagged = extract_tagged(results[i].text, "answer");
            answer = tagged ? *tagged : trim(results[i].text);
        }
        v.parametric_answer = answer;
        v.f1 = best_f1(answer, items[i].gold);
        v.verdict = classify_f1(v.f1, best_em(answer, items[i].gold));
        verdicts[items[i].id] = v;
    }
    return verdicts;
}

namespace {

json track_to_json(const TrackScores& t) {
    json j;
    j["n"] = t.n;
    j["f1"] = t.f1;
    j["em"] = t.em;
    if (t.f1_orig) j["f1_orig"] = *t.f1_orig;
    if (t.em_orig) j["em_orig"] = *t.em_orig;
    if (t.f1_ratio) j["f1_ratio"] = *t.f1_ratio;
    if (t.em_ratio) j["em_ratio"] = *t.em_ratio;
    return j;
}

std::string fmt2(double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << v;
    return os.str();
}

std::string csv_row(const std::string& label, const TrackScores& t) {
    std::string row = label + "," + std::to_string(t.n) + "," + fmt2(t.f1) + "," + fmt2(t.em);
    row += "," + (t.f1_orig ? fmt2(*t.f1_orig) : "");
    row += "," + (t.em_orig ? fmt2(*t.em_orig) : "");
    row += "," + (t.f1_ratio ? fmt2(*t.f1_ratio) : "");
    row += "," + (t.em_ratio ? fmt2(*t.em_ratio) : "");
    return row;
}

} // namespace

void write_report_json(const MetricsReport& r, const std::string& path) {
    json j;
    j["overall"] = track_to_json(r.overall);
    json subsets = json::object();
    for (const auto& [name, t] : r.per_subset) subsets[name] = track_to_json(t);
    j["per_subset"] = subsets;
    j["missing_predictions"] = r.missing_predictions;
    if (r.p_update_correct) j["p_update_correct"] = *r.p_update_correct;
    if (r.p_update_incorrect) j["p_update_incorrect"] = *r.p_update_incorrect;
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path + " for writing");
    out << j.dump(2) << "\n";
}

void write_report_csv(const MetricsReport& r, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path + " for writing");
    out << "subset,n,f1,em,f1_orig,em_orig,f1_ratio,em_ratio\n";
    out << csv_row("ALL", r.overall) << "\n";
    for (const auto& [name, t] : r.per_subset) out << csv_row(name, t) << "\n";
}

void write_verdicts(const std::map<std::string, ProbeVerdict>& verdicts,
                    const std::string& path) {
    JsonlWriter out(path);
    out.write(meta_record("probe-verdicts"));
    for (const auto& [id, v] : verdicts) {
        json rec;
        rec["id"] = id;
        rec["verdict"] = verdict_name(v.verdict);
        rec["parametric_answer"] = v.parametric_answer;
        rec["f1"] = v.f1;
        out.write(rec);
    }
}

std::map<std::string, ProbeVerdict> read_verdicts(const std::string& path) {
    std::map<std::string, ProbeVerdict> verdicts;
    for_each_jsonl(path, [&](const json& rec, size_t line) {
        if (is_meta_record(rec)) return;
        std::string where = path + ":" + std::to_string(line);
        ProbeVerdict v;
        v.verdict = verdict_from_name(require_string(rec, "verdict", where));
        v.parametric_answer = rec.value("parametric_answer", "");
        v.f1 = rec.value("f1", 0.0);
        verdicts[require_string(rec, "id", where)] = v;
    });
    return verdicts;
}

void write_preds(const BenchmarkRun& run, const std::string& path) {
    JsonlWriter out(path);
    out.write(meta_record("predictions"));
    for (const auto& [id, pred] : run.preds) {
        json rec;
        rec["id"] = id;
        rec["prediction"] = pred;
        out.write(rec);
    }
}

std::map<std::string, std::string> read_preds(const std::string& path) {
    std::map<std::string, std::string> preds;
    for_each_jsonl(path, [&](const json& rec, size_t line) {
        if (is_meta_record(rec)) return;
        std::string where = path + ":" + std::to_string(line);
        preds[require_string(rec, "id", where)] = require_string(rec, "prediction", where);
    });
    return preds;
}

} // namespace kpref

// Pipeline CLI: ingest passages, mine fact chains, edit them into
// counterfactual pairs, synthesize QA instances through a chat-completion
// endpoint, build training data, and evaluate endpoints on the benchmarks.
// Every artifact gets a <path>.manifest.json sidecar; seeds make runs
// byte-reproducible (with --replay, bit-for-bit).

#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kpref/dataset.hpp"
#include "kpref/editor.hpp"
#include "kpref/eval.hpp"
#include "kpref/gateway.hpp"
#include "kpref/jsonl.hpp"
#include "kpref/kg.hpp"
#include "kpref/manifest.hpp"
#include "kpref/miner.hpp"
#include "kpref/synth.hpp"

namespace {

using namespace kpref;

struct GraphOpts {
    std::string triples, entities, relations, roles;
};

void add_graph_opts(CLI::App* cmd, GraphOpts& o) {
    cmd->add_option("--graph", o.triples, "triples TSV (head<TAB>relation<TAB>tail)")
        ->required();
    cmd->add_option("--entities", o.entities,
                    "entity JSONL; default: sibling <graph>.entities.jsonl");
    cmd->add_option("--relations", o.relations,
                    "relation JSONL; default: sibling file, else labels = ids");
    cmd->add_option("--roles", o.roles, "role config JSON (concept/relation ids)");
}

KnowledgeGraph load_graph_opts(const GraphOpts& o) {
    RoleConfig roles = o.roles.empty() ? RoleConfig{} : RoleConfig::load(o.roles);
    if (o.entities.empty() && o.relations.empty())
        return load_graph(o.triples, roles);
    if (o.entities.empty())
        throw ConfigError("--relations requires --entities");
    return load_graph(o.triples, o.entities, o.relations, roles);
}

json graph_config_json(const GraphOpts& o) {
    return json{{"graph", o.triples},
                {"entities", o.entities},
                {"relations", o.relations},
                {"roles", o.roles}};
}

struct EndpointOpts {
    std::string replay;
    std::string base_url;
    std::string model = "default";
    std::string api_key_env = "LLM_API_KEY";
    int max_in_flight = 4;
    int timeout_ms = 60000;
};

void add_endpoint_opts(CLI::App* cmd, EndpointOpts& o) {
    auto* replay = cmd->add_option("--replay", o.replay,
                                   "cassette JSONL replayed instead of a live endpoint");
    auto* base = cmd->add_option("--base-url", o.base_url,
                                 "chat-completion endpoint, e.g. http://host:port/v1");
    replay->excludes(base);
    cmd->add_option("--model", o.model, "model name sent with requests");
    cmd->add_option("--api-key-env", o.api_key_env,
                    "env var holding the API key; empty sends no auth header");
    cmd->add_option("--max-in-flight", o.max_in_flight, "request concurrency cap");
    cmd->add_option("--timeout-ms", o.timeout_ms, "per-request timeout");
}

std::unique_ptr<Gateway> make_gateway(const EndpointOpts& o) {
    if (!o.replay.empty()) return std::make_unique<ReplayGateway>(o.replay);
    if (o.base_url.empty())
        throw ConfigError("endpoint required: pass --replay or --base-url");
    EndpointConfig cfg;
    cfg.base_url = o.base_url;
    cfg.model = o.model;
    cfg.api_key_env = o.api_key_env;
    cfg.max_in_flight = o.max_in_flight;
    cfg.timeout_ms = o.timeout_ms;
    return std::make_unique<HttpGateway>(cfg);
}

json endpoint_config_json(const EndpointOpts& o) {
    // The key itself must never appear here, only the env var name.
    if (!o.replay.empty()) return json{{"replay", o.replay}};
    return json{{"base_url", o.base_url},
                {"model", o.model},
                {"api_key_env", o.api_key_env},
                {"max_in_flight", o.max_in_flight},
                {"timeout_ms", o.timeout_ms}};
}

// Probe endpoint list: JSON array of {"type":"replay","cassette":...} or
// {"type":"http","base_url":...,"model":...[,"api_key_env":...]}.
std::vector<std::unique_ptr<Gateway>> load_probe_endpoints(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw ParseError(path, 1, "invalid JSON");
    if (!doc.is_array()) throw ConfigError(path + ": expected a JSON array of endpoints");
    std::vector<std::unique_ptr<Gateway>> out;
    for (const auto& e : doc) {
        std::string type = e.value("type", "");
        if (type == "replay") {
            out.push_back(std::make_unique<ReplayGateway>(e.at("cassette").get<std::string>()));
        } else if (type == "http") {
            EndpointConfig cfg;
            cfg.base_url = e.at("base_url").get<std::string>();
            cfg.model = e.at("model").get<std::string>();
            cfg.api_key_env = e.value("api_key_env", std::string("LLM_API_KEY"));
            cfg.max_in_flight = e.value("max_in_flight", 4);
            cfg.timeout_ms = e.value("timeout_ms", 60000);
            out.push_back(std::make_unique<HttpGateway>(cfg));
        } else {
            throw ConfigError(path + ": endpoint type must be \"replay\" or \"http\"");
        }
    }
    return out;
}

void emit_manifest(const std::string& sub,
                   const std::map<std::string, std::string>& inputs, uint64_t seed,
                   const std::map<std::string, size_t>& counts, const json& config,
                   const std::vector<std::string>& outputs) {
    Manifest m;
    m.subcommand = sub;
    m.inputs = inputs;
    m.seed = seed;
    m.counts = counts;
    m.config = config;
    for (const auto& path : outputs)
        if (!path.empty()) write_manifest(m, path);
}

// ---- ingest ----

struct IngestOpts {
    std::string input, output, ner = "heuristic", ner_file;
    size_t min_entities = 0;
};

void run_ingest(const IngestOpts& o) {
    Corpus corpus = ingest_passages(o.input);
    size_t docs_in = corpus.size();
    if (o.min_entities > 0) {
        std::unique_ptr<NamedEntityRecognizer> ner;
        if (o.ner == "heuristic") {
            ner = std::make_unique<HeuristicNer>();
        } else if (o.ner == "file") {
            if (o.ner_file.empty()) throw ConfigError("--ner file requires --ner-file");
            ner = std::make_unique<ExternalJsonlNer>(o.ner_file);
        } else {
            throw ConfigError("--ner must be heuristic or file");
        }
        corpus = filter_by_entities(corpus, o.min_entities, *ner);
    }
    write_corpus(corpus, o.output);
    emit_manifest("ingest", {{"input", o.input}}, 0,
                  {{"docs_in", docs_in}, {"docs_kept", corpus.size()}},
                  json{{"min_entities", o.min_entities}, {"ner", o.ner},
                       {"ner_file", o.ner_file}},
                  {o.output});
    std::cerr << "ingest: kept " << corpus.size() << "/" << docs_in << " passages\n";
}

// ---- mine ----

struct MineOpts {
    GraphOpts graph;
    std::string output, rules = "all", concept_mode = "union";
    size_t min_hops = 2, max_hops = 4, max_children = 5;
    uint64_t seed = 0;
    bool unbounded_children = false;
};

void run_mine(const MineOpts& o) {
    KnowledgeGraph g = load_graph_opts(o.graph);
    MiningConfig cfg;
    cfg.min_hops = o.min_hops;
    cfg.max_hops = o.max_hops;
    cfg.max_children = o.unbounded_children ? kUnboundedChildren : o.max_children;
    cfg.rules = o.rules == "all" ? RuleSet::all()
              : o.rules == "none" ? RuleSet::none()
                                  : RuleSet::from_list(o.rules);
    if (o.concept_mode == "union") cfg.concept_mode = ConceptMode::Union;
    else if (o.concept_mode == "canonical") cfg.concept_mode = ConceptMode::Canonical;
    else throw ConfigError("--concept-mode must be union or canonical");
    cfg.seed = o.seed;

    std::vector<FactChain> chains = mine_chains(g, cfg);
    write_chains(chains, o.output);
    json config = graph_config_json(o.graph);
    config["min_hops"] = o.min_hops;
    config["max_hops"] = o.max_hops;
    config["max_children"] = o.unbounded_children ? json("unbounded") : json(o.max_children);
    config["rules"] = o.rules;
    config["concept_mode"] = o.concept_mode;
    emit_manifest("mine", {{"graph", o.graph.triples}}, o.seed,
                  {{"entities", g.entities.size()},
                   {"edges", g.edge_count()},
                   {"chains", chains.size()}},
                  config, {o.output});
    std::cerr << "mine: " << chains.size() << " chains\n";
}

// ---- edit ----

struct EditOpts {
    GraphOpts graph;
    std::string chains, output;
    uint64_t seed = 0;
    size_t edits = 0; // 0 = per-chain policy
};

void run_edit(const EditOpts& o) {
    KnowledgeGraph g = load_graph_opts(o.graph);
    std::vector<FactChain> chains = read_chains(o.chains);
    std::vector<CounterfactualPair> pairs;
    size_t skipped = 0;
    for (const FactChain& c : chains) {
        size_t k;
        if (o.edits > 0) {
            if (o.edits > c.hops()) {
                ++skipped;
                continue;
            }
            k = o.edits;
        } else {
            Rng krng(mix_seed(o.seed, fnv1a("k|" + chain_key(c))));
            k = choose_k(c.hops(), krng);
        }
        auto pair = edit_chain(g, c, k, o.seed);
        if (pair) pairs.push_back(std::move(*pair));
        else ++skipped;
    }
    write_pairs(pairs, o.output);
    json config = graph_config_json(o.graph);
    config["edits"] = o.edits;
    emit_manifest("edit", {{"graph", o.graph.triples}, {"chains", o.chains}}, o.seed,
                  {{"chains_in", chains.size()},
                   {"pairs", pairs.size()},
                   {"skipped", skipped}},
                  config, {o.output});
    std::cerr << "edit: " << pairs.size() << " pairs (" << skipped << " skipped)\n";
}

// ---- synth ----

struct SynthOpts {
    GraphOpts graph;
    EndpointOpts endpoint;
    std::string corpus, chains, pairs, plan, output;
    std::string probe_endpoints, probe_exemplars, question_exemplars;
    uint64_t seed = 0;
    bool invert_assumption = false;
};

void run_synth(const SynthOpts& o) {
    KnowledgeGraph g = load_graph_opts(o.graph);
    Corpus corpus = ingest_passages(o.corpus);
    std::vector<FactChain> chains =
        o.chains.empty() ? std::vector<FactChain>{} : read_chains(o.chains);
    std::vector<CounterfactualPair> pairs =
        o.pairs.empty() ? std::vector<CounterfactualPair>{} : read_pairs(o.pairs);
    SynthPlan plan = SynthPlan::load(o.plan);

    auto gateway = make_gateway(o.endpoint);
    std::vector<std::unique_ptr<Gateway>> probe_owned;
    if (!o.probe_endpoints.empty()) probe_owned = load_probe_endpoints(o.probe_endpoints);
    std::vector<Gateway*> probes;
    for (auto& p : probe_owned) probes.push_back(p.get());

    std::vector<Exemplar> probe_exemplars =
        o.probe_exemplars.empty() ? std::vector<Exemplar>{} : load_exemplars(o.probe_exemplars);
    std::vector<Exemplar> question_exemplars =
        o.question_exemplars.empty() ? std::vector<Exemplar>{}
                                     : load_exemplars(o.question_exemplars);

    SynthConfig cfg;
    cfg.seed = o.seed;
    cfg.model = o.endpoint.model;
    cfg.invert_assumption = o.invert_assumption;
    SynthStats stats;
    std::vector<QAInstance> instances =
        run_synthesis(g, corpus, chains, pairs, plan, *gateway, probes, probe_exemplars,
                      question_exemplars, cfg, &stats);
    write_instances(instances, o.output);

    json config = graph_config_json(o.graph);
    config["plan"] = o.plan;
    config["endpoint"] = endpoint_config_json(o.endpoint);
    config["invert_assumption"] = o.invert_assumption;
    config["probe_endpoints"] = o.probe_endpoints;
    emit_manifest("synth",
                  {{"graph", o.graph.triples}, {"corpus", o.corpus},
                   {"chains", o.chains}, {"pairs", o.pairs}, {"plan", o.plan}},
                  o.seed,
                  {{"requested", stats.requested},
                   {"emitted", stats.emitted},
                   {"skipped_synthesis", stats.skipped_synthesis},
                   {"skipped_probe", stats.skipped_probe},
                   {"skipped_duplicate", stats.skipped_duplicate},
                   {"short_supply", stats.short_supply}},
                  config, {o.output});
    std::cerr << "synth: " << stats.emitted << "/" << stats.requested << " instances ("
              << stats.skipped_synthesis << " synthesis, " << stats.skipped_probe
              << " probe, " << stats.skipped_duplicate << " duplicate skips)\n";
}

// ---- build ----

struct BuildOpts {
    std::string instances, noise, output, emit_eval;
    std::string derivation = "none";
    size_t noise_sh = 2, noise_mh = 3;
    bool keep_context_order = false, keep_assumption_order = false;
    uint64_t seed = 0;
};

void run_build(const BuildOpts& o) {
    std::vector<QAInstance> instances = read_instances(o.instances);
    Corpus noise = ingest_passages(o.noise);
    std::vector<std::string> pool;
    for (const auto& d : noise.docs) pool.push_back(d.text);

    AugmentConfig cfg;
    cfg.noise_single_hop = o.noise_sh;
    cfg.noise_multi_hop = o.noise_mh;
    cfg.shuffle_contexts = !o.keep_context_order;
    cfg.shuffle_assumptions = !o.keep_assumption_order;
    cfg.derivation = derivation_placement_from_name(o.derivation);
    cfg.seed = o.seed;

    std::vector<QAInstance> augmented = augment(instances, pool, cfg);
    std::vector<TrainingExample> examples = to_training_examples(augmented, cfg.derivation);
    write_training(examples, o.output);
    if (!o.emit_eval.empty()) write_items(to_eval_items(augmented), o.emit_eval);

    json config{{"noise_sh", o.noise_sh},
                {"noise_mh", o.noise_mh},
                {"shuffle_contexts", cfg.shuffle_contexts},
                {"shuffle_assumptions", cfg.shuffle_assumptions},
                {"derivation", o.derivation}};
    emit_manifest("build", {{"instances", o.instances}, {"noise", o.noise}}, o.seed,
                  {{"instances", instances.size()}, {"examples", examples.size()}},
                  config, {o.output, o.emit_eval});
    std::cerr << "build: " << examples.size() << " training examples\n";
}

// ---- merge ----

struct MergeOpts {
    std::string ours, theirs, output;
    uint64_t seed = 0;
};

void run_merge(const MergeOpts& o) {
    auto ours = read_training(o.ours);
    auto theirs = read_training(o.theirs);
    MergeStats stats;
    auto merged = merge_training(ours, theirs, o.seed, &stats);
    write_training(merged, o.output);
    emit_manifest("merge", {{"ours", o.ours}, {"theirs", o.theirs}}, o.seed,
                  {{"ours", stats.ours}, {"theirs", stats.theirs}, {"total", stats.total}},
                  json::object(), {o.output});
    std::cerr << "merge: " << stats.total << " examples\n";
}

// ---- probe ----

struct ProbeOpts {
    EndpointOpts endpoint;
    std::string items, exemplars, output;
};

void run_probe(const ProbeOpts& o) {
    std::vector<EvalItem> items = read_items(o.items);
    auto gateway = make_gateway(o.endpoint);
    std::vector<Exemplar> exemplars = load_exemplars(o.exemplars);
    if (exemplars.size() < kProbeShots)
        throw ConfigError("probing needs " + std::to_string(kProbeShots)
                          + " exemplars, got " + std::to_string(exemplars.size()));
    exemplars.resize(kProbeShots);
    auto verdicts = probe_items(items, *gateway, exemplars, GenerationConfig::infer128());
    write_verdicts(verdicts, o.output);
    size_t n_same = 0, n_diff = 0;
    for (const auto& [id, v] : verdicts) {
        if (v.verdict == Verdict::Same) ++n_same;
        if (v.verdict == Verdict::Different) ++n_diff;
    }
    emit_manifest("probe", {{"items", o.items}, {"exemplars", o.exemplars}}, 0,
                  {{"items", items.size()}, {"same", n_same}, {"different", n_diff},
                   {"ambiguous", items.size() - n_same - n_diff}},
                  json{{"endpoint", endpoint_config_json(o.endpoint)},
                       {"shots", kProbeShots}},
                  {o.output});
    std::cerr << "probe: " << n_diff << "/" << items.size()
              << " items unknown to the endpoint\n";
}

// ---- eval ----

struct EvalOpts {
    EndpointOpts endpoint;
    std::string items, exemplars, mode = "normal";
    std::string preds, report, csv;
    size_t shots = 0;
    double temperature = -1, top_p = -1;
    int max_tokens = 0;
};

void run_eval(const EvalOpts& o) {
    std::vector<EvalItem> items = read_items(o.items);
    auto gateway = make_gateway(o.endpoint);

    BenchmarkConfig cfg;
    cfg.mode = eval_mode_from_name(o.mode);
    cfg.shots = o.shots;
    if (!o.exemplars.empty()) cfg.exemplars = load_exemplars(o.exemplars);
    if (o.temperature >= 0) cfg.gen.temperature = o.temperature;
    if (o.top_p >= 0) cfg.gen.top_p = o.top_p;
    if (o.max_tokens > 0) cfg.gen.max_tokens = o.max_tokens;

    BenchmarkRun run = run_benchmark(items, *gateway, cfg);
    if (!o.preds.empty()) write_preds(run, o.preds);

    MetricsReport report = score_run(run.pred_map(), items);
    if (!o.report.empty()) write_report_json(report, o.report);
    if (!o.csv.empty()) write_report_csv(report, o.csv);

    json config{{"mode", o.mode},
                {"shots", o.shots},
                {"endpoint", endpoint_config_json(o.endpoint)},
                {"gen", json{{"temperature", cfg.gen.temperature},
                             {"top_p", cfg.gen.top_p},
                             {"max_tokens", cfg.gen.max_tokens}}}};
    emit_manifest("eval", {{"items", o.items}, {"exemplars", o.exemplars}}, 0,
                  {{"items", items.size()},
                   {"fallback", run.n_fallback},
                   {"errors", run.n_error}},
                  config, {o.preds, o.report, o.csv});
    std::cerr << "eval: n=" << report.overall.n << " F1=" << report.overall.f1
              << " EM=" << report.overall.em << "\n";
}

// ---- report ----

struct ReportOpts {
    std::string items, preds, probe_verdicts, report, csv;
};

void run_report(const ReportOpts& o) {
    std::vector<EvalItem> items = read_items(o.items);
    auto preds = read_preds(o.preds);
    MetricsReport report;
    if (o.probe_verdicts.empty()) {
        report = score_run(preds, items);
    } else {
        auto verdicts = read_verdicts(o.probe_verdicts);
        report = counter_memory_report(verdicts, preds, items);
    }
    if (!o.report.empty()) write_report_json(report, o.report);
    if (!o.csv.empty()) write_report_csv(report, o.csv);
    emit_manifest("report",
                  {{"items", o.items}, {"preds", o.preds},
                   {"probe_verdicts", o.probe_verdicts}},
                  0, {{"items", items.size()}}, json::object(), {o.report, o.csv});
    std::cerr << "report: n=" << report.overall.n << " F1=" << report.overall.f1
              << " EM=" << report.overall.em;
    if (report.p_update_correct)
        std::cerr << " P(Uc)=" << *report.p_update_correct
                  << " P(Ui)=" << *report.p_update_incorrect;
    std::cerr << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"knowledge-preference instruction data pipeline"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "0.1.0");

    IngestOpts ingest;
    auto* cmd_ingest = app.add_subcommand("ingest", "ingest and filter a passage corpus");
    cmd_ingest->add_option("--input", ingest.input, "raw passage JSONL")->required();
    cmd_ingest->add_option("--output", ingest.output, "corpus JSONL")->required();
    cmd_ingest->add_option("--min-entities", ingest.min_entities,
                           "keep passages with at least this many distinct mentions");
    cmd_ingest->add_option("--ner", ingest.ner, "recognizer: heuristic or file");
    cmd_ingest->add_option("--ner-file", ingest.ner_file,
                           "precomputed mentions JSONL for --ner file");
    cmd_ingest->callback([&] { run_ingest(ingest); });

    MineOpts mine;
    auto* cmd_mine = app.add_subcommand("mine", "mine linked fact chains from a graph");
    add_graph_opts(cmd_mine, mine.graph);
    cmd_mine->add_option("--output", mine.output, "chains JSONL")->required();
    cmd_mine->add_option("--min-hops", mine.min_hops, "minimum chain length");
    cmd_mine->add_option("--max-hops", mine.max_hops, "maximum chain length");
    cmd_mine->add_option("--max-children", mine.max_children, "BFS width cap per node");
    cmd_mine->add_flag("--unbounded-children", mine.unbounded_children,
                       "disable the BFS width cap");
    cmd_mine->add_option("--rules", mine.rules, "all, none, or e.g. 1,2,6,7a,9");
    cmd_mine->add_option("--concept-mode", mine.concept_mode, "union or canonical");
    cmd_mine->add_option("--seed", mine.seed, "width-cap sampling seed");
    cmd_mine->callback([&] { run_mine(mine); });

    EditOpts edit;
    auto* cmd_edit = app.add_subcommand("edit", "derive counterfactual pairs from chains");
    add_graph_opts(cmd_edit, edit.graph);
    cmd_edit->add_option("--chains", edit.chains, "chains JSONL")->required();
    cmd_edit->add_option("--output", edit.output, "pairs JSONL")->required();
    cmd_edit->add_option("--edits", edit.edits,
                         "force this many edits per chain (default: per-chain policy)");
    cmd_edit->add_option("--seed", edit.seed, "edit sampling seed");
    cmd_edit->callback([&] { run_edit(edit); });

    SynthOpts synth;
    auto* cmd_synth = app.add_subcommand("synth", "synthesize QA instances per plan");
    add_graph_opts(cmd_synth, synth.graph);
    add_endpoint_opts(cmd_synth, synth.endpoint);
    cmd_synth->add_option("--corpus", synth.corpus, "passage corpus JSONL")->required();
    cmd_synth->add_option("--chains", synth.chains, "chains JSONL (multi-hop factual)");
    cmd_synth->add_option("--pairs", synth.pairs, "pairs JSONL (multi-hop counterfactual)");
    cmd_synth->add_option("--plan", synth.plan, "per-hop instance count plan JSON")->required();
    cmd_synth->add_option("--output", synth.output, "instances JSONL")->required();
    cmd_synth->add_option("--probe-endpoints", synth.probe_endpoints,
                          "JSON list of endpoints for parametric filtering");
    cmd_synth->add_option("--probe-exemplars", synth.probe_exemplars,
                          "closed-book exemplar JSONL for probing");
    cmd_synth->add_option("--question-exemplars", synth.question_exemplars,
                          "exemplar JSONL for multi-hop question synthesis");
    cmd_synth->add_flag("--invert-assumption", synth.invert_assumption,
                        "swap the hold/retract lists in assumptions");
    cmd_synth->add_option("--seed", synth.seed, "sampling seed");
    cmd_synth->callback([&] { run_synth(synth); });

    BuildOpts build;
    auto* cmd_build = app.add_subcommand("build", "build training data from instances");
    cmd_build->add_option("--instances", build.instances, "instances JSONL")->required();
    cmd_build->add_option("--noise", build.noise, "noise passage corpus JSONL")->required();
    cmd_build->add_option("--output", build.output, "training JSONL")->required();
    cmd_build->add_option("--emit-eval", build.emit_eval,
                          "also write the benchmark view of these instances");
    cmd_build->add_option("--noise-sh", build.noise_sh, "noise passages per single-hop item");
    cmd_build->add_option("--noise-mh", build.noise_mh, "noise passages per multi-hop item");
    cmd_build->add_flag("--keep-context-order", build.keep_context_order,
                        "do not permute the gold passage order");
    cmd_build->add_flag("--keep-assumption-order", build.keep_assumption_order,
                        "do not reorder assumption triples");
    cmd_build->add_option("--derivation", build.derivation,
                          "none, before-answer, or after-answer");
    cmd_build->add_option("--seed", build.seed, "augmentation seed");
    cmd_build->callback([&] { run_build(build); });

    MergeOpts merge;
    auto* cmd_merge = app.add_subcommand("merge", "merge two training files, shuffled");
    cmd_merge->add_option("--ours", merge.ours, "training JSONL")->required();
    cmd_merge->add_option("--theirs", merge.theirs, "training JSONL")->required();
    cmd_merge->add_option("--output", merge.output, "merged JSONL")->required();
    cmd_merge->add_option("--seed", merge.seed, "shuffle seed");
    cmd_merge->callback([&] { run_merge(merge); });

    ProbeOpts probe;
    auto* cmd_probe = app.add_subcommand("probe", "record closed-book parametric answers");
    add_endpoint_opts(cmd_probe, probe.endpoint);
    cmd_probe->add_option("--items", probe.items, "eval items JSONL")->required();
    cmd_probe->add_option("--exemplars", probe.exemplars, "closed-book exemplar JSONL")
        ->required();
    cmd_probe->add_option("--output", probe.output, "verdicts JSONL")->required();
    cmd_probe->callback([&] { run_probe(probe); });

    EvalOpts eval;
    auto* cmd_eval = app.add_subcommand("eval", "run a benchmark against an endpoint");
    add_endpoint_opts(cmd_eval, eval.endpoint);
    cmd_eval->add_option("--items", eval.items, "eval items JSONL")->required();
    cmd_eval->add_option("--mode", eval.mode,
                         "normal, assumption-in-question, or assumption-in-instruction");
    cmd_eval->add_option("--shots", eval.shots, "in-context exemplar count");
    cmd_eval->add_option("--exemplars", eval.exemplars, "exemplar JSONL");
    cmd_eval->add_option("--preds", eval.preds, "write predictions JSONL here");
    cmd_eval->add_option("--report", eval.report, "write metrics JSON here");
    cmd_eval->add_option("--csv", eval.csv, "write metrics CSV here");
    cmd_eval->add_option("--temperature", eval.temperature, "sampling temperature override");
    cmd_eval->add_option("--top-p", eval.top_p, "nucleus sampling override");
    cmd_eval->add_option("--max-tokens", eval.max_tokens, "completion length override");
    cmd_eval->callback([&] { run_eval(eval); });

    ReportOpts report;
    auto* cmd_report = app.add_subcommand("report", "re-score stored predictions");
    cmd_report->add_option("--items", report.items, "eval items JSONL")->required();
    cmd_report->add_option("--preds", report.preds, "predictions JSONL")->required();
    cmd_report->add_option("--probe-verdicts", report.probe_verdicts,
                           "verdicts JSONL; restricts scoring to the counter-memory "
                           "subset and adds update rates");
    cmd_report->add_option("--report", report.report, "write metrics JSON here");
    cmd_report->add_option("--csv", report.csv, "write metrics CSV here");
    cmd_report->callback([&] { run_report(report); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    } catch (const Error& e) {
        std::cerr << json{{"error", e.what()}}.dump() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << json{{"error", e.what()}}.dump() << "\n";
        return 1;
    }
    return 0;
}

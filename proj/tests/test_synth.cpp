// QA-instance synthesis: single-hop parsing and probe filtering, multi-hop
// question/passage/derivation flow, plan-driven orchestration, stats.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "kpref/editor.hpp"
#include "kpref/eval.hpp"
#include "kpref/gateway.hpp"
#include "kpref/prompts.hpp"
#include "kpref/synth.hpp"
#include "test_util.hpp"

using namespace kpref;
using namespace kpref::testutil;

namespace {

// ada -works_for-> acme -hq-> lyon, plus globex -hq-> paris for edits.
KnowledgeGraph mh_graph() {
    return make_graph_labeled(
        {{"ada", "Ada Lovelace", {"person"}},
         {"acme", "Acme Corp", {"organization"}},
         {"globex", "Globex", {"organization"}},
         {"lyon", "Lyon", {"city"}},
         {"paris", "Paris", {"city"}}},
        {{"ada", "works_for", "acme"}, {"acme", "hq", "lyon"}, {"globex", "hq", "paris"}},
        {{"works_for", "employer"}, {"hq", "headquarters"}});
}

FactChain mh_chain() {
    return FactChain{{{"ada", "works_for", "acme"}, {"acme", "hq", "lyon"}}};
}

CounterfactualPair mh_pair() {
    CounterfactualPair pair;
    pair.original = mh_chain();
    pair.edited = FactChain{{{"ada", "works_for", "globex"}, {"globex", "hq", "paris"}}};
    pair.edits = {{0, {"ada", "works_for", "acme"}, {"ada", "works_for", "globex"}}};
    return pair;
}

PassageDoc doc(const std::string& id, const std::string& text) {
    return PassageDoc{id, "", text, 0};
}

Corpus corpus_of(const std::vector<PassageDoc>& docs) {
    Corpus c;
    c.docs = docs;
    for (size_t i = 0; i < docs.size(); ++i) c.by_id[docs[i].id] = i;
    return c;
}

std::string sh_prompt(const PassageDoc& d, TemplateKind kind) {
    RenderContext ctx;
    ctx.passage = d.text;
    return render(kind, ctx);
}

std::string mh_question_prompt(const KnowledgeGraph& g, const FactChain& chain,
                               const std::vector<Exemplar>& shots) {
    RenderContext ctx;
    ctx.head_label = g.entity_label(chain.triples.front().head);
    ctx.tail_label = g.entity_label(chain.triples.back().tail);
    ctx.fact_chain = render_triples(g, chain.triples);
    ctx.exemplars = shots;
    return render(TemplateKind::SynthMHQuestion, ctx);
}

std::string mh_passage_prompt(const KnowledgeGraph& g, const std::vector<Triple>& support,
                              size_t i) {
    std::vector<Triple> siblings;
    for (size_t j = 0; j < support.size(); ++j)
        if (j != i) siblings.push_back(support[j]);
    RenderContext ctx;
    ctx.triple = render_label_triple(triple_labels(g, support[i]));
    ctx.head_label = g.entity_label(support[i].head);
    ctx.tail_label = g.entity_label(support[i].tail);
    ctx.other_triples = render_triples(g, siblings);
    return render(TemplateKind::SynthMHPassage, ctx);
}

std::string mh_derivation_prompt(const KnowledgeGraph& g, const FactChain& chain,
                                 const std::string& question) {
    RenderContext ctx;
    ctx.question = question;
    ctx.answer = g.entity_label(chain.triples.back().tail);
    ctx.gold_knowledge = render_triples(g, chain.triples);
    return render(TemplateKind::SynthMHDerivation, ctx);
}

std::string probe_prompt(const std::string& question, const std::vector<Exemplar>& shots) {
    RenderContext ctx;
    ctx.question = question;
    ctx.exemplars = shots;
    return render_closed_book(ctx);
}

std::vector<Exemplar> n_exemplars(size_t n, const std::string& stem) {
    std::vector<Exemplar> out;
    for (size_t i = 0; i < n; ++i)
        out.push_back({stem + "-in-" + std::to_string(i), stem + "-out-" + std::to_string(i), ""});
    return out;
}

// Appends a record and hands back the path for chaining-free reuse.
struct Cassette {
    TempDir dir;
    std::string path;

    Cassette() : path(dir.file("tape.jsonl")) {}
    void add(const std::string& prompt, const std::string& response) {
        append_cassette_record(path, prompt, response);
    }
};

const std::vector<Exemplar> kQShots = n_exemplars(5, "q");
const std::vector<Exemplar> kPShots = n_exemplars(3, "p");

} // namespace

TEST_CASE("instance kind names round-trip and classify") {
    CHECK(std::string(instance_kind_name(InstanceKind::ShFactual)) == "SH-Factual");
    CHECK(std::string(instance_kind_name(InstanceKind::ShCounterfactual)) == "SH-Counterfactual");
    CHECK(std::string(instance_kind_name(InstanceKind::MhFactual)) == "MH-Factual");
    CHECK(std::string(instance_kind_name(InstanceKind::MhCounterfactual)) == "MH-Counterfactual");
    for (auto k : {InstanceKind::ShFactual, InstanceKind::ShCounterfactual,
                   InstanceKind::MhFactual, InstanceKind::MhCounterfactual})
        CHECK(instance_kind_from_name(instance_kind_name(k)) == k);
    CHECK_THROWS_AS(instance_kind_from_name("nope"), ConfigError);

    CHECK_FALSE(is_multi_hop(InstanceKind::ShFactual));
    CHECK(is_multi_hop(InstanceKind::MhCounterfactual));
    CHECK_FALSE(is_counterfactual(InstanceKind::MhFactual));
    CHECK(is_counterfactual(InstanceKind::ShCounterfactual));
}

TEST_CASE("multi-hop question validation: head required, other labels forbidden") {
    const std::string head = "Ada Lovelace";
    const std::vector<std::string> others = {"Acme Corp", "Lyon"};

    CHECK(validate_mh_question("Where is the employer of Ada Lovelace based?", head, others));
    CHECK_FALSE(validate_mh_question("Where is the employer based?", head, others));
    CHECK_FALSE(validate_mh_question("Where is Acme Corp based, per Ada Lovelace?", head, others));
    CHECK_FALSE(validate_mh_question("Did Ada Lovelace ever visit Lyon?", head, others));

    SUBCASE("matching is case-insensitive") {
        CHECK(validate_mh_question("where is the employer of ADA LOVELACE based?", head, others));
        CHECK_FALSE(validate_mh_question("Is Ada Lovelace near LYON?", head, others));
    }
    SUBCASE("empty forbidden labels are skipped") {
        CHECK(validate_mh_question("About Ada Lovelace?", head, {"", "Lyon"}));
    }
}

TEST_CASE("triple rendering uses display labels") {
    KnowledgeGraph g = mh_graph();
    Triple t{"ada", "works_for", "acme"};
    LabelTriple lt = triple_labels(g, t);
    CHECK(lt.head == "Ada Lovelace");
    CHECK(lt.relation == "employer");
    CHECK(lt.tail == "Acme Corp");
    CHECK(render_triples(g, mh_chain().triples) ==
          "(Ada Lovelace, employer, Acme Corp), (Acme Corp, headquarters, Lyon)");
}

TEST_CASE("single-hop counterfactual synthesis parses one completion") {
    PassageDoc d = doc("d7", "Acme Corp is led by Jane Doe since 2019.");
    Cassette tape;
    tape.add(sh_prompt(d, TemplateKind::SynthSHCounterfactual),
             "<question> Who leads Acme Corp? </question>\n"
             "<answer> John Roe </answer>\n"
             "<explanation> The passage states John Roe leads Acme Corp. </explanation>\n"
             "<passage> John Roe has led Acme Corp since 2019. </passage>\n"
             "<passage> Under John Roe, Acme Corp expanded. </passage>");
    ReplayGateway gw(tape.path);

    auto inst = synth_sh_counterfactual(d, gw, 42, "test-model");
    REQUIRE(inst.has_value());
    CHECK(inst->id == "shcf-d7");
    CHECK(inst->kind == InstanceKind::ShCounterfactual);
    CHECK(inst->question == "Who leads Acme Corp?");
    CHECK(inst->answers == std::vector<std::string>{"John Roe"});
    REQUIRE(inst->passages.size() == 3);
    CHECK(inst->passages[0].text == d.text);
    CHECK(inst->passages[0].origin == "source");
    CHECK(inst->passages[1].text == "John Roe has led Acme Corp since 2019.");
    CHECK(inst->passages[1].origin == "synthesized");
    CHECK(inst->passages[2].origin == "synthesized");
    REQUIRE(inst->derivation.has_value());
    CHECK(*inst->derivation == "The passage states John Roe leads Acme Corp.");
    CHECK_FALSE(inst->assumption.has_value());
    CHECK(inst->alt_answers.empty());
    CHECK(inst->provenance.at("source") == "d7");
    CHECK(inst->provenance.at("template") ==
          template_kind_name(TemplateKind::SynthSHCounterfactual));
    CHECK(inst->provenance.at("model") == "test-model");
    CHECK(inst->provenance.at("seed") == "42");
}

TEST_CASE("single-hop synthesis retries on missing tags, then gives up") {
    PassageDoc d = doc("d1", "The Eiffel Tower is in Paris.");
    const std::string prompt = sh_prompt(d, TemplateKind::SynthSHCounterfactual);

    SUBCASE("second attempt succeeds") {
        Cassette tape;
        tape.add(prompt, "no tags here at all");
        tape.add(prompt, "<question> Where is the Eiffel Tower? </question>"
                         "<answer> Rome </answer>");
        ReplayGateway gw(tape.path);
        auto inst = synth_sh_counterfactual(d, gw, 0, "m");
        REQUIRE(inst.has_value());
        CHECK(inst->answers == std::vector<std::string>{"Rome"});
        REQUIRE(inst->passages.size() == 1); // no synthesized extras
        CHECK_FALSE(inst->derivation.has_value());
    }
    SUBCASE("an empty mandatory tag does not count as parsed") {
        Cassette tape;
        tape.add(prompt, "<question> Where? </question><answer>  </answer>");
        tape.add(prompt, "<question> Where? </question><answer> Rome </answer>");
        ReplayGateway gw(tape.path);
        auto inst = synth_sh_counterfactual(d, gw, 0, "m");
        REQUIRE(inst.has_value());
        CHECK(inst->answers == std::vector<std::string>{"Rome"});
    }
    SUBCASE("all attempts malformed yields no instance") {
        Cassette tape;
        tape.add(prompt, "<answer> Rome </answer>"); // question tag missing, sticky
        ReplayGateway gw(tape.path);
        CHECK_FALSE(synth_sh_counterfactual(d, gw, 0, "m").has_value());
    }
    SUBCASE("gateway errors consume attempts") {
        // Tape without this prompt: every complete() throws, all attempts burn.
        Cassette tape;
        tape.add("unrelated", "x");
        ReplayGateway gw(tape.path);
        CHECK_FALSE(synth_sh_counterfactual(d, gw, 0, "m").has_value());
    }
}

TEST_CASE("single-hop factual probing discards parametrically known questions") {
    PassageDoc d = doc("d2", "Mount Kilimanjaro is the highest mountain in Africa.");
    const std::string q = "What is the highest mountain in Africa?";
    Cassette tape;
    tape.add(sh_prompt(d, TemplateKind::SynthSHFactual),
             "<question> " + q + " </question><answer> Mount Kilimanjaro </answer>");
    const std::string pprompt = probe_prompt(q, kPShots);

    SUBCASE("Same verdict from the probe endpoint filters the item") {
        Cassette probe_tape;
        probe_tape.add(pprompt, "<answer> Mount Kilimanjaro </answer>");
        ReplayGateway gw(tape.path);
        ReplayGateway probe(probe_tape.path);
        std::vector<Gateway*> probes{&probe};
        bool filtered = false;
        auto inst = synth_sh_factual(d, gw, probes, kPShots, 0, "m", &filtered);
        CHECK_FALSE(inst.has_value());
        CHECK(filtered);
    }
    SUBCASE("Different verdict keeps the item") {
        Cassette probe_tape;
        probe_tape.add(pprompt, "<answer> Mont Blanc </answer>");
        ReplayGateway gw(tape.path);
        ReplayGateway probe(probe_tape.path);
        std::vector<Gateway*> probes{&probe};
        bool filtered = true;
        auto inst = synth_sh_factual(d, gw, probes, kPShots, 0, "m", &filtered);
        REQUIRE(inst.has_value());
        CHECK_FALSE(filtered);
        CHECK(inst->id == "shf-d2");
        CHECK(inst->kind == InstanceKind::ShFactual);
        CHECK(inst->provenance.at("template") ==
              template_kind_name(TemplateKind::SynthSHFactual));
    }
    SUBCASE("any Same among several endpoints filters") {
        Cassette keep_tape, drop_tape;
        keep_tape.add(pprompt, "<answer> Mont Blanc </answer>");
        drop_tape.add(pprompt, "<answer> Mount Kilimanjaro </answer>");
        ReplayGateway gw(tape.path);
        ReplayGateway keep(keep_tape.path), drop(drop_tape.path);
        std::vector<Gateway*> probes{&keep, &drop};
        bool filtered = false;
        CHECK_FALSE(synth_sh_factual(d, gw, probes, kPShots, 0, "m", &filtered).has_value());
        CHECK(filtered);
    }
    SUBCASE("no probe endpoints, no probing, no exemplar requirement") {
        ReplayGateway gw(tape.path);
        auto inst = synth_sh_factual(d, gw, {}, {}, 0, "m");
        REQUIRE(inst.has_value());
        CHECK(inst->id == "shf-d2");
    }
    SUBCASE("probing with too few exemplars is a config error") {
        ReplayGateway gw(tape.path);
        ReplayGateway probe(tape.path);
        std::vector<Gateway*> probes{&probe};
        CHECK_THROWS_WITH_AS(
            synth_sh_factual(d, gw, probes, n_exemplars(2, "p"), 0, "m"),
            doctest::Contains("parametric probing"), ConfigError);
    }
    SUBCASE("synthesis failure reports not-probe-filtered") {
        Cassette bad;
        bad.add(sh_prompt(d, TemplateKind::SynthSHFactual), "junk");
        ReplayGateway gw(bad.path);
        bool filtered = true;
        CHECK_FALSE(synth_sh_factual(d, gw, {}, {}, 0, "m", &filtered).has_value());
        CHECK_FALSE(filtered);
    }
}

TEST_CASE("probe_parametric classifies the closed-book answer") {
    Cassette tape;
    tape.add(probe_prompt("Which planet is largest?", kPShots), "<answer> Jupiter </answer>");
    tape.add(probe_prompt("Which planet is smallest?", kPShots), "Mercury, I believe");
    ReplayGateway gw(tape.path);

    ProbeVerdict same = probe_parametric("Which planet is largest?", {"Jupiter"}, gw, kPShots);
    CHECK(same.verdict == Verdict::Same);
    CHECK(same.parametric_answer == "Jupiter");
    CHECK(same.f1 == doctest::Approx(1.0));

    // Untagged replies fall back to the trimmed raw text.
    ProbeVerdict diff = probe_parametric("Which planet is smallest?", {"Pluto"}, gw, kPShots);
    CHECK(diff.verdict == Verdict::Different);
    CHECK(diff.parametric_answer == "Mercury, I believe");
}

TEST_CASE("multi-hop factual synthesis runs question, passages, derivation") {
    KnowledgeGraph g = mh_graph();
    FactChain chain = mh_chain();
    const std::string q = "In which city is the employer of Ada Lovelace headquartered?";
    const std::string deriv = "Her employer is based there.";

    Cassette tape;
    tape.add(mh_question_prompt(g, chain, kQShots), "<question> " + q + " </question>");
    tape.add(mh_passage_prompt(g, chain.triples, 0),
             "<passage> Ada Lovelace works for Acme Corp. </passage>");
    tape.add(mh_passage_prompt(g, chain.triples, 1),
             "<passage> Acme Corp is headquartered in Lyon. </passage>");
    tape.add(mh_derivation_prompt(g, chain, q), "<explanation> " + deriv + " </explanation>");
    ReplayGateway gw(tape.path);

    auto inst = synth_mh_factual(g, chain, gw, kQShots, 9, "mh-model");
    REQUIRE(inst.has_value());
    CHECK(inst->id == "mhf-" + chain_id(chain));
    CHECK(inst->kind == InstanceKind::MhFactual);
    CHECK(inst->question == q);
    CHECK(inst->answers == std::vector<std::string>{"Lyon"});
    CHECK(inst->alt_answers.empty());
    REQUIRE(inst->passages.size() == 2);
    CHECK(inst->passages[0].text == "Ada Lovelace works for Acme Corp.");
    CHECK(inst->passages[0].origin == "synthesized");
    CHECK(inst->passages[1].text == "Acme Corp is headquartered in Lyon.");
    REQUIRE(inst->derivation.has_value());
    CHECK(*inst->derivation == deriv);
    CHECK_FALSE(inst->assumption.has_value());
    CHECK(inst->provenance.at("source") == chain_id(chain));
    CHECK(inst->provenance.at("template") ==
          template_kind_name(TemplateKind::SynthMHQuestion));
    CHECK(inst->provenance.at("model") == "mh-model");
    CHECK(inst->provenance.at("seed") == "9");
}

TEST_CASE("multi-hop question synthesis retries invalid candidates") {
    KnowledgeGraph g = mh_graph();
    FactChain chain = mh_chain();
    const std::string qprompt = mh_question_prompt(g, chain, kQShots);
    const std::string good = "Which city hosts the employer of Ada Lovelace?";

    SUBCASE("leaked tail label rejected, second attempt accepted") {
        Cassette tape;
        tape.add(qprompt, "<question> Is the employer of Ada Lovelace in Lyon? </question>");
        tape.add(qprompt, "<question> " + good + " </question>");
        tape.add(mh_passage_prompt(g, chain.triples, 0), "<passage> P1 </passage>");
        tape.add(mh_passage_prompt(g, chain.triples, 1), "<passage> P2 </passage>");
        tape.add(mh_derivation_prompt(g, chain, good), "<explanation> D </explanation>");
        ReplayGateway gw(tape.path);
        auto inst = synth_mh_factual(g, chain, gw, kQShots, 0, "m");
        REQUIRE(inst.has_value());
        CHECK(inst->question == good);
    }
    SUBCASE("untagged reply is validated as trimmed raw text") {
        Cassette tape;
        tape.add(qprompt, "  " + good + "  ");
        tape.add(mh_passage_prompt(g, chain.triples, 0), "<passage> P1 </passage>");
        tape.add(mh_passage_prompt(g, chain.triples, 1), "<passage> P2 </passage>");
        tape.add(mh_derivation_prompt(g, chain, good), "<explanation> D </explanation>");
        ReplayGateway gw(tape.path);
        auto inst = synth_mh_factual(g, chain, gw, kQShots, 0, "m");
        REQUIRE(inst.has_value());
        CHECK(inst->question == good);
    }
    SUBCASE("persistently invalid question skips the instance") {
        Cassette tape;
        tape.add(qprompt, "<question> A question with no required name. </question>");
        ReplayGateway gw(tape.path);
        CHECK_FALSE(synth_mh_factual(g, chain, gw, kQShots, 0, "m").has_value());
    }
    SUBCASE("missing passage tag skips the instance") {
        Cassette tape;
        tape.add(qprompt, "<question> " + good + " </question>");
        tape.add(mh_passage_prompt(g, chain.triples, 0), "<passage> P1 </passage>");
        tape.add(mh_passage_prompt(g, chain.triples, 1), "nothing tagged");
        ReplayGateway gw(tape.path);
        CHECK_FALSE(synth_mh_factual(g, chain, gw, kQShots, 0, "m").has_value());
    }
    SUBCASE("missing derivation tag skips the instance") {
        Cassette tape;
        tape.add(qprompt, "<question> " + good + " </question>");
        tape.add(mh_passage_prompt(g, chain.triples, 0), "<passage> P1 </passage>");
        tape.add(mh_passage_prompt(g, chain.triples, 1), "<passage> P2 </passage>");
        tape.add(mh_derivation_prompt(g, chain, good), "no explanation");
        ReplayGateway gw(tape.path);
        CHECK_FALSE(synth_mh_factual(g, chain, gw, kQShots, 0, "m").has_value());
    }
    SUBCASE("too few question exemplars is a config error") {
        Cassette tape;
        tape.add("x", "y");
        ReplayGateway gw(tape.path);
        CHECK_THROWS_WITH_AS(
            synth_mh_factual(g, chain, gw, n_exemplars(4, "q"), 0, "m"),
            doctest::Contains("multi-hop question synthesis"), ConfigError);
    }
}

TEST_CASE("multi-hop counterfactual synthesis prefixes the assumption") {
    KnowledgeGraph g = mh_graph();
    CounterfactualPair pair = mh_pair();
    // Generation runs over the edited chain; support adds original facts.
    const std::vector<Triple> support = triples_to_support(pair);
    REQUIRE(support.size() == 3);
    CHECK(support[0] == Triple{"ada", "works_for", "acme"});
    CHECK(support[1] == Triple{"acme", "hq", "lyon"});
    CHECK(support[2] == Triple{"globex", "hq", "paris"});

    const std::string q = "Which city is the employer of Ada Lovelace headquartered in?";
    Cassette tape;
    tape.add(mh_question_prompt(g, pair.edited, kQShots), "<question> " + q + " </question>");
    for (size_t i = 0; i < support.size(); ++i)
        tape.add(mh_passage_prompt(g, support, i),
                 "<passage> P" + std::to_string(i) + " </passage>");
    tape.add(mh_derivation_prompt(g, pair.edited, q), "<explanation> D </explanation>");

    SUBCASE("default assumption keeps the original facts as stated") {
        ReplayGateway gw(tape.path);
        auto inst = synth_mh_counterfactual(g, pair, gw, kQShots, 3, "m");
        REQUIRE(inst.has_value());
        CHECK(inst->id == "mhcf-" + pair_id(pair));
        CHECK(inst->kind == InstanceKind::MhCounterfactual);
        Assumption a = verbalize_assumption(g, pair, false);
        REQUIRE(inst->assumption.has_value());
        CHECK(*inst->assumption == a.text);
        CHECK(inst->question == a.text + " " + q);
        REQUIRE(inst->assumption_hold.size() == 1);
        CHECK(inst->assumption_hold[0].tail == "Acme Corp");
        REQUIRE(inst->assumption_retract.size() == 1);
        CHECK(inst->assumption_retract[0].tail == "Globex");
        CHECK(inst->answers == std::vector<std::string>{"Paris"});
        CHECK(inst->alt_answers == std::vector<std::string>{"Lyon"});
        REQUIRE(inst->passages.size() == 3);
        for (const auto& p : inst->passages) CHECK(p.origin == "synthesized");
        CHECK(inst->provenance.at("source") == pair_id(pair));
    }
    SUBCASE("inverted assumption swaps hold and retract") {
        ReplayGateway gw(tape.path);
        auto inst = synth_mh_counterfactual(g, pair, gw, kQShots, 3, "m", true);
        REQUIRE(inst.has_value());
        Assumption a = verbalize_assumption(g, pair, true);
        CHECK(*inst->assumption == a.text);
        CHECK(inst->question == a.text + " " + q);
        CHECK(inst->assumption_hold[0].tail == "Globex");
        CHECK(inst->assumption_retract[0].tail == "Acme Corp");
        // Answers are assumption-direction independent.
        CHECK(inst->answers == std::vector<std::string>{"Paris"});
        CHECK(inst->alt_answers == std::vector<std::string>{"Lyon"});
    }
    SUBCASE("question naming any chain entity of either world is rejected") {
        // "Lyon" only exists in the original chain; still forbidden.
        Cassette bad;
        bad.add(mh_question_prompt(g, pair.edited, kQShots),
                "<question> Where does Ada Lovelace work, if not Lyon? </question>");
        ReplayGateway gw(bad.path);
        CHECK_FALSE(synth_mh_counterfactual(g, pair, gw, kQShots, 3, "m").has_value());
    }
}

TEST_CASE("synthesis plan loads per-hop counts") {
    TempDir dir;
    SUBCASE("well-formed plan") {
        write_file(dir.file("plan.json"),
                   R"({"factual": {"1": 951, "3": 940, "4": 60},)"
                   R"( "counterfactual": {"1": 3400, "2": 1192, "4": 808}})");
        SynthPlan plan = SynthPlan::load(dir.file("plan.json"));
        CHECK(plan.factual.at(1) == 951);
        CHECK(plan.factual.at(3) == 940);
        CHECK(plan.factual.at(4) == 60);
        CHECK(plan.counterfactual.at(1) == 3400);
        CHECK(plan.counterfactual.at(2) == 1192);
        CHECK(plan.counterfactual.at(4) == 808);
        CHECK(plan.factual.count(2) == 0);
        CHECK(plan.total() == 7351);
    }
    SUBCASE("one-sided plan") {
        write_file(dir.file("plan.json"), R"({"counterfactual": {"2": 5}})");
        SynthPlan plan = SynthPlan::load(dir.file("plan.json"));
        CHECK(plan.factual.empty());
        CHECK(plan.total() == 5);
    }
    SUBCASE("hop outside the supported range") {
        write_file(dir.file("plan.json"), R"({"factual": {"5": 1}})");
        CHECK_THROWS_WITH_AS(SynthPlan::load(dir.file("plan.json")),
                             doctest::Contains("outside [1,4]"), ConfigError);
        write_file(dir.file("plan0.json"), R"({"factual": {"0": 1}})");
        CHECK_THROWS_AS(SynthPlan::load(dir.file("plan0.json")), ConfigError);
    }
    SUBCASE("empty plan") {
        write_file(dir.file("plan.json"), R"({"factual": {}})");
        CHECK_THROWS_WITH_AS(SynthPlan::load(dir.file("plan.json")),
                             doctest::Contains("plan is empty"), ConfigError);
    }
    SUBCASE("invalid JSON") {
        write_file(dir.file("plan.json"), "{nope");
        CHECK_THROWS_AS(SynthPlan::load(dir.file("plan.json")), ParseError);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_WITH_AS(SynthPlan::load(dir.file("absent.json")),
                             doctest::Contains("cannot open"), Error);
    }
}

namespace {

// Superset cassette: every doc answers both the factual and counterfactual
// prompt, so the test holds under any sampling order.
void add_sh_records(Cassette& tape, const PassageDoc& d, const std::string& q,
                    const std::string& a) {
    for (auto kind : {TemplateKind::SynthSHFactual, TemplateKind::SynthSHCounterfactual})
        tape.add(sh_prompt(d, kind),
                 "<question> " + q + " </question><answer> " + a + " </answer>");
}

} // namespace

TEST_CASE("run_synthesis fills single-hop cells from one seeded draw") {
    std::vector<PassageDoc> docs = {doc("a", "Passage alpha."), doc("b", "Passage beta."),
                                    doc("c", "Passage gamma."), doc("d", "Passage delta.")};
    Corpus corpus = corpus_of(docs);
    Cassette tape;
    for (const auto& d : docs) add_sh_records(tape, d, "Question about " + d.id + "?", "A-" + d.id);

    SynthPlan plan;
    plan.factual[1] = 2;
    plan.counterfactual[1] = 2;

    ReplayGateway gw(tape.path);
    SynthStats st;
    SynthConfig cfg;
    cfg.seed = 11;
    cfg.model = "m";
    auto out = run_synthesis({}, corpus, {}, {}, plan, gw, {}, {}, {}, cfg, &st);

    CHECK(st.requested == 4);
    CHECK(st.emitted == 4);
    CHECK(st.skipped_synthesis == 0);
    CHECK(st.skipped_probe == 0);
    CHECK(st.skipped_duplicate == 0);
    CHECK(st.short_supply == 0);
    REQUIRE(out.size() == 4);
    size_t n_f = 0, n_cf = 0;
    for (const auto& inst : out) {
        if (inst.kind == InstanceKind::ShFactual) ++n_f;
        if (inst.kind == InstanceKind::ShCounterfactual) ++n_cf;
    }
    CHECK(n_f == 2);
    CHECK(n_cf == 2);
    CHECK(std::is_sorted(out.begin(), out.end(),
                         [](const auto& x, const auto& y) { return x.id < y.id; }));
    // The four source docs are distinct (disjoint sampling).
    std::set<std::string> sources;
    for (const auto& inst : out) sources.insert(inst.provenance.at("source"));
    CHECK(sources.size() == 4);
}

TEST_CASE("run_synthesis deduplicates on normalized question text") {
    std::vector<PassageDoc> docs = {doc("a", "Alpha text."), doc("b", "Beta text.")};
    Corpus corpus = corpus_of(docs);
    Cassette tape;
    // Same question modulo case and punctuation: the second emit is dropped.
    add_sh_records(tape, docs[0], "Who wrote The Raven?", "Poe");
    add_sh_records(tape, docs[1], "who wrote the raven", "Poe");

    SynthPlan plan;
    plan.counterfactual[1] = 2;
    ReplayGateway gw(tape.path);
    SynthStats st;
    auto out = run_synthesis({}, corpus, {}, {}, plan, gw, {}, {}, {}, {}, &st);

    CHECK(out.size() == 1);
    CHECK(st.emitted == 1);
    CHECK(st.skipped_duplicate == 1);
}

TEST_CASE("run_synthesis clamps single-hop draws to the corpus") {
    std::vector<PassageDoc> docs = {doc("a", "One."), doc("b", "Two.")};
    Corpus corpus = corpus_of(docs);
    Cassette tape;
    for (const auto& d : docs) add_sh_records(tape, d, "Q about " + d.id + "?", "A");

    // Factual demand alone covers the corpus; counterfactual gets nothing.
    SynthPlan plan;
    plan.factual[1] = 2;
    plan.counterfactual[1] = 2;
    ReplayGateway gw(tape.path);
    SynthStats st;
    auto out = run_synthesis({}, corpus, {}, {}, plan, gw, {}, {}, {}, {}, &st);

    CHECK(st.short_supply == 1);
    REQUIRE(out.size() == 2);
    for (const auto& inst : out) CHECK(inst.kind == InstanceKind::ShFactual);
}

TEST_CASE("run_synthesis counts probe discards and synthesis failures apart") {
    std::vector<PassageDoc> docs = {doc("a", "Alpha."), doc("b", "Beta.")};
    Corpus corpus = corpus_of(docs);
    // Both docs synthesize; both probes answer exactly, so both are filtered.
    Cassette tape, probe_tape;
    for (const auto& d : docs) {
        std::string q = "Q-" + d.id + "?";
        tape.add(sh_prompt(d, TemplateKind::SynthSHFactual),
                 "<question> " + q + " </question><answer> A-" + d.id + " </answer>");
        probe_tape.add(probe_prompt(q, kPShots), "<answer> A-" + d.id + " </answer>");
    }

    SynthPlan plan;
    plan.factual[1] = 2;
    ReplayGateway gw(tape.path);
    ReplayGateway probe(probe_tape.path);
    std::vector<Gateway*> probes{&probe};
    SynthStats st;
    auto out = run_synthesis({}, corpus, {}, {}, plan, gw, probes, kPShots, {}, {}, &st);
    CHECK(out.empty());
    CHECK(st.skipped_probe == 2);
    CHECK(st.skipped_synthesis == 0);
    CHECK(st.emitted == 0);

    SUBCASE("a doc with no parsable completion counts as skipped synthesis") {
        Cassette bad;
        bad.add(sh_prompt(docs[0], TemplateKind::SynthSHFactual), "junk");
        bad.add(sh_prompt(docs[1], TemplateKind::SynthSHFactual), "junk");
        ReplayGateway gw2(bad.path);
        SynthStats st2;
        auto out2 = run_synthesis({}, corpus, {}, {}, plan, gw2, {}, {}, {}, {}, &st2);
        CHECK(out2.empty());
        CHECK(st2.skipped_synthesis == 2);
        CHECK(st2.skipped_probe == 0);
    }
}

TEST_CASE("run_synthesis fills multi-hop cells per hop count") {
    KnowledgeGraph g = mh_graph();
    FactChain chain = mh_chain();
    CounterfactualPair pair = mh_pair();
    const std::vector<Triple> support = triples_to_support(pair);

    const std::string fq = "Which city hosts the employer of Ada Lovelace?";
    const std::string cq = "Which city is the employer of Ada Lovelace headquartered in?";
    Cassette tape;
    tape.add(mh_question_prompt(g, chain, kQShots), "<question> " + fq + " </question>");
    tape.add(mh_passage_prompt(g, chain.triples, 0), "<passage> F0 </passage>");
    tape.add(mh_passage_prompt(g, chain.triples, 1), "<passage> F1 </passage>");
    tape.add(mh_derivation_prompt(g, chain, fq), "<explanation> FD </explanation>");
    tape.add(mh_question_prompt(g, pair.edited, kQShots), "<question> " + cq + " </question>");
    for (size_t i = 0; i < support.size(); ++i)
        tape.add(mh_passage_prompt(g, support, i), "<passage> C" + std::to_string(i) + " </passage>");
    tape.add(mh_derivation_prompt(g, pair.edited, cq), "<explanation> CD </explanation>");

    SynthPlan plan;
    plan.factual[2] = 1;
    plan.counterfactual[2] = 1;
    ReplayGateway gw(tape.path);
    SynthStats st;
    SynthConfig cfg;
    cfg.seed = 5;
    auto out = run_synthesis(g, {}, {chain}, {pair}, plan, gw, {}, {}, kQShots, cfg, &st);

    CHECK(st.requested == 2);
    CHECK(st.emitted == 2);
    REQUIRE(out.size() == 2);
    // Canonical order: ids ascending, "mhcf-..." sorts before "mhf-...".
    CHECK(out[0].id == "mhcf-" + pair_id(pair));
    CHECK(out[1].id == "mhf-" + chain_id(chain));

    SUBCASE("hop cells only draw matching-length sources") {
        SynthPlan p3;
        p3.factual[3] = 2; // no 3-hop chains exist
        ReplayGateway gw2(tape.path);
        SynthStats st2;
        auto out2 = run_synthesis(g, {}, {chain}, {pair}, p3, gw2, {}, {}, kQShots, {}, &st2);
        CHECK(out2.empty());
        CHECK(st2.short_supply == 1);
        CHECK(st2.emitted == 0);
    }
    SUBCASE("demand above the pool emits what exists and flags short supply") {
        SynthPlan p;
        p.factual[2] = 3;
        ReplayGateway gw2(tape.path);
        SynthStats st2;
        auto out2 = run_synthesis(g, {}, {chain}, {pair}, p, gw2, {}, {}, kQShots, {}, &st2);
        CHECK(out2.size() == 1);
        CHECK(st2.short_supply == 1);
        CHECK(st2.emitted == 1);
    }
}

TEST_CASE("run_synthesis is deterministic across fresh replays") {
    std::vector<PassageDoc> docs = {doc("a", "Alpha."), doc("b", "Beta."), doc("c", "Gamma.")};
    Corpus corpus = corpus_of(docs);
    Cassette tape;
    for (const auto& d : docs) add_sh_records(tape, d, "Q about " + d.id + "?", "A-" + d.id);
    SynthPlan plan;
    plan.factual[1] = 1;
    plan.counterfactual[1] = 2;
    SynthConfig cfg;
    cfg.seed = 77;
    cfg.model = "m";

    TempDir out_dir;
    for (int run = 0; run < 2; ++run) {
        ReplayGateway gw(tape.path);
        auto out = run_synthesis({}, corpus, {}, {}, plan, gw, {}, {}, {}, cfg, nullptr);
        write_instances(out, out_dir.file("run" + std::to_string(run) + ".jsonl"));
    }
    CHECK(read_file(out_dir.file("run0.jsonl")) == read_file(out_dir.file("run1.jsonl")));

    // A different seed draws a different factual/counterfactual split.
    ReplayGateway gw(tape.path);
    SynthConfig cfg2 = cfg;
    cfg2.seed = 78;
    auto out2 = run_synthesis({}, corpus, {}, {}, plan, gw, {}, {}, {}, cfg2, nullptr);
    write_instances(out2, out_dir.file("run2.jsonl"));
    // Not asserting inequality (seeds can collide); both runs must be well formed.
    CHECK(out2.size() == 3);
}

TEST_CASE("instances round-trip through JSONL") {
    KnowledgeGraph g = mh_graph();
    QAInstance full;
    full.id = "mhcf-p1";
    full.kind = InstanceKind::MhCounterfactual;
    full.question = "Assume X. Where is it?";
    full.assumption = "Assume X.";
    full.assumption_hold = {{"Ada Lovelace", "employer", "Acme Corp"}};
    full.assumption_retract = {{"Ada Lovelace", "employer", "Globex"}};
    full.answers = {"Paris"};
    full.alt_answers = {"Lyon"};
    full.passages = {{"P one", "synthesized"}, {"P two", "noise"}};
    full.derivation = "Because.";
    full.provenance = {{"source", "p1"}, {"model", "m"}};

    QAInstance minimal;
    minimal.id = "shf-d1";
    minimal.kind = InstanceKind::ShFactual;
    minimal.question = "Q?";
    minimal.answers = {"A"};
    minimal.passages = {{"text", "source"}};

    TempDir dir;
    const std::string path = dir.file("inst.jsonl");
    write_instances({full, minimal}, path);

    const std::string raw = read_file(path);
    CHECK(raw.find("\"_meta\"") != std::string::npos);
    CHECK(raw.find("qa-instances") != std::string::npos);

    auto back = read_instances(path);
    REQUIRE(back.size() == 2);
    CHECK(back[0].id == full.id);
    CHECK(back[0].kind == full.kind);
    CHECK(back[0].question == full.question);
    REQUIRE(back[0].assumption.has_value());
    CHECK(*back[0].assumption == "Assume X.");
    REQUIRE(back[0].assumption_hold.size() == 1);
    CHECK(back[0].assumption_hold[0].relation == "employer");
    CHECK(back[0].assumption_retract[0].tail == "Globex");
    CHECK(back[0].answers == full.answers);
    CHECK(back[0].alt_answers == full.alt_answers);
    REQUIRE(back[0].passages.size() == 2);
    CHECK(back[0].passages[1].origin == "noise");
    REQUIRE(back[0].derivation.has_value());
    CHECK(*back[0].derivation == "Because.");
    CHECK(back[0].provenance.at("source") == "p1");
    CHECK(back[1].id == minimal.id);
    CHECK_FALSE(back[1].assumption.has_value());
    CHECK(back[1].alt_answers.empty());
    CHECK_FALSE(back[1].derivation.has_value());

    SUBCASE("missing answers is a schema error") {
        write_file(dir.file("bad.jsonl"),
                   R"({"id": "x", "kind": "SH-Factual", "question": "Q?",)"
                   R"( "passages": [{"text": "t"}]})"
                   "\n");
        CHECK_THROWS_AS(read_instances(dir.file("bad.jsonl")), SchemaError);
    }
    SUBCASE("empty passages is a schema error") {
        write_file(dir.file("bad.jsonl"),
                   R"({"id": "x", "kind": "SH-Factual", "question": "Q?",)"
                   R"( "answers": ["A"], "passages": []})"
                   "\n");
        CHECK_THROWS_AS(read_instances(dir.file("bad.jsonl")), SchemaError);
    }
    SUBCASE("passage origin defaults to source") {
        write_file(dir.file("min.jsonl"),
                   R"({"id": "x", "kind": "SH-Factual", "question": "Q?",)"
                   R"( "answers": ["A"], "passages": [{"text": "t"}]})"
                   "\n");
        auto m = read_instances(dir.file("min.jsonl"));
        REQUIRE(m.size() == 1);
        CHECK(m[0].passages[0].origin == "source");
    }
}

TEST_CASE("exemplar files load input, response, optional assumption") {
    TempDir dir;
    write_file(dir.file("ex.jsonl"),
               R"({"input": "Q1", "response": "A1"})"
               "\n"
               R"({"input": "Q2", "response": "A2", "assumption": "Assume Z."})"
               "\n");
    auto ex = load_exemplars(dir.file("ex.jsonl"));
    REQUIRE(ex.size() == 2);
    CHECK(ex[0].input == "Q1");
    CHECK(ex[0].response == "A1");
    CHECK(ex[0].assumption.empty());
    CHECK(ex[1].assumption == "Assume Z.");

    write_file(dir.file("bad.jsonl"), R"({"input": "Q1"})"
                                      "\n");
    CHECK_THROWS_AS(load_exemplars(dir.file("bad.jsonl")), SchemaError);
}

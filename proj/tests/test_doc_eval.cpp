#include <doctest.h>

#include "cdm/doc_eval.hpp"

using namespace cdm;

namespace {

EvalConfig stub_config() {
    EvalConfig cfg;
    cfg.render.engine = RenderEngine::Stub;
    return cfg;
}

}  // namespace

TEST_CASE("preprocess expands newcommand aliases") {
    std::string doc =
        "\\newcommand{\\R}{\\mathbb{R}}\n"
        "\\begin{document}\n"
        "$x \\in \\R$ and \\R, also \\Rightarrow stays\n"
        "\\end{document}\n";
    auto out = preprocess_source(doc);
    CHECK(out.find("\\mathbb{R}") != std::string::npos);
    CHECK(out.find("\\R ") == std::string::npos);
    CHECK(out.find("\\Rightarrow") != std::string::npos);
    // preamble dropped
    CHECK(out.find("\\newcommand") == std::string::npos);
}

TEST_CASE("preprocess handles def, operators and argument macros") {
    std::string doc =
        "\\def\\half{\\frac{1}{2}}\n"
        "\\DeclareMathOperator{\\argmax}{argmax}\n"
        "\\newcommand{\\norm}[1]{\\left\\|#1\\right\\|}\n"
        "\\begin{document}\n"
        "$$\\half + \\argmax_x \\norm{v}$$\n"
        "\\end{document}\n";
    auto out = preprocess_source(doc);
    CHECK(out.find("\\frac{1}{2}") != std::string::npos);
    CHECK(out.find("\\operatorname{argmax}") != std::string::npos);
    CHECK(out.find("\\left\\|v\\right\\|") != std::string::npos);
}

TEST_CASE("preprocess without a document marker only strips comments") {
    std::string doc = "x + y % trailing comment\nnext";
    auto out = preprocess_source(doc);
    CHECK(out.find("comment") == std::string::npos);
    CHECK(out.find("x + y") != std::string::npos);
    CHECK(out.find("next") != std::string::npos);
}

TEST_CASE("escaped percent survives comment stripping") {
    auto out = preprocess_source("a \\% b % comment");
    CHECK(out.find("a \\% b") != std::string::npos);
    CHECK(out.find("comment") == std::string::npos);
}

TEST_CASE("iffalse blocks and comment environments are removed") {
    auto out = preprocess_source(
        "keep \\iffalse hidden \\fi \\begin{comment}gone\\end{comment} tail");
    CHECK(out.find("hidden") == std::string::npos);
    CHECK(out.find("gone") == std::string::npos);
    CHECK(out.find("keep") != std::string::npos);
    CHECK(out.find("tail") != std::string::npos);
}

TEST_CASE("nested macro expansion is bounded") {
    std::string doc = "\\newcommand{\\aa}{\\bb}\\newcommand{\\bb}{\\aa}\n$\\aa$";
    auto out = preprocess_source(doc);  // must terminate
    CHECK(!out.empty());
}

TEST_CASE("extraction strips labels and keeps document order") {
    std::string doc =
        "text\n"
        "\\begin{equation}E=mc^2\\label{e1}\\end{equation}\n"
        "more\n"
        "\\[x\\]\n"
        "$$y$$\n";
    auto formulas = extract_displayed(doc, DocDialect::LatexSource, "d");
    REQUIRE(formulas.size() == 3);
    CHECK(formulas[0].body == "E=mc^2");
    CHECK(formulas[1].body == "x");
    CHECK(formulas[2].body == "y");
    CHECK(formulas[0].line_no == 2);
    CHECK(formulas[0].doc_id == "d");
}

TEST_CASE("starred environments and tags are handled") {
    std::string doc =
        "\\begin{align*}a &= b \\tag{3}\\end{align*}\n"
        "\\begin{equation}c\\end{equation}";
    auto formulas = extract_displayed(doc, DocDialect::LatexSource);
    REQUIRE(formulas.size() == 2);
    CHECK(formulas[0].body == "a &= b");
    CHECK(formulas[1].body == "c");
}

TEST_CASE("documents with no display blocks give an empty list") {
    CHECK(extract_displayed("just $inline$ math", DocDialect::LatexSource).empty());
}

TEST_CASE("bracket dialect ignores double-dollar blocks") {
    std::string doc = "\\[a\\] $$b$$";
    auto latex = extract_displayed(doc, DocDialect::MarkdownOutput);
    CHECK(latex.size() == 2);
    auto bracket = extract_displayed(doc, DocDialect::BracketOutput);
    REQUIRE(bracket.size() == 1);
    CHECK(bracket[0].body == "a");
}

TEST_CASE("two-round matching on identical lists") {
    std::string doc = "$$a+b$$ $$c-d$$";
    auto gt = extract_displayed(doc, DocDialect::LatexSource, "g");
    auto pred = extract_displayed(doc, DocDialect::MarkdownOutput, "p");
    auto matches = match_two_round(gt, pred, MatchThresholds{});
    REQUIRE(matches.size() == 2);
    for (const auto& m : matches) {
        CHECK(m.gt.has_value());
        CHECK(m.pred.has_value());
        CHECK(m.round == 1);
        CHECK(m.distance == 0.0);
    }
}

TEST_CASE("near matches pair up and leftovers are flagged redundant") {
    DocFormula gt_a{"d", 1, "abcdefghij", "$$abcdefghij$$"};
    DocFormula pred_close{"d", 1, "abcdefghXY", ""};  // distance 0.2
    DocFormula pred_junk{"d", 2, "zzzz", ""};

    auto matches = match_two_round({gt_a}, {pred_close, pred_junk},
                                   MatchThresholds{});
    REQUIRE(matches.size() == 2);
    CHECK(matches[0].gt.has_value());
    REQUIRE(matches[0].pred.has_value());
    CHECK(matches[0].pred->body == "abcdefghXY");
    CHECK(matches[0].distance == doctest::Approx(0.2));
    CHECK(!matches[1].gt.has_value());
    CHECK(matches[1].pred->body == "zzzz");
}

TEST_CASE("distances above both thresholds leave both sides unmatched") {
    DocFormula gt_a{"d", 1, "aaaaaaaaaa", ""};
    DocFormula pred_z{"d", 1, "zzzzzzzzzz", ""};
    auto matches = match_two_round({gt_a}, {pred_z}, MatchThresholds{});
    REQUIRE(matches.size() == 2);
    CHECK(matches[0].gt.has_value());
    CHECK(!matches[0].pred.has_value());
    CHECK(matches[0].round == 0);
    CHECK(!matches[1].gt.has_value());
    CHECK(matches[1].pred.has_value());
}

TEST_CASE("second round rescues mid-distance pairs") {
    DocFormula gt_a{"d", 1, "aaaaaaaaaa", ""};
    DocFormula pred_half{"d", 1, "aaaaazzzzz", ""};  // distance 0.5
    MatchThresholds th;
    auto matches = match_two_round({gt_a}, {pred_half}, th);
    REQUIRE(matches.size() == 1);
    CHECK(matches[0].round == 2);

    // raising round1 turns it into a first-round match
    th.round1 = 0.6;
    matches = match_two_round({gt_a}, {pred_half}, th);
    CHECK(matches[0].round == 1);
}

TEST_CASE("threshold monotonicity never loses matches") {
    std::vector<DocFormula> gt, pred;
    const char* bodies[] = {"aaaaaaaaaa", "bbbbbbbbbb", "cccccccccc"};
    const char* preds[] = {"aaaaaaazzz", "bbbzzzzzzz", "ccccczzzzz"};
    for (int i = 0; i < 3; ++i) {
        gt.push_back({"d", i, bodies[i], ""});
        pred.push_back({"d", i, preds[i], ""});
    }
    auto count_matched = [](const std::vector<DocMatch>& ms) {
        int n = 0;
        for (const auto& m : ms)
            if (m.gt && m.pred) ++n;
        return n;
    };
    MatchThresholds lo{0.2, 0.4};
    MatchThresholds hi{0.4, 0.8};
    CHECK(count_matched(match_two_round(gt, pred, lo)) <=
          count_matched(match_two_round(gt, pred, hi)));
}

TEST_CASE("matching is injective") {
    std::vector<DocFormula> gt = {{"d", 1, "aaaa", ""}, {"d", 2, "aaab", ""}};
    std::vector<DocFormula> pred = {{"d", 1, "aaaa", ""}};
    auto matches = match_two_round(gt, pred, MatchThresholds{});
    int used = 0;
    for (const auto& m : matches)
        if (m.gt && m.pred) ++used;
    CHECK(used == 1);
}

TEST_CASE("document evaluation end to end") {
    auto cfg = stub_config();
    std::string gt_doc =
        "\\begin{document}\n"
        "\\begin{equation}a+b\\end{equation}\n"
        "\\[c-d\\]\n"
        "$$e^2$$\n"
        "\\end{document}\n";
    std::string pred_doc = "$$a+b$$\n\\[c-d\\]\n$$e^2$$\n";
    auto result = evaluate_document(gt_doc, pred_doc,
                                    DocDialect::MarkdownOutput, cfg);
    REQUIRE(result.records.size() == 3);
    for (const auto& r : result.records) CHECK(r.cdm.f1 == 1.0);
    CHECK(result.summary.exprate_at_cdm == 1.0);
}

TEST_CASE("dropped formulas are Missing, extras are Redundant") {
    auto cfg = stub_config();
    std::string gt_doc = "$$a+b$$\n$$c-d$$\n$$x^2$$\n";
    std::string pred_doc = "$$a+b$$\n$$q \\cdot w$$\n";
    auto result =
        evaluate_document(gt_doc, pred_doc, DocDialect::MarkdownOutput, cfg);
    // 3 gt records + 1 redundant
    REQUIRE(result.records.size() == 4);
    CHECK(result.records[0].cdm.f1 == 1.0);
    CHECK(*result.records[1].cdm.failure == "Missing");
    CHECK(result.records[1].cdm.fn > 0);
    CHECK(*result.records[2].cdm.failure == "Missing");
    CHECK(*result.records[3].cdm.failure == "Redundant");
    CHECK(result.records[3].cdm.fp > 0);
    CHECK(result.summary.mean_cdm == doctest::Approx(0.25));
}

TEST_CASE("output without delimiters is unextractable and goes Missing") {
    auto cfg = stub_config();
    std::string gt_doc = "$$a+b$$\n";
    std::string pred_doc = "a+b\n";  // no math delimiters at all
    auto result =
        evaluate_document(gt_doc, pred_doc, DocDialect::MarkdownOutput, cfg);
    REQUIRE(result.records.size() == 1);
    CHECK(result.records[0].cdm.f1 == 0.0);
    CHECK(*result.records[0].cdm.failure == "Missing");
}

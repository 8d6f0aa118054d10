#include "cdm/doc_eval.hpp"

#include <algorithm>
#include <cctype>
#include <limits>
#include <map>
#include <regex>
#include <sstream>

#include "cdm/errors.hpp"

namespace cdm {

namespace {

// ---------------------------------------------------------------------------
// comment stripping and macro expansion
// ---------------------------------------------------------------------------

// erase every open..close span, leaving unterminated opens in place
std::string remove_spans(std::string text, const std::string& open,
                         const std::string& close) {
    std::size_t pos = 0;
    while ((pos = text.find(open, pos)) != std::string::npos) {
        std::size_t end = text.find(close, pos + open.size());
        if (end == std::string::npos) break;
        text.erase(pos, end + close.size() - pos);
    }
    return text;
}

std::string strip_comments(const std::string& doc) {
    std::string out;
    out.reserve(doc.size());
    bool in_comment = false;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        char c = doc[i];
        if (in_comment) {
            if (c == '\n') {
                in_comment = false;
                out += c;
            }
            continue;
        }
        if (c == '%') {
            // escaped \% stays; count preceding backslashes
            std::size_t backslashes = 0;
            while (backslashes < i && doc[i - 1 - backslashes] == '\\')
                ++backslashes;
            if (backslashes % 2 == 1) {
                out += c;
                continue;
            }
            in_comment = true;
            continue;
        }
        out += c;
    }
    out = remove_spans(std::move(out), "\\iffalse", "\\fi");
    return remove_spans(std::move(out), "\\begin{comment}", "\\end{comment}");
}

// reads a {...} group starting at pos (which must point at '{'); returns
// the content and advances pos past the closing brace
bool read_group(const std::string& s, std::size_t& pos, std::string& content) {
    if (pos >= s.size() || s[pos] != '{') return false;
    int depth = 0;
    std::size_t start = pos + 1;
    for (std::size_t i = pos; i < s.size(); ++i) {
        if (s[i] == '{') ++depth;
        if (s[i] == '}') {
            if (--depth == 0) {
                content = s.substr(start, i - start);
                pos = i + 1;
                return true;
            }
        }
    }
    return false;
}

void skip_spaces(const std::string& s, std::size_t& pos) {
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos])))
        ++pos;
}

struct Macro {
    int nargs = 0;
    std::string body;
};

bool is_cmd_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

// collects \newcommand / \renewcommand / \def / \DeclareMathOperator(*) /
// \DeclareRobustCommand definitions; malformed ones are skipped
std::map<std::string, Macro> collect_macros(const std::string& doc) {
    std::map<std::string, Macro> macros;
    static const std::regex intro(
        R"(\\(newcommand|renewcommand|DeclareRobustCommand|DeclareMathOperator\*?|def)\b)");

    for (auto it = std::sregex_iterator(doc.begin(), doc.end(), intro);
         it != std::sregex_iterator(); ++it) {
        std::string kind = (*it)[1].str();
        std::size_t pos = static_cast<std::size_t>(it->position()) + it->length();
        skip_spaces(doc, pos);

        std::string name;
        if (kind == "def") {
            if (pos >= doc.size() || doc[pos] != '\\') continue;
            std::size_t start = pos++;
            while (pos < doc.size() && is_cmd_char(doc[pos])) ++pos;
            name = doc.substr(start, pos - start);
            // parameter text (#1#2...) between name and body
            skip_spaces(doc, pos);
            int nargs = 0;
            while (pos + 1 < doc.size() && doc[pos] == '#' &&
                   std::isdigit(static_cast<unsigned char>(doc[pos + 1]))) {
                ++nargs;
                pos += 2;
                skip_spaces(doc, pos);
            }
            std::string body;
            if (!read_group(doc, pos, body)) continue;
            macros[name] = {nargs, body};
            continue;
        }

        // braced or bare \name
        if (pos < doc.size() && doc[pos] == '{') {
            std::string inner;
            if (!read_group(doc, pos, inner)) continue;
            name = inner;
        } else if (pos < doc.size() && doc[pos] == '\\') {
            std::size_t start = pos++;
            while (pos < doc.size() && is_cmd_char(doc[pos])) ++pos;
            name = doc.substr(start, pos - start);
        } else {
            continue;
        }
        if (name.empty() || name[0] != '\\') continue;

        skip_spaces(doc, pos);
        int nargs = 0;
        if (pos < doc.size() && doc[pos] == '[') {
            std::size_t close = doc.find(']', pos);
            if (close == std::string::npos) continue;
            try {
                nargs = std::stoi(doc.substr(pos + 1, close - pos - 1));
            } catch (...) {
                continue;
            }
            pos = close + 1;
            skip_spaces(doc, pos);
            // skip a default-value bracket for optional-arg macros
            if (pos < doc.size() && doc[pos] == '[') {
                close = doc.find(']', pos);
                if (close == std::string::npos) continue;
                pos = close + 1;
                skip_spaces(doc, pos);
            }
        }
        std::string body;
        if (!read_group(doc, pos, body)) continue;

        if (kind == "DeclareMathOperator")
            body = "\\operatorname{" + body + "}";
        else if (kind == "DeclareMathOperator*")
            body = "\\operatorname*{" + body + "}";
        macros[name] = {nargs, body};
    }
    return macros;
}

std::string expand_once(const std::string& doc,
                        const std::map<std::string, Macro>& macros,
                        bool& changed) {
    std::string out;
    out.reserve(doc.size());
    std::size_t i = 0;
    while (i < doc.size()) {
        if (doc[i] != '\\') {
            out += doc[i++];
            continue;
        }
        std::size_t start = i++;
        while (i < doc.size() && is_cmd_char(doc[i])) ++i;
        std::string name = doc.substr(start, i - start);
        auto it = macros.find(name);
        if (it == macros.end() || name.size() == 1) {
            out += name;
            continue;
        }
        std::vector<std::string> args;
        std::size_t pos = i;
        bool ok = true;
        for (int a = 0; a < it->second.nargs; ++a) {
            skip_spaces(doc, pos);
            std::string content;
            if (!read_group(doc, pos, content)) {
                ok = false;
                break;
            }
            args.push_back(content);
        }
        if (!ok) {
            out += name;  // malformed use: left unexpanded
            continue;
        }
        std::string body = it->second.body;
        std::string substituted;
        for (std::size_t b = 0; b < body.size(); ++b) {
            if (body[b] == '#' && b + 1 < body.size() &&
                std::isdigit(static_cast<unsigned char>(body[b + 1]))) {
                int idx = body[b + 1] - '1';
                if (idx >= 0 && idx < static_cast<int>(args.size()))
                    substituted += args[idx];
                ++b;
            } else {
                substituted += body[b];
            }
        }
        out += substituted;
        // keep a separator when the body ends in a command name and a letter
        // follows, so the expansion re-lexes identically
        if (pos < doc.size() && is_cmd_char(doc[pos])) {
            std::size_t tail = substituted.find_last_of('\\');
            if (tail != std::string::npos && tail + 1 < substituted.size()) {
                bool all_letters = true;
                for (std::size_t k = tail + 1; k < substituted.size(); ++k)
                    all_letters &= is_cmd_char(substituted[k]);
                if (all_letters) out += ' ';
            }
        }
        i = pos;
        changed = true;
    }
    return out;
}

// ---------------------------------------------------------------------------
// displayed-formula extraction
// ---------------------------------------------------------------------------

struct RawMatch {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::string body;
};

bool displayed_env_name(const std::string& name) {
    std::string base = name;
    if (!base.empty() && base.back() == '*') base.pop_back();
    return base == "equation" || base == "align" || base == "gather" ||
           base == "displaymath" || base == "eqnarray" || base == "multline";
}

// single left-to-right scan over the delimiters; a block opened first
// swallows anything nested inside it
std::vector<RawMatch> scan_blocks(const std::string& doc, bool with_dollars) {
    std::vector<RawMatch> out;
    std::size_t i = 0;
    while (i < doc.size()) {
        if (with_dollars && doc.compare(i, 2, "$$") == 0) {
            std::size_t end = doc.find("$$", i + 2);
            if (end == std::string::npos) break;
            out.push_back({i, end + 2, doc.substr(i + 2, end - i - 2)});
            i = end + 2;
            continue;
        }
        if (doc.compare(i, 2, "\\[") == 0) {
            std::size_t end = doc.find("\\]", i + 2);
            if (end == std::string::npos) {
                i += 2;
                continue;
            }
            out.push_back({i, end + 2, doc.substr(i + 2, end - i - 2)});
            i = end + 2;
            continue;
        }
        if (doc.compare(i, 7, "\\begin{") == 0) {
            std::size_t name_end = doc.find('}', i + 7);
            if (name_end == std::string::npos) {
                i += 7;
                continue;
            }
            std::string name = doc.substr(i + 7, name_end - i - 7);
            if (!displayed_env_name(name)) {
                i = name_end + 1;
                continue;
            }
            std::string closer = "\\end{" + name + "}";
            std::size_t end = doc.find(closer, name_end + 1);
            if (end == std::string::npos) {
                i = name_end + 1;
                continue;
            }
            out.push_back({i, end + closer.size(),
                           doc.substr(name_end + 1, end - name_end - 1)});
            i = end + closer.size();
            continue;
        }
        ++i;
    }
    return out;
}

std::string strip_formula_body(std::string body) {
    static const std::regex label(R"(\\label\{[^}]*\})");
    static const std::regex tag(R"(\\tag\*?\{[^}]*\})");
    static const std::regex nonumber(R"(\\(nonumber|notag)\b)");
    body = std::regex_replace(body, label, "");
    body = std::regex_replace(body, tag, "");
    body = std::regex_replace(body, nonumber, "");
    // trim
    auto first = body.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return "";
    auto last = body.find_last_not_of(" \t\r\n");
    return body.substr(first, last - first + 1);
}

}  // namespace

std::string preprocess_source(const std::string& doc) {
    std::string text = strip_comments(doc);
    auto macros = collect_macros(text);
    for (int iteration = 0; iteration < 3; ++iteration) {
        bool changed = false;
        text = expand_once(text, macros, changed);
        if (!changed) break;
    }
    auto begin_doc = text.find("\\begin{document}");
    if (begin_doc != std::string::npos)
        text = text.substr(begin_doc + std::string("\\begin{document}").size());
    return text;
}

std::vector<DocFormula> extract_displayed(const std::string& doc,
                                          DocDialect dialect,
                                          const std::string& doc_id) {
    auto raw = scan_blocks(doc, dialect != DocDialect::BracketOutput);

    std::vector<DocFormula> out;
    for (const auto& m : raw) {
        std::string body = strip_formula_body(m.body);
        if (body.empty()) continue;
        DocFormula f;
        f.doc_id = doc_id;
        f.line_no = 1 + static_cast<int>(
                            std::count(doc.begin(), doc.begin() + m.begin, '\n'));
        f.body = std::move(body);
        f.raw = doc.substr(m.begin, m.end - m.begin);
        out.push_back(std::move(f));
    }
    return out;
}

namespace {

std::string collapse_whitespace(const std::string& s) {
    std::string out;
    bool in_space = true;
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!in_space) out += ' ';
            in_space = true;
        } else {
            out += c;
            in_space = false;
        }
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

}  // namespace

double doc_match_distance(const std::string& a, const std::string& b) {
    return edit_distance_chars(collapse_whitespace(a), collapse_whitespace(b));
}

std::vector<DocMatch> match_two_round(const std::vector<DocFormula>& gt,
                                      const std::vector<DocFormula>& pred,
                                      const MatchThresholds& thresholds) {
    std::vector<DocMatch> matches(gt.size());
    std::vector<bool> pred_used(pred.size(), false);
    std::vector<bool> gt_matched(gt.size(), false);

    std::vector<std::string> gt_text(gt.size()), pred_text(pred.size());
    for (std::size_t i = 0; i < gt.size(); ++i)
        gt_text[i] = collapse_whitespace(gt[i].body);
    for (std::size_t j = 0; j < pred.size(); ++j)
        pred_text[j] = collapse_whitespace(pred[j].body);

    auto run_round = [&](double threshold, int round) {
        for (std::size_t i = 0; i < gt.size(); ++i) {
            if (gt_matched[i]) continue;
            double best = std::numeric_limits<double>::infinity();
            std::size_t best_j = pred.size();
            for (std::size_t j = 0; j < pred.size(); ++j) {
                if (pred_used[j]) continue;
                // the length gap lower-bounds the distance; candidates that
                // cannot clear the threshold are not worth computing
                double na = static_cast<double>(gt_text[i].size());
                double nb = static_cast<double>(pred_text[j].size());
                double bound = std::abs(na - nb) / std::max({na, nb, 1.0});
                if (bound > threshold) continue;
                double d = edit_distance_chars(gt_text[i], pred_text[j]);
                if (d < best) {
                    best = d;
                    best_j = j;
                }
            }
            if (best_j < pred.size() && best <= threshold) {
                gt_matched[i] = true;
                pred_used[best_j] = true;
                matches[i] = {gt[i], pred[best_j], best, round};
            }
        }
    };
    run_round(thresholds.round1, 1);
    run_round(thresholds.round2, 2);

    for (std::size_t i = 0; i < gt.size(); ++i)
        if (!gt_matched[i]) matches[i] = {gt[i], std::nullopt, 1.0, 0};

    for (std::size_t j = 0; j < pred.size(); ++j)
        if (!pred_used[j])
            matches.push_back({std::nullopt, pred[j], 1.0, 0});
    return matches;
}

DocEvalResult evaluate_document(const std::string& gt_source,
                                const std::string& pred_output,
                                DocDialect pred_dialect, const EvalConfig& cfg,
                                const MatchThresholds& thresholds,
                                const std::string& doc_id) {
    auto gt_formulas = extract_displayed(preprocess_source(gt_source),
                                         DocDialect::LatexSource, doc_id);
    auto pred_formulas = extract_displayed(pred_output, pred_dialect, doc_id);
    return evaluate_formulas(gt_formulas, pred_formulas, cfg, thresholds, doc_id);
}

DocEvalResult evaluate_formulas(const std::vector<DocFormula>& gt,
                                const std::vector<DocFormula>& pred,
                                const EvalConfig& cfg,
                                const MatchThresholds& thresholds,
                                const std::string& doc_id) {
    DocEvalResult result;
    result.matches = match_two_round(gt, pred, thresholds);

    auto glyph_count = [](const std::string& formula) -> long {
        try {
            return tokenize(formula).colorable_count;
        } catch (const Error&) {
            return 1;
        }
    };

    int gt_index = 0, redundant_index = 0;
    for (std::size_t k = 0; k < result.matches.size(); ++k) {
        const auto& m = result.matches[k];
        if (m.gt && m.pred) {
            auto rec = evaluate_pair(m.gt->body, m.pred->body, cfg,
                                     doc_id + "#" + std::to_string(gt_index++));
            result.records.push_back(std::move(rec));
            if (m.round == 2) result.unmatched_review.push_back(k);
        } else if (m.gt) {
            EvalRecord rec;
            rec.id = doc_id + "#" + std::to_string(gt_index++);
            rec.gt = m.gt->body;
            rec.cdm.tp = 0;
            rec.cdm.fn = std::max(1L, glyph_count(m.gt->body));
            rec.cdm.f1 = 0.0;
            rec.cdm.failure = "Missing";
            result.records.push_back(std::move(rec));
            result.unmatched_review.push_back(k);
        } else if (m.pred) {
            EvalRecord rec;
            rec.id = doc_id + "#redundant" + std::to_string(redundant_index++);
            rec.pred = m.pred->body;
            rec.cdm.tp = 0;
            rec.cdm.fp = std::max(1L, glyph_count(m.pred->body));
            rec.cdm.f1 = 0.0;
            rec.cdm.failure = "Redundant";
            result.records.push_back(std::move(rec));
        }
    }
    if (!result.records.empty()) result.summary = summarize(result.records);
    return result;
}

}  // namespace cdm

#include "cdm/token.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <optional>
#include <sstream>
#include <unordered_set>

#include "cdm/errors.hpp"

namespace cdm {

namespace {

bool is_letter(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

const std::unordered_set<std::string>& size_prefixes() {
    static const std::unordered_set<std::string> s = {
        "\\left",  "\\right", "\\big",   "\\Big",   "\\bigg",  "\\Bigg",
        "\\bigl",  "\\bigr",  "\\bigm",  "\\Bigl",  "\\Bigr",  "\\Bigm",
        "\\biggl", "\\biggr", "\\biggm", "\\Biggl", "\\Biggr", "\\Biggm",
    };
    return s;
}

const std::unordered_set<std::string>& delimiter_texts() {
    static const std::unordered_set<std::string> s = {
        "(",         ")",        "[",       "]",       "/",        "|",
        "<",         ">",        ".",       "\\{",     "\\}",      "\\|",
        "\\langle",  "\\rangle", "\\lceil", "\\rceil", "\\lfloor", "\\rfloor",
        "\\vert",    "\\Vert",   "\\lvert", "\\rvert", "\\lbrace", "\\rbrace",
        "\\lbrack",  "\\rbrack", "\\backslash",
        "\\uparrow", "\\downarrow", "\\updownarrow",
        "\\Uparrow", "\\Downarrow", "\\Updownarrow",
    };
    return s;
}

// commands taking brace-group arguments that themselves draw something
// (fraction bar, radical, accent, ...). value = argument count.
const std::unordered_map<std::string, int>& glyph_arg_commands() {
    static const std::unordered_map<std::string, int> s = {
        {"\\frac", 2},      {"\\dfrac", 2},     {"\\tfrac", 2},
        {"\\cfrac", 2},     {"\\binom", 2},     {"\\dbinom", 2},
        {"\\tbinom", 2},    {"\\stackrel", 2},  {"\\overset", 2},
        {"\\underset", 2},  {"\\sqrt", 1},      {"\\overline", 1},
        {"\\underline", 1}, {"\\widehat", 1},   {"\\hat", 1},
        {"\\widetilde", 1}, {"\\tilde", 1},     {"\\bar", 1},
        {"\\vec", 1},       {"\\dot", 1},       {"\\ddot", 1},
        {"\\dddot", 1},     {"\\breve", 1},     {"\\check", 1},
        {"\\acute", 1},     {"\\grave", 1},     {"\\mathring", 1},
        {"\\overbrace", 1}, {"\\underbrace", 1},{"\\boxed", 1},
        {"\\overrightarrow", 1}, {"\\overleftarrow", 1},
        {"\\xrightarrow", 1},    {"\\xleftarrow", 1},
    };
    return s;
}

bool takes_optional_arg(const std::string& name) {
    return name == "\\sqrt" || name == "\\xrightarrow" || name == "\\xleftarrow";
}

// style/font switches: the wrapper typesets nothing by itself, its group
// content is tokenized per character
const std::unordered_set<std::string>& style_commands() {
    static const std::unordered_set<std::string> s = {
        "\\mathrm",   "\\mathbf",  "\\mathit",   "\\mathsf",  "\\mathtt",
        "\\mathcal",  "\\mathbb",  "\\mathfrak", "\\mathscr", "\\boldsymbol",
        "\\bm",       "\\pmb",     "\\text",     "\\textrm",  "\\textbf",
        "\\textit",   "\\textsf",  "\\texttt",   "\\textnormal",
        "\\operatorname", "\\operatorname*", "\\mathop", "\\mathbin",
        "\\mathrel",  "\\mathopen", "\\mathclose", "\\mathord",
        "\\mathpunct", "\\mbox", "\\hbox",
    };
    return s;
}

// commands with no glyph and no argument
const std::unordered_set<std::string>& invisible_commands() {
    static const std::unordered_set<std::string> s = {
        "\\,",  "\\;",  "\\:",  "\\!",  "\\space", "\\quad", "\\qquad",
        "\\thinspace", "\\medspace", "\\thickspace", "\\enspace",
        "\\negthinspace", "\\displaystyle", "\\textstyle", "\\scriptstyle",
        "\\scriptscriptstyle", "\\limits", "\\nolimits", "\\notag",
        "\\nonumber", "\\allowbreak", "\\strut", "\\mathstrut", "\\smash",
    };
    return s;
}

// commands whose single brace argument is metadata, consumed verbatim
const std::unordered_set<std::string>& invisible_arg_commands() {
    static const std::unordered_set<std::string> s = {
        "\\label", "\\tag", "\\tag*", "\\hspace", "\\hspace*", "\\vspace",
        "\\phantom", "\\hphantom", "\\vphantom",
    };
    return s;
}

// environments whose \begin consumes a column-spec group
bool env_takes_spec(const std::string& name) {
    return name == "array" || name == "alignedat" || name == "tabular";
}

// ---------------------------------------------------------------------------
// lexer: raw source -> flat lexemes
// ---------------------------------------------------------------------------

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    std::optional<std::string> next() {
        if (pending_) {
            auto t = std::move(*pending_);
            pending_.reset();
            return t;
        }
        skip_blank();
        if (pos_ >= src_.size()) return std::nullopt;
        char c = src_[pos_];
        if (c == '\\') return lex_control();
        if (c == '%') {  // comment to end of line
            while (pos_ < src_.size() && src_[pos_] != '\n') ++pos_;
            return next();
        }
        // one UTF-8 code point
        std::size_t len = 1;
        if (static_cast<unsigned char>(c) >= 0xC0) {
            while (pos_ + len < src_.size() &&
                   (static_cast<unsigned char>(src_[pos_ + len]) & 0xC0) == 0x80)
                ++len;
        }
        std::string tok(src_.substr(pos_, len));
        pos_ += len;
        return tok;
    }

    std::optional<std::string> peek() {
        if (!pending_) pending_ = next();
        return pending_;
    }

private:
    void skip_blank() {
        while (pos_ < src_.size() &&
               std::isspace(static_cast<unsigned char>(src_[pos_])))
            ++pos_;
    }

    std::string lex_control() {
        std::size_t start = pos_;
        ++pos_;  // backslash
        if (pos_ >= src_.size()) return "\\";
        if (is_letter(src_[pos_])) {
            while (pos_ < src_.size() && is_letter(src_[pos_])) ++pos_;
            std::string name(src_.substr(start, pos_ - start));
            // starred variants of known commands
            if (pos_ < src_.size() && src_[pos_] == '*' &&
                (name == "\\operatorname" || name == "\\tag" || name == "\\hspace")) {
                ++pos_;
                name += '*';
            }
            return name;
        }
        // control symbol: \{ \} \\ \, \% \_ ...
        char sym = src_[pos_];
        ++pos_;
        if (sym == ' ' || sym == '\t' || sym == '\n')
            return "\\space";  // control space, renamed to stay whitespace-free
        return std::string("\\") + sym;
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    std::optional<std::string> pending_;
};

// ---------------------------------------------------------------------------
// parse tree
// ---------------------------------------------------------------------------

struct Node {
    std::string text;
    TokenKind kind = TokenKind::Char;
    std::vector<std::vector<Node>> args;  // brace-group arguments
    std::vector<Node> opt;                // optional [..] argument
    bool has_opt = false;
    std::vector<Node> sup, sub;
    bool has_sup = false, has_sub = false;
};

class Parser {
public:
    explicit Parser(Lexer& lex) : lex_(lex) {}

    std::vector<Node> parse_all() {
        auto items = parse_list(false);
        return items;
    }

private:
    static constexpr int kMaxDepth = 256;

    Lexer& lex_;
    int depth_ = 0;

    [[noreturn]] static void fail_braces(const std::string& what) {
        throw UnbalancedBraces("unbalanced braces: " + what);
    }

    std::vector<Node> parse_list(bool inside_group) {
        if (++depth_ > kMaxDepth) fail_braces("nesting too deep");
        std::vector<Node> out;
        while (true) {
            auto lx = lex_.peek();
            if (!lx) {
                if (inside_group) fail_braces("group never closed");
                --depth_;
                return out;
            }
            if (*lx == "}") {
                if (!inside_group) fail_braces("stray closing brace");
                lex_.next();
                --depth_;
                return out;
            }
            parse_item(out);
        }
    }

    void parse_item(std::vector<Node>& out) {
        auto lx = *lex_.next();

        if (lx == "{") {
            // plain group in running material is redundant: splice inline
            auto children = parse_list(true);
            for (auto& c : children) out.push_back(std::move(c));
            return;
        }
        if (lx == "^" || lx == "_") {
            attach_script(out, lx == "^");
            return;
        }
        if (lx == "'") {
            Node prime;
            prime.text = "\\prime";
            prime.kind = TokenKind::Command;
            script_base(out).sup.push_back(std::move(prime));
            script_base(out).has_sup = true;
            return;
        }
        if (lx == "&" || lx == "\\\\") {
            out.push_back(make_structural(lx));
            if (lx == "\\\\") consume_optional_bracket_verbatim(out.back());
            return;
        }
        if (lx[0] == '\\' && lx.size() > 1) {
            parse_command(lx, out);
            return;
        }
        Node n;
        n.text = lx;
        n.kind = TokenKind::Char;
        out.push_back(std::move(n));
    }

    static Node make_structural(std::string text) {
        Node n;
        n.text = std::move(text);
        n.kind = TokenKind::Structural;
        return n;
    }

    // base node a following script attaches to; synthesizes an empty group
    // base for a leading ^/_ so emission stays well-formed
    Node& script_base(std::vector<Node>& out) {
        if (out.empty() || out.back().kind == TokenKind::Structural) {
            Node empty;
            empty.text = "{}";  // placeholder, emitted as an empty group
            empty.kind = TokenKind::GroupOpen;
            out.push_back(std::move(empty));
        }
        return out.back();
    }

    void attach_script(std::vector<Node>& out, bool is_sup) {
        auto arg = parse_arg();
        Node& base = script_base(out);
        if (is_sup) {
            base.has_sup = true;
            for (auto& n : arg) base.sup.push_back(std::move(n));
        } else {
            base.has_sub = true;
            for (auto& n : arg) base.sub.push_back(std::move(n));
        }
    }

    std::vector<Node> parse_arg() {
        auto lx = lex_.peek();
        if (!lx) return {};
        if (*lx == "{") {
            lex_.next();
            return parse_list(true);
        }
        if (*lx == "}") fail_braces("stray closing brace in argument");
        // single-lexeme argument
        std::vector<Node> tmp;
        parse_item(tmp);
        return tmp;
    }

    void parse_command(const std::string& name, std::vector<Node>& out) {
        if (size_prefixes().count(name)) {
            auto nxt = lex_.peek();
            if (nxt && delimiter_texts().count(*nxt)) {
                lex_.next();
                Node n;
                n.text = name + *nxt;
                // \left. and friends draw nothing
                n.kind = (*nxt == ".") ? TokenKind::Structural : TokenKind::Command;
                out.push_back(std::move(n));
                return;
            }
            out.push_back(make_structural(name));  // dangling size prefix
            return;
        }
        if (name == "\\begin" || name == "\\end") {
            std::string env = consume_group_verbatim();
            Node n = make_structural(name + env);
            if (name == "\\begin") {
                std::string inner = env.size() >= 2 ? env.substr(1, env.size() - 2) : "";
                consume_optional_bracket_verbatim(n);
                if (env_takes_spec(inner)) {
                    auto nxt = lex_.peek();
                    if (nxt && *nxt == "{") n.text += consume_group_verbatim();
                }
            }
            out.push_back(std::move(n));
            return;
        }
        if (invisible_commands().count(name)) {
            out.push_back(make_structural(name));
            return;
        }
        if (invisible_arg_commands().count(name)) {
            Node n = make_structural(name);
            auto nxt = lex_.peek();
            if (nxt && *nxt == "{") n.text += consume_group_verbatim();
            out.push_back(std::move(n));
            return;
        }
        if (style_commands().count(name)) {
            Node n;
            n.text = name;
            n.kind = TokenKind::Structural;
            n.args.push_back(parse_arg());
            out.push_back(std::move(n));
            return;
        }
        auto it = glyph_arg_commands().find(name);
        if (it != glyph_arg_commands().end()) {
            Node n;
            n.text = name;
            n.kind = TokenKind::Command;
            auto nxt = lex_.peek();
            if (takes_optional_arg(name) && nxt && *nxt == "[") {
                lex_.next();
                n.has_opt = true;
                n.opt = parse_until_bracket();
            }
            for (int i = 0; i < it->second; ++i) {
                auto nxt2 = lex_.peek();
                if (!nxt2 || *nxt2 == "}") break;  // missing args, keep lenient
                n.args.push_back(parse_arg());
            }
            out.push_back(std::move(n));
            return;
        }
        // anything else, including unknown commands: one glyph token
        Node n;
        n.text = name;
        n.kind = TokenKind::Command;
        out.push_back(std::move(n));
    }

    std::vector<Node> parse_until_bracket() {
        std::vector<Node> out;
        while (true) {
            auto lx = lex_.peek();
            if (!lx) fail_braces("optional argument never closed");
            if (*lx == "]") {
                lex_.next();
                return out;
            }
            parse_item(out);
        }
    }

    // raw re-serialization of a brace group, used for metadata arguments
    std::string consume_group_verbatim() {
        auto lx = lex_.next();
        if (!lx || *lx != "{") fail_braces("expected group");
        std::string body = "{";
        int depth = 1;
        std::string prev;
        while (depth > 0) {
            auto t = lex_.next();
            if (!t) fail_braces("metadata group never closed");
            if (*t == "{") ++depth;
            if (*t == "}") --depth;
            // an empty group keeps a command name from swallowing a
            // following letter; token texts must stay whitespace-free
            if (!prev.empty() && prev[0] == '\\' && prev.size() > 1 &&
                is_letter(prev.back()) && !t->empty() && is_letter((*t)[0]))
                body += "{}";
            body += *t;
            prev = *t;
        }
        return body;
    }

    void consume_optional_bracket_verbatim(Node& n) {
        auto nxt = lex_.peek();
        if (!nxt || *nxt != "[") return;
        lex_.next();
        std::string body = "[";
        while (true) {
            auto t = lex_.next();
            if (!t) fail_braces("optional argument never closed");
            body += *t;
            if (*t == "]") break;
        }
        n.text += body;
    }
};

// ---------------------------------------------------------------------------
// flatten: parse tree -> canonical token sequence
// ---------------------------------------------------------------------------

class Emitter {
public:
    void emit_list(const std::vector<Node>& nodes) {
        for (const auto& n : nodes) emit_node(n);
    }

    std::vector<Token> take() { return std::move(tokens_); }

private:
    std::vector<Token> tokens_;

    void push(std::string text, TokenKind kind) {
        Token t;
        t.text = std::move(text);
        t.kind = kind;
        t.order_index = static_cast<int>(tokens_.size());
        tokens_.push_back(std::move(t));
    }

    void emit_group(const std::vector<Node>& nodes) {
        push("{", TokenKind::GroupOpen);
        emit_list(nodes);
        push("}", TokenKind::GroupClose);
    }

    void emit_node(const Node& n) {
        if (n.kind == TokenKind::GroupOpen && n.text == "{}") {
            // synthesized empty base for a leading script
            push("{", TokenKind::GroupOpen);
            push("}", TokenKind::GroupClose);
        } else {
            push(n.text, n.kind);
            if (n.has_opt) {
                push("[", TokenKind::Structural);
                emit_list(n.opt);
                push("]", TokenKind::Structural);
            }
            for (const auto& arg : n.args) emit_group(arg);
        }
        if (n.has_sup) {
            push("^", TokenKind::ScriptMarker);
            emit_group(n.sup);
        }
        if (n.has_sub) {
            push("_", TokenKind::ScriptMarker);
            emit_group(n.sub);
        }
    }
};

}  // namespace

TokenSequence tokenize(std::string_view source) {
    Lexer lex(source);
    Parser parser(lex);
    auto tree = parser.parse_all();

    Emitter em;
    em.emit_list(tree);

    TokenSequence seq;
    seq.tokens = em.take();
    seq.source = std::string(source);
    seq.colorable_count = static_cast<int>(
        std::count_if(seq.tokens.begin(), seq.tokens.end(),
                      [](const Token& t) { return t.colorable(); }));
    return seq;
}

std::string detokenize(const TokenSequence& seq) {
    std::string out;
    for (const auto& t : seq.tokens) {
        if (!out.empty()) out += ' ';
        out += t.text;
    }
    return out;
}

std::string_view strip_size_prefix(std::string_view text) {
    if (text.empty() || text[0] != '\\') return text;
    for (const auto& prefix : size_prefixes()) {
        if (text.size() > prefix.size() && text.substr(0, prefix.size()) == prefix) {
            std::string_view rest = text.substr(prefix.size());
            // only strip when the remainder is a delimiter, not when the
            // prefix is merely a prefix of a longer command name
            if (!is_letter(rest[0]) || rest[0] == '\\')
                return rest;
            if (delimiter_texts().count(std::string(rest)))
                return rest;
        }
    }
    return text;
}

EquivTable EquivTable::builtin() {
    EquivTable t;
    t.add_class({"|", "\\vert", "\\lvert", "\\rvert", "\\mid"});
    t.add_class({"\\|", "\\Vert", "\\lVert", "\\rVert"});
    t.add_class({"\\{", "\\lbrace"});
    t.add_class({"\\}", "\\rbrace"});
    t.add_class({"[", "\\lbrack"});
    t.add_class({"]", "\\rbrack"});
    t.add_class({"\\le", "\\leq"});
    t.add_class({"\\ge", "\\geq"});
    t.add_class({"\\ne", "\\neq"});
    t.add_class({"\\to", "\\rightarrow"});
    t.add_class({"\\gets", "\\leftarrow"});
    t.add_class({"\\land", "\\wedge"});
    t.add_class({"\\lor", "\\vee"});
    t.add_class({"\\lnot", "\\neg"});
    t.add_class({"\\ni", "\\owns"});
    t.add_class({":", "\\colon"});
    t.add_class({"*", "\\ast"});
    t.add_class({"\\dots", "\\ldots"});
    t.add_class({"\\cdots", "\\dotsb"});
    t.add_class({"\\prime", "'"});
    return t;
}

EquivTable EquivTable::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open equivalence table: " + path);
    EquivTable t;
    std::string line;
    while (std::getline(in, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream row(line);
        std::vector<std::string> members;
        std::string word;
        while (row >> word) members.push_back(word);
        if (members.size() >= 2) t.add_class(members);
    }
    return t;
}

void EquivTable::add_class(const std::vector<std::string>& members) {
    if (members.empty()) return;
    for (const auto& m : members) class_by_text_[m] = members.front();
    ++class_count_;
}

std::string EquivTable::class_of(std::string_view text) const {
    std::string key(strip_size_prefix(text));
    auto it = class_by_text_.find(key);
    if (it != class_by_text_.end()) return it->second;
    return key;
}

EquivRelation equiv(const Token& a, const Token& b, const EquivTable& table) {
    if (a.text == b.text) return EquivRelation::Identical;
    if (table.class_of(a.text) == table.class_of(b.text))
        return EquivRelation::RenderEquivalent;
    return EquivRelation::Different;
}

int glyph_arg_count(std::string_view command_text) {
    auto it = glyph_arg_commands().find(std::string(command_text));
    return it == glyph_arg_commands().end() ? 0 : it->second;
}

bool has_optional_arg_slot(std::string_view command_text) {
    return takes_optional_arg(std::string(command_text));
}

bool is_style_wrapper(std::string_view text) {
    return style_commands().count(std::string(text)) > 0;
}

}  // namespace cdm

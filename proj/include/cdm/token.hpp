#pragma once

// LaTeX math tokenization and normalization.
//
// A formula is broken into atomic tokens (single characters, commands such
// as \alpha or \sin, braces, script markers). Normalization produces one
// canonical sequence for the many syntactic spellings of the same formula:
// shorthand arguments get explicit braces (\frac ab -> \frac { a } { b }),
// scripts get explicit braces with superscript emitted before subscript
// (x_{a}^{b} -> x ^ { b } _ { a }), redundant groups are flattened and
// primes become explicit \prime superscripts.

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace cdm {

enum class TokenKind {
    Char,          // single glyph character: a, 2, +, (
    Command,       // control sequence producing a glyph: \alpha, \sin, \frac, \left(
    GroupOpen,     // {
    GroupClose,    // }
    ScriptMarker,  // ^ or _
    Structural,    // everything else that typesets no glyph of its own:
                   // &, \\, \begin{...}, \end{...}, spacing, style wrappers
};

struct Token {
    std::string text;
    TokenKind kind = TokenKind::Char;
    int order_index = 0;

    bool colorable() const {
        return kind == TokenKind::Char || kind == TokenKind::Command;
    }
};

struct TokenSequence {
    std::vector<Token> tokens;
    int colorable_count = 0;
    std::string source;

    bool empty() const { return tokens.empty(); }
    std::size_t size() const { return tokens.size(); }
};

// Families of token texts that render to the same glyph (\le and \leq, a
// plain "(" and every sized variant of it, ...). Size prefixes such as
// \left, \big, \Bigg are stripped before lookup, so delimiter families do
// not need to be spelled out per size. Unknown texts form their own
// singleton class.
class EquivTable {
public:
    static EquivTable builtin();
    static EquivTable load(const std::string& path);

    // canonical class id for a token text; defaults to the text itself
    std::string class_of(std::string_view text) const;

    void add_class(const std::vector<std::string>& members);

    std::size_t class_count() const { return class_count_; }

private:
    std::unordered_map<std::string, std::string> class_by_text_;
    std::size_t class_count_ = 0;
};

enum class EquivRelation { Identical, RenderEquivalent, Different };

EquivRelation equiv(const Token& a, const Token& b, const EquivTable& table);

// Tokenize one math-mode expression into its canonical sequence.
// Throws UnbalancedBraces when brace nesting never closes (or a stray }
// appears). Unknown commands are kept verbatim as single Command tokens.
TokenSequence tokenize(std::string_view source);

// Inverse presentation for round-trips and BLEU: token texts joined by
// single spaces.
std::string detokenize(const TokenSequence& seq);

// Strip a delimiter size prefix (\left, \big, \biggl, ...) from a token
// text; returns the text unchanged when no prefix applies.
std::string_view strip_size_prefix(std::string_view text);

// Introspection over the canonical sequence, used by the renderers to
// re-associate brace groups with the command that owns them.
int glyph_arg_count(std::string_view command_text);  // 0 for plain tokens
bool has_optional_arg_slot(std::string_view command_text);
bool is_style_wrapper(std::string_view text);

}  // namespace cdm

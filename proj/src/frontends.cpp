#include "kffi/cellscript/ast.hpp"
#include "kffi/errors.hpp"
#include "kffi/registry.hpp"

#include <cctype>
#include <regex>

namespace kffi {

namespace {

CellDeclaration extract_cellscript(std::string_view source, CellDeclaration cell) {
    const auto program = cellscript::parse(source);
    for (const auto& stmt : program.statements) {
        using namespace cellscript::node;
        if (const auto* s = std::get_if<FnDef>(&stmt->node)) {
            SymbolRecord rec;
            rec.name = s->decl->name;
            rec.kind = SymbolKind::function;
            rec.params = s->decl->params;
            cell.declarations.push_back(std::move(rec));
        } else if (const auto* s = std::get_if<ClassDef>(&stmt->node)) {
            SymbolRecord rec;
            rec.name = s->name;
            rec.kind = SymbolKind::class_type;
            for (const auto& m : s->methods) {
                MethodInfo info;
                info.name = m->name;
                info.params.assign(m->params.begin() + (m->params.empty() ? 0 : 1), m->params.end());
                if (m->name == "init") rec.params = info.params;
                rec.methods.push_back(std::move(info));
            }
            cell.declarations.push_back(std::move(rec));
        } else if (const auto* s = std::get_if<Assign>(&stmt->node)) {
            if (const auto* id = std::get_if<Ident>(&s->target->node)) {
                SymbolRecord rec;
                rec.name = id->name;
                rec.kind = SymbolKind::variable;
                cell.declarations.push_back(std::move(rec));
            }
        }
    }
    return cell;
}

// Python subset: top-level `def`, `class` (with its methods) and simple
// assignments. Everything else at top level is skipped with a warning.

struct LogicalLine {
    int line;
    int indent;
    std::string text;
};

bool is_identifier(std::string_view s) {
    if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
    for (char c : s) {
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
    }
    return true;
}

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

/// Joins bracketed and backslash-continued physical lines, drops comments and
/// blank lines. String contents are kept verbatim.
std::vector<LogicalLine> logical_lines(std::string_view src) {
    std::vector<LogicalLine> out;
    std::string current;
    int start_line = 1;
    int indent = 0;
    bool at_line_start = true;
    int depth = 0;
    int line = 1;
    int open_line = 0;
    int open_col = 0;
    int col = 1;

    auto flush = [&] {
        auto text = trim(current);
        if (!text.empty()) out.push_back({start_line, indent, text});
        current.clear();
        at_line_start = true;
    };

    std::size_t i = 0;
    while (i < src.size()) {
        const char c = src[i];
        if (at_line_start) {
            indent = 0;
            while (i < src.size() && (src[i] == ' ' || src[i] == '\t')) {
                indent += src[i] == '\t' ? 8 - indent % 8 : 1;
                ++i;
                ++col;
            }
            start_line = line;
            at_line_start = false;
            continue;
        }
        if (c == '#') {
            while (i < src.size() && src[i] != '\n') ++i;
            continue;
        }
        if (c == '\'' || c == '"') {
            const bool triple = i + 2 < src.size() && src[i + 1] == c && src[i + 2] == c;
            const std::string quote = triple ? std::string(3, c) : std::string(1, c);
            const int str_line = line;
            const int str_col = col;
            current += quote;
            i += quote.size();
            col += static_cast<int>(quote.size());
            bool closed = false;
            while (i < src.size()) {
                if (src[i] == '\\' && i + 1 < src.size()) {
                    current += src.substr(i, 2);
                    if (src[i + 1] == '\n') {
                        ++line;
                        col = 1;
                    } else {
                        col += 2;
                    }
                    i += 2;
                    continue;
                }
                if (src.compare(i, quote.size(), quote) == 0) {
                    current += quote;
                    i += quote.size();
                    col += static_cast<int>(quote.size());
                    closed = true;
                    break;
                }
                if (src[i] == '\n') {
                    if (!triple) break;
                    ++line;
                    col = 1;
                } else {
                    ++col;
                }
                current.push_back(src[i]);
                ++i;
            }
            if (!closed) throw SyntaxError("unterminated string literal", str_line, str_col);
            continue;
        }
        if (c == '\\' && i + 1 < src.size() && src[i + 1] == '\n') {
            current.push_back(' ');
            i += 2;
            ++line;
            col = 1;
            continue;
        }
        if (c == '(' || c == '[' || c == '{') {
            if (depth == 0) {
                open_line = line;
                open_col = col;
            }
            ++depth;
        } else if (c == ')' || c == ']' || c == '}') {
            if (depth == 0) throw SyntaxError(std::string("unmatched '") + c + "'", line, col);
            --depth;
        }
        if (c == '\n') {
            ++line;
            col = 1;
            ++i;
            if (depth == 0) {
                flush();
            } else {
                current.push_back(' ');
            }
            continue;
        }
        current.push_back(c);
        ++i;
        ++col;
    }
    if (depth != 0) throw SyntaxError("unclosed bracket", open_line, open_col);
    flush();
    return out;
}

/// Splits on commas that are not nested inside brackets or strings.
std::vector<std::string> split_top_level(std::string_view s) {
    std::vector<std::string> parts;
    std::string current;
    int depth = 0;
    char quote = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const char c = s[i];
        if (quote) {
            current.push_back(c);
            if (c == '\\' && i + 1 < s.size()) {
                current.push_back(s[++i]);
            } else if (c == quote) {
                quote = 0;
            }
            continue;
        }
        if (c == '\'' || c == '"') quote = c;
        if (c == '(' || c == '[' || c == '{') ++depth;
        if (c == ')' || c == ']' || c == '}') --depth;
        if (c == ',' && depth == 0) {
            parts.push_back(trim(current));
            current.clear();
            continue;
        }
        current.push_back(c);
    }
    if (!trim(current).empty()) parts.push_back(trim(current));
    return parts;
}

struct PySignature {
    std::string name;
    std::vector<std::string> params;
    bool variadic = false;
};

/// Parses `def name(params) [-> T]:` (optionally `async def`).
PySignature parse_def(const LogicalLine& ll) {
    static const std::regex head(R"(^(?:async\s+)?def\s+([A-Za-z_]\w*)\s*\()");
    std::smatch m;
    if (!std::regex_search(ll.text, m, head)) {
        throw SyntaxError("invalid function definition", ll.line, ll.indent + 1);
    }
    PySignature sig;
    sig.name = m[1];
    const std::size_t open = static_cast<std::size_t>(m.position(0) + m.length(0));
    int depth = 1;
    std::size_t close = open;
    char quote = 0;
    for (; close < ll.text.size() && depth > 0; ++close) {
        const char c = ll.text[close];
        if (quote) {
            if (c == '\\') ++close;
            else if (c == quote) quote = 0;
            continue;
        }
        if (c == '\'' || c == '"') quote = c;
        else if (c == '(' || c == '[' || c == '{') ++depth;
        else if (c == ')' || c == ']' || c == '}') --depth;
    }
    if (depth != 0) throw SyntaxError("unclosed parameter list", ll.line, ll.indent + 1);
    static const std::regex tail(R"(^\s*(->[^:]+)?:.*$)");
    const std::string rest = ll.text.substr(close);
    if (!std::regex_match(rest, tail)) {
        throw SyntaxError("expected ':' after function signature", ll.line,
                          ll.indent + static_cast<int>(close) + 1);
    }
    for (auto param : split_top_level(ll.text.substr(open, close - 1 - open))) {
        if (param == "*" || param == "/") continue;
        if (const auto eq = param.find('='); eq != std::string::npos) param = trim(param.substr(0, eq));
        if (const auto colon = param.find(':'); colon != std::string::npos) param = trim(param.substr(0, colon));
        if (param.rfind("**", 0) == 0 || param.rfind('*', 0) == 0) {
            sig.variadic = true;
            continue;
        }
        if (!is_identifier(param)) {
            throw SyntaxError("invalid parameter '" + param + "'", ll.line, ll.indent + 1);
        }
        sig.params.push_back(param);
    }
    return sig;
}

bool starts_with_word(const std::string& text, std::string_view word) {
    if (text.compare(0, word.size(), word) != 0) return false;
    return text.size() == word.size() ||
           !(std::isalnum(static_cast<unsigned char>(text[word.size()])) || text[word.size()] == '_');
}

bool is_def(const std::string& text) {
    return starts_with_word(text, "def") ||
           (starts_with_word(text, "async") && text.find("def") != std::string::npos);
}

/// Names bound by a simple top-level assignment, or empty when the line is
/// not one (comparisons, augmented assignments, calls ...).
std::vector<std::string> assignment_targets(const std::string& text) {
    static const std::regex assign(
        R"(^([A-Za-z_]\w*(?:\s*,\s*[A-Za-z_]\w*)*)\s*(?::[^=]*)?=(?!=).*$)");
    std::smatch m;
    if (!std::regex_match(text, m, assign)) return {};
    std::vector<std::string> names;
    for (const auto& part : split_top_level(m[1].str())) names.push_back(part);
    return names;
}

CellDeclaration extract_python(std::string_view source, CellDeclaration cell) {
    const auto lines = logical_lines(source);
    static const std::regex class_head(R"(^class\s+([A-Za-z_]\w*)\s*(?:\(([^)]*)\))?\s*:.*$)");

    SymbolRecord* open_class = nullptr;
    int body_indent = -1;
    bool in_block = false;
    for (const auto& ll : lines) {
        if (ll.indent > 0) {
            if (!in_block) throw SyntaxError("unexpected indent", ll.line, 1);
            if (open_class) {
                if (body_indent < 0) body_indent = ll.indent;
                if (ll.indent == body_indent && is_def(ll.text)) {
                    const auto sig = parse_def(ll);
                    MethodInfo info;
                    info.name = sig.name;
                    info.params.assign(sig.params.begin() + (sig.params.empty() ? 0 : 1), sig.params.end());
                    info.variadic = sig.variadic;
                    if (sig.name == "__init__") {
                        open_class->params = info.params;
                        open_class->variadic = info.variadic;
                    }
                    open_class->methods.push_back(std::move(info));
                }
            }
            continue;
        }
        // A compound header with an inline body (`def f(): return 1`) opens
        // no indented block.
        auto opens_block = [](const std::string& text) { return text.back() == ':'; };
        open_class = nullptr;
        body_indent = -1;
        in_block = false;
        const auto& text = ll.text;
        if (text[0] == '@') continue;
        if (is_def(text)) {
            const auto sig = parse_def(ll);
            SymbolRecord rec;
            rec.name = sig.name;
            rec.kind = SymbolKind::function;
            rec.params = sig.params;
            rec.variadic = sig.variadic;
            cell.declarations.push_back(std::move(rec));
            in_block = opens_block(text);
            continue;
        }
        if (starts_with_word(text, "class")) {
            std::smatch m;
            if (!std::regex_match(text, m, class_head)) {
                throw SyntaxError("invalid class definition", ll.line, 1);
            }
            SymbolRecord rec;
            rec.name = m[1];
            rec.kind = SymbolKind::class_type;
            if (m[2].matched) {
                const auto bases = split_top_level(m[2].str());
                if (!bases.empty() && bases.front() != "object") rec.base = bases.front();
            }
            // Without its own __init__ the constructor comes from a base.
            rec.variadic = rec.base.has_value();
            cell.declarations.push_back(std::move(rec));
            open_class = &cell.declarations.back();
            in_block = opens_block(text);
            continue;
        }
        if (auto names = assignment_targets(text); !names.empty()) {
            for (auto& name : names) {
                SymbolRecord rec;
                rec.name = std::move(name);
                rec.kind = SymbolKind::variable;
                cell.declarations.push_back(std::move(rec));
            }
            continue;
        }
        in_block = opens_block(text);
        cell.warnings.push_back("line " + std::to_string(ll.line) + ": skipped top-level construct '" +
                                text.substr(0, 40) + "'");
    }
    return cell;
}

} // namespace

CellDeclaration extract_declarations(std::string_view source, const std::string& lang,
                                     const std::string& cell_id, const std::string& kernel_id) {
    CellDeclaration cell;
    cell.cell_id = cell_id;
    cell.kernel_id = kernel_id;
    cell.lang = lang;
    if (lang == "cellscript") {
        cell = extract_cellscript(source, std::move(cell));
    } else if (lang == "python") {
        cell = extract_python(source, std::move(cell));
    } else {
        throw UnsupportedLanguage("no declaration frontend for language '" + lang + "'");
    }
    for (auto& decl : cell.declarations) {
        decl.kernel_id = kernel_id;
        decl.lang = lang;
        decl.cell_id = cell_id;
    }
    return cell;
}

} // namespace kffi

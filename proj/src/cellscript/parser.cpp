#include "kffi/cellscript/ast.hpp"

#include "kffi/errors.hpp"

#include <cctype>
#include <charconv>
#include <cstdlib>
#include <set>

namespace kffi::cellscript {

namespace {

enum class Tok { integer, floating, string, ident, keyword, punct, end };

struct Token {
    Tok kind;
    std::string text;   // identifier/keyword/punct spelling, or decoded string
    std::int64_t int_value = 0;
    double float_value = 0.0;
    Pos pos;
};

const std::set<std::string, std::less<>> kKeywords = {
    "fn", "class", "return", "release", "new", "if", "else",
    "while", "true", "false", "null", "and", "or", "not"};

void append_utf8(std::string& out, std::uint32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    std::vector<Token> run() {
        std::vector<Token> out;
        for (;;) {
            skip_space();
            Token t = next();
            const bool done = t.kind == Tok::end;
            out.push_back(std::move(t));
            if (done) return out;
        }
    }

private:
    std::string_view src_;
    std::size_t i_ = 0;
    int line_ = 1;
    int col_ = 1;

    [[noreturn]] void fail(const std::string& msg) const { throw SyntaxError(msg, line_, col_); }

    char peek(std::size_t ahead = 0) const {
        return i_ + ahead < src_.size() ? src_[i_ + ahead] : '\0';
    }

    void advance() {
        if (src_[i_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++i_;
    }

    void skip_space() {
        while (i_ < src_.size()) {
            const char c = peek();
            if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
                advance();
            } else if (c == '#' || (c == '/' && peek(1) == '/')) {
                while (i_ < src_.size() && peek() != '\n') advance();
            } else {
                break;
            }
        }
    }

    Pos start() const { return Pos{i_, i_, line_, col_}; }

    Token next() {
        Token t{Tok::end, {}, 0, 0.0, start()};
        if (i_ >= src_.size()) return t;
        const char c = peek();
        if (std::isdigit(static_cast<unsigned char>(c))) {
            number(t);
        } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            while (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_') advance();
            t.text = std::string(src_.substr(t.pos.begin, i_ - t.pos.begin));
            t.kind = kKeywords.count(t.text) ? Tok::keyword : Tok::ident;
        } else if (c == '"') {
            string_literal(t);
        } else {
            static constexpr std::string_view kTwo[] = {"==", "!=", "<=", ">=", "&&", "||"};
            t.kind = Tok::punct;
            for (auto two : kTwo) {
                if (src_.substr(i_, 2) == two) {
                    t.text = std::string(two);
                    advance();
                    advance();
                    t.pos.end = i_;
                    return t;
                }
            }
            if (std::string_view("+-*/%<>=!(){}[],.;:").find(c) == std::string_view::npos) {
                fail(std::string("unexpected character '") + c + "'");
            }
            t.text = std::string(1, c);
            advance();
        }
        t.pos.end = i_;
        return t;
    }

    void number(Token& t) {
        bool is_float = false;
        while (std::isdigit(static_cast<unsigned char>(peek()))) advance();
        if (peek() == '.' && std::isdigit(static_cast<unsigned char>(peek(1)))) {
            is_float = true;
            advance();
            while (std::isdigit(static_cast<unsigned char>(peek()))) advance();
        }
        if (peek() == 'e' || peek() == 'E') {
            std::size_t k = 1;
            if (peek(k) == '+' || peek(k) == '-') ++k;
            if (std::isdigit(static_cast<unsigned char>(peek(k)))) {
                is_float = true;
                for (std::size_t j = 0; j < k; ++j) advance();
                while (std::isdigit(static_cast<unsigned char>(peek()))) advance();
            }
        }
        const auto text = src_.substr(t.pos.begin, i_ - t.pos.begin);
        if (is_float) {
            t.kind = Tok::floating;
            t.float_value = std::strtod(std::string(text).c_str(), nullptr);
        } else {
            t.kind = Tok::integer;
            auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), t.int_value);
            if (ec != std::errc()) throw SyntaxError("integer literal out of range", t.pos.line, t.pos.column);
        }
    }

    unsigned hex4() {
        unsigned v = 0;
        for (int k = 0; k < 4; ++k) {
            const char h = peek();
            v <<= 4;
            if (h >= '0' && h <= '9') v |= static_cast<unsigned>(h - '0');
            else if (h >= 'a' && h <= 'f') v |= static_cast<unsigned>(h - 'a' + 10);
            else if (h >= 'A' && h <= 'F') v |= static_cast<unsigned>(h - 'A' + 10);
            else fail("bad \\u escape");
            advance();
        }
        return v;
    }

    void string_literal(Token& t) {
        t.kind = Tok::string;
        advance();
        for (;;) {
            if (i_ >= src_.size()) throw SyntaxError("unterminated string", t.pos.line, t.pos.column);
            const char c = peek();
            if (c == '"') {
                advance();
                return;
            }
            if (c == '\n') throw SyntaxError("unterminated string", t.pos.line, t.pos.column);
            if (c != '\\') {
                t.text.push_back(c);
                advance();
                continue;
            }
            advance();
            if (i_ >= src_.size()) throw SyntaxError("unterminated string", t.pos.line, t.pos.column);
            const char e = peek();
            advance();
            switch (e) {
            case '"': t.text.push_back('"'); break;
            case '\\': t.text.push_back('\\'); break;
            case '/': t.text.push_back('/'); break;
            case 'n': t.text.push_back('\n'); break;
            case 't': t.text.push_back('\t'); break;
            case 'r': t.text.push_back('\r'); break;
            case 'b': t.text.push_back('\b'); break;
            case 'f': t.text.push_back('\f'); break;
            case 'u': {
                std::uint32_t cp = hex4();
                if (cp >= 0xD800 && cp <= 0xDBFF && peek() == '\\' && peek(1) == 'u') {
                    advance();
                    advance();
                    const std::uint32_t lo = hex4();
                    cp = 0x10000 + ((cp - 0xD800) << 10) + (lo - 0xDC00);
                }
                append_utf8(t.text, cp);
                break;
            }
            default: fail(std::string("unknown escape '\\") + e + "'");
            }
        }
    }
};

class Parser {
public:
    explicit Parser(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

    Program program() {
        Program p;
        while (!at_end()) p.statements.push_back(statement());
        return p;
    }

private:
    std::vector<Token> toks_;
    std::size_t k_ = 0;

    const Token& cur() const { return toks_[k_]; }
    const Token& prev() const { return toks_[k_ - 1]; }
    bool at_end() const { return cur().kind == Tok::end; }

    bool is(Tok kind, std::string_view text) const {
        return cur().kind == kind && cur().text == text;
    }
    bool is_punct(std::string_view p) const { return is(Tok::punct, p); }
    bool is_kw(std::string_view kw) const { return is(Tok::keyword, kw); }

    bool accept_punct(std::string_view p) {
        if (!is_punct(p)) return false;
        ++k_;
        return true;
    }

    [[noreturn]] void fail(const std::string& msg) const {
        throw SyntaxError(msg, cur().pos.line, cur().pos.column);
    }

    const Token& expect_punct(std::string_view p) {
        if (!is_punct(p)) {
            fail("expected '" + std::string(p) + "' but found " + describe(cur()));
        }
        return toks_[k_++];
    }

    const Token& expect_ident(std::string_view what) {
        if (cur().kind != Tok::ident) fail("expected " + std::string(what) + " but found " + describe(cur()));
        return toks_[k_++];
    }

    static std::string describe(const Token& t) {
        switch (t.kind) {
        case Tok::end: return "end of input";
        case Tok::string: return "string literal";
        case Tok::integer:
        case Tok::floating: return "number";
        default: return "'" + t.text + "'";
        }
    }

    static Pos span(const Pos& from, const Pos& to) {
        return Pos{from.begin, to.end, from.line, from.column};
    }

    template <typename N>
    static ExprPtr make_expr(Pos pos, N n) {
        return std::make_shared<const Expr>(Expr{pos, std::move(n)});
    }

    template <typename N>
    static StmtPtr make_stmt(Pos pos, N n) {
        return std::make_shared<const Stmt>(Stmt{pos, std::move(n)});
    }

    Block block() {
        expect_punct("{");
        Block out;
        while (!is_punct("}")) {
            if (at_end()) fail("unterminated block");
            out.push_back(statement());
        }
        ++k_;
        return out;
    }

    std::shared_ptr<const FnDecl> fn_decl() {
        auto decl = std::make_shared<FnDecl>();
        const Token& name = expect_ident("function name");
        decl->name = name.text;
        decl->name_pos = name.pos;
        expect_punct("(");
        if (!is_punct(")")) {
            do {
                const std::string param = expect_ident("parameter name").text;
                for (const auto& existing : decl->params) {
                    if (existing == param) fail("duplicate parameter '" + param + "'");
                }
                decl->params.push_back(param);
            } while (accept_punct(","));
        }
        expect_punct(")");
        decl->body = block();
        return decl;
    }

    StmtPtr statement() {
        const Pos start = cur().pos;
        StmtPtr out;
        if (is_kw("fn")) {
            ++k_;
            auto decl = fn_decl();
            out = make_stmt(span(start, prev().pos), node::FnDef{decl});
        } else if (is_kw("class")) {
            ++k_;
            const Token& name = expect_ident("class name");
            node::ClassDef def{name.text, name.pos, {}};
            expect_punct("{");
            while (!is_punct("}")) {
                if (!is_kw("fn")) fail("expected method definition in class body");
                ++k_;
                def.methods.push_back(fn_decl());
            }
            ++k_;
            out = make_stmt(span(start, prev().pos), std::move(def));
        } else if (is_kw("return")) {
            ++k_;
            ExprPtr value;
            if (!is_punct(";") && !is_punct("}") && !at_end()) value = expression();
            out = make_stmt(span(start, prev().pos), node::Return{value});
        } else if (is_kw("release")) {
            const Pos kw = cur().pos;
            ++k_;
            auto value = expression();
            out = make_stmt(span(start, prev().pos), node::Release{value, kw});
        } else if (is_kw("if")) {
            out = if_statement();
        } else if (is_kw("while")) {
            ++k_;
            auto cond = expression();
            auto body = block();
            out = make_stmt(span(start, prev().pos), node::While{cond, std::move(body)});
        } else {
            auto expr = expression();
            if (accept_punct("=")) {
                const bool assignable = std::holds_alternative<node::Ident>(expr->node) ||
                                        std::holds_alternative<node::Member>(expr->node) ||
                                        std::holds_alternative<node::Index>(expr->node);
                if (!assignable) {
                    throw SyntaxError("invalid assignment target", expr->pos.line, expr->pos.column);
                }
                auto value = expression();
                out = make_stmt(span(start, prev().pos), node::Assign{expr, value});
            } else {
                out = make_stmt(span(start, prev().pos), node::ExprStmt{expr});
            }
        }
        accept_punct(";");
        return out;
    }

    StmtPtr if_statement() {
        const Pos start = cur().pos;
        ++k_;
        auto cond = expression();
        auto then_block = block();
        Block else_block;
        if (is_kw("else")) {
            ++k_;
            if (is_kw("if")) {
                else_block.push_back(if_statement());
            } else {
                else_block = block();
            }
        }
        return make_stmt(span(start, prev().pos),
                         node::If{cond, std::move(then_block), std::move(else_block)});
    }

    ExprPtr expression() { return logical_or(); }

    ExprPtr binary_chain(ExprPtr (Parser::*next)(),
                         std::initializer_list<std::pair<std::string_view, BinOp>> ops) {
        ExprPtr lhs = (this->*next)();
        for (;;) {
            bool matched = false;
            for (const auto& [spelling, op] : ops) {
                const bool word = spelling == "and" || spelling == "or";
                if (word ? is_kw(spelling) : is_punct(spelling)) {
                    ++k_;
                    ExprPtr rhs = (this->*next)();
                    lhs = make_expr(span(lhs->pos, rhs->pos), node::Binary{op, lhs, rhs});
                    matched = true;
                    break;
                }
            }
            if (!matched) return lhs;
        }
    }

    ExprPtr logical_or() {
        return binary_chain(&Parser::logical_and, {{"or", BinOp::logical_or}, {"||", BinOp::logical_or}});
    }
    ExprPtr logical_and() {
        return binary_chain(&Parser::equality, {{"and", BinOp::logical_and}, {"&&", BinOp::logical_and}});
    }
    ExprPtr equality() {
        return binary_chain(&Parser::comparison, {{"==", BinOp::eq}, {"!=", BinOp::ne}});
    }
    ExprPtr comparison() {
        return binary_chain(&Parser::additive, {{"<=", BinOp::le}, {">=", BinOp::ge},
                                                {"<", BinOp::lt}, {">", BinOp::gt}});
    }
    ExprPtr additive() {
        return binary_chain(&Parser::multiplicative, {{"+", BinOp::add}, {"-", BinOp::sub}});
    }
    ExprPtr multiplicative() {
        return binary_chain(&Parser::unary, {{"*", BinOp::mul}, {"/", BinOp::div}, {"%", BinOp::mod}});
    }

    ExprPtr unary() {
        const Pos start = cur().pos;
        if (is_punct("-") || is_punct("!") || is_kw("not")) {
            const UnOp op = is_punct("-") ? UnOp::neg : UnOp::logical_not;
            ++k_;
            auto operand = unary();
            return make_expr(span(start, operand->pos), node::Unary{op, operand});
        }
        return postfix();
    }

    std::vector<Arg> arguments() {
        std::vector<Arg> args;
        if (!is_punct(")")) {
            do {
                if (is_punct(")")) break;
                const bool spread = accept_punct("*");
                args.push_back(Arg{expression(), spread});
            } while (accept_punct(","));
        }
        expect_punct(")");
        return args;
    }

    ExprPtr postfix() {
        ExprPtr e = primary();
        for (;;) {
            // a call or index must open on the line its operand ends on
            const bool same_line = cur().pos.line == prev().pos.line;
            if (same_line && is_punct("(")) {
                const Pos open = cur().pos;
                ++k_;
                auto args = arguments();
                e = make_expr(span(e->pos, prev().pos), node::Call{e, std::move(args), open});
            } else if (accept_punct(".")) {
                const Token& name = expect_ident("member name");
                e = make_expr(span(e->pos, name.pos), node::Member{e, name.text});
            } else if (same_line && accept_punct("[")) {
                auto index = expression();
                expect_punct("]");
                e = make_expr(span(e->pos, prev().pos), node::Index{e, index});
            } else {
                return e;
            }
        }
    }

    ExprPtr primary() {
        const Token& t = cur();
        const Pos start = t.pos;
        switch (t.kind) {
        case Tok::integer: ++k_; return make_expr(start, node::Literal{Value(t.int_value)});
        case Tok::floating: ++k_; return make_expr(start, node::Literal{Value(t.float_value)});
        case Tok::string: ++k_; return make_expr(start, node::Literal{Value(t.text)});
        case Tok::ident: ++k_; return make_expr(start, node::Ident{t.text});
        case Tok::keyword:
            if (t.text == "true" || t.text == "false") {
                ++k_;
                return make_expr(start, node::Literal{Value(t.text == "true")});
            }
            if (t.text == "null") {
                ++k_;
                return make_expr(start, node::Literal{Value()});
            }
            if (t.text == "new") {
                ++k_;
                const Token& name = expect_ident("class name");
                const Pos name_pos = name.pos;
                const Pos open = expect_punct("(").pos;
                auto args = arguments();
                return make_expr(span(start, prev().pos),
                                 node::New{name.text, name_pos, std::move(args), open});
            }
            break;
        case Tok::punct:
            if (t.text == "(") {
                ++k_;
                auto inner = expression();
                expect_punct(")");
                return inner;
            }
            if (t.text == "[") {
                ++k_;
                node::ListLit list;
                while (!is_punct("]")) {
                    list.items.push_back(expression());
                    if (!accept_punct(",")) break;
                }
                expect_punct("]");
                return make_expr(span(start, prev().pos), std::move(list));
            }
            if (t.text == "{") {
                ++k_;
                node::MapLit map;
                while (!is_punct("}")) {
                    if (cur().kind != Tok::string) fail("map keys must be string literals");
                    std::string key = cur().text;
                    ++k_;
                    expect_punct(":");
                    map.entries.emplace_back(std::move(key), expression());
                    if (!accept_punct(",")) break;
                }
                expect_punct("}");
                return make_expr(span(start, prev().pos), std::move(map));
            }
            break;
        case Tok::end: break;
        }
        fail("unexpected " + describe(t));
    }
};

} // namespace

Program parse(std::string_view source) {
    return Parser(Lexer(source).run()).program();
}

} // namespace kffi::cellscript

#pragma once

#include "kffi/cellscript/value.hpp"

#include <cstddef>
#include <memory>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace kffi::cellscript {

/// Byte range [begin, end) in the cell source plus the 1-based start position.
struct Pos {
    std::size_t begin = 0;
    std::size_t end = 0;
    int line = 1;
    int column = 1;
};

struct Expr;
struct Stmt;
using ExprPtr = std::shared_ptr<const Expr>;
using StmtPtr = std::shared_ptr<const Stmt>;
using Block = std::vector<StmtPtr>;

struct Arg {
    ExprPtr value;
    bool spread = false;
};

enum class BinOp { add, sub, mul, div, mod, eq, ne, lt, gt, le, ge, logical_and, logical_or };
enum class UnOp { neg, logical_not };

namespace node {
struct Literal { Value value; };
struct Ident { std::string name; };
struct ListLit { std::vector<ExprPtr> items; };
struct MapLit { std::vector<std::pair<std::string, ExprPtr>> entries; };
struct Unary { UnOp op; ExprPtr operand; };
struct Binary { BinOp op; ExprPtr lhs; ExprPtr rhs; };
struct Call { ExprPtr callee; std::vector<Arg> args; Pos open_paren; };
struct Member { ExprPtr object; std::string name; };
struct Index { ExprPtr object; ExprPtr index; };
/// `new Name(args)`; the expression's own pos starts at the keyword.
struct New { std::string class_name; Pos name_pos; std::vector<Arg> args; Pos open_paren; };
} // namespace node

struct Expr {
    Pos pos;
    std::variant<node::Literal, node::Ident, node::ListLit, node::MapLit, node::Unary,
                 node::Binary, node::Call, node::Member, node::Index, node::New>
        node;
};

struct FnDecl {
    std::string name;
    Pos name_pos;
    std::vector<std::string> params;
    Block body;
};

namespace node {
struct ExprStmt { ExprPtr expr; };
struct Assign { ExprPtr target; ExprPtr value; };
struct FnDef { std::shared_ptr<const FnDecl> decl; };
struct ClassDef { std::string name; Pos name_pos; std::vector<std::shared_ptr<const FnDecl>> methods; };
struct Return { ExprPtr value; };
/// `release e`; `keyword` covers the keyword itself.
struct Release { ExprPtr value; Pos keyword; };
struct If { ExprPtr cond; Block then_block; Block else_block; };
struct While { ExprPtr cond; Block body; };
} // namespace node

struct Stmt {
    Pos pos;
    std::variant<node::ExprStmt, node::Assign, node::FnDef, node::ClassDef, node::Return,
                 node::Release, node::If, node::While>
        node;
};

struct Program {
    Block statements;
};

/// Throws kffi::SyntaxError with line/column.
Program parse(std::string_view source);

} // namespace kffi::cellscript

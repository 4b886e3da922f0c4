#include "kffi/rewriter.hpp"

#include "kffi/cellscript/ast.hpp"
#include "kffi/errors.hpp"

#include <algorithm>
#include <cctype>

namespace kffi {

using namespace cellscript;

std::string_view to_string(UsageKind kind) noexcept {
    switch (kind) {
    case UsageKind::call: return "call";
    case UsageKind::var_ref: return "var_ref";
    case UsageKind::method_call: return "method_call";
    case UsageKind::instantiate: return "instantiate";
    case UsageKind::release: return "release";
    }
    return "unknown";
}

namespace {

std::string quote(const std::string& s) { return json(s).dump(); }

struct Edit {
    std::size_t begin;
    std::size_t end;
    std::string text;
};

using Names = std::set<std::string>;

class Rewriter {
public:
    Rewriter(std::string_view source, std::string client_kernel, const RegistrySnapshot& snapshot,
             bool report_unresolved)
        : src_(source), client_(std::move(client_kernel)), snapshot_(snapshot),
          report_unresolved_(report_unresolved) {}

    void run(const Program& program, Names top_bound) {
        Names cell_defs = top_bound;
        for (const auto& stmt : program.statements) collect_definitions(*stmt, cell_defs);
        cell_defs_ = std::move(cell_defs);
        for (const auto& stmt : program.statements) statement(*stmt, top_bound);
    }

    RewritePlan finish() {
        std::stable_sort(edits_.begin(), edits_.end(), [](const Edit& a, const Edit& b) {
            if (a.begin != b.begin) return a.begin < b.begin;
            return (a.end == a.begin) && (b.end != b.begin);
        });
        RewritePlan plan;
        plan.original = std::string(src_);
        std::size_t cursor = 0;
        for (const auto& e : edits_) {
            plan.transformed.append(src_.substr(cursor, e.begin - cursor));
            plan.transformed += e.text;
            cursor = e.end;
        }
        plan.transformed.append(src_.substr(cursor));
        std::sort(sites_.begin(), sites_.end(),
                  [](const RewriteSite& a, const RewriteSite& b) { return a.begin < b.begin; });
        plan.sites = std::move(sites_);
        return plan;
    }

private:
    static void collect_definitions(const Stmt& stmt, Names& out) {
        if (const auto* s = std::get_if<node::FnDef>(&stmt.node)) out.insert(s->decl->name);
        if (const auto* s = std::get_if<node::ClassDef>(&stmt.node)) out.insert(s->name);
        if (const auto* s = std::get_if<node::Assign>(&stmt.node)) {
            if (const auto* id = std::get_if<node::Ident>(&s->target->node)) out.insert(id->name);
        }
    }

    std::optional<SymbolRecord> foreign(const std::string& name, const Names& bound) const {
        if (bound.count(name) != 0 || name.rfind("kffi_", 0) == 0) return std::nullopt;
        try {
            return snapshot_.resolve(name, client_);
        } catch (const NotFound&) {
            if (report_unresolved_ && fn_depth_ == 0) throw;
            return std::nullopt;
        }
    }

    void block(const Block& stmts, Names& bound) {
        for (const auto& s : stmts) statement(*s, bound);
    }

    void function_body(const FnDecl& decl) {
        Names bound = cell_defs_;
        bound.insert(decl.params.begin(), decl.params.end());
        ++fn_depth_;
        block(decl.body, bound);
        --fn_depth_;
    }

    void statement(const Stmt& stmt, Names& bound) {
        using namespace node;
        if (const auto* s = std::get_if<ExprStmt>(&stmt.node)) {
            expr(*s->expr, bound);
        } else if (const auto* s = std::get_if<Assign>(&stmt.node)) {
            expr(*s->value, bound);
            if (const auto* id = std::get_if<Ident>(&s->target->node)) {
                bound.insert(id->name);
            } else {
                expr(*s->target, bound);
            }
        } else if (const auto* s = std::get_if<FnDef>(&stmt.node)) {
            bound.insert(s->decl->name);
            function_body(*s->decl);
        } else if (const auto* s = std::get_if<ClassDef>(&stmt.node)) {
            bound.insert(s->name);
            for (const auto& m : s->methods) function_body(*m);
        } else if (const auto* s = std::get_if<Return>(&stmt.node)) {
            if (s->value) expr(*s->value, bound);
        } else if (const auto* s = std::get_if<Release>(&stmt.node)) {
            auto after = s->keyword.end;
            while (after < src_.size() && (src_[after] == ' ' || src_[after] == '\t')) ++after;
            edits_.push_back({s->keyword.begin, after, "kffi_release("});
            edits_.push_back({stmt.pos.end, stmt.pos.end, ")"});
            RewriteSite site;
            site.begin = s->keyword.begin;
            site.end = s->keyword.end;
            site.kind = UsageKind::release;
            sites_.push_back(std::move(site));
            expr(*s->value, bound);
        } else if (const auto* s = std::get_if<If>(&stmt.node)) {
            expr(*s->cond, bound);
            block(s->then_block, bound);
            block(s->else_block, bound);
        } else if (const auto* s = std::get_if<While>(&stmt.node)) {
            expr(*s->cond, bound);
            block(s->body, bound);
        }
    }

    void args(const std::vector<Arg>& list, Names& bound) {
        for (const auto& a : list) expr(*a.value, bound);
    }

    void check_arity(const SymbolRecord& rec, const std::vector<Arg>& list, const Pos& pos) const {
        if (rec.variadic) return;
        if (std::any_of(list.begin(), list.end(), [](const Arg& a) { return a.spread; })) return;
        if (list.size() == rec.params.size()) return;
        throw ArityMismatch(rec.qualified_name() + " expects " + std::to_string(rec.params.size()) +
                            " argument(s) but the call at line " + std::to_string(pos.line) +
                            " passes " + std::to_string(list.size()));
    }

    bool only_space(std::size_t from, std::size_t to) const {
        for (std::size_t i = from; i < to; ++i) {
            if (!std::isspace(static_cast<unsigned char>(src_[i]))) return false;
        }
        return true;
    }

    std::string helper_head(std::string_view helper, const SymbolRecord& rec, bool has_args) const {
        std::string out(helper);
        out += "(" + quote(rec.kernel_id) + ", " + quote(rec.name);
        if (has_args) out += ", ";
        return out;
    }

    void add_site(std::size_t begin, std::size_t end, UsageKind kind, const SymbolRecord& rec) {
        RewriteSite site;
        site.begin = begin;
        site.end = end;
        site.kind = kind;
        site.symbol = rec;
        sites_.push_back(std::move(site));
    }

    /// Returns true when `e` statically evaluates to a foreign proxy.
    bool expr(const Expr& e, Names& bound) {
        using namespace node;
        if (const auto* n = std::get_if<Ident>(&e.node)) {
            auto rec = foreign(n->name, bound);
            if (!rec) return false;
            edits_.push_back({e.pos.begin, e.pos.end,
                              "kffi_var(" + quote(rec->kernel_id) + ", " + quote(rec->name) + ")"});
            add_site(e.pos.begin, e.pos.end, UsageKind::var_ref, *rec);
            return true;
        }
        if (const auto* n = std::get_if<ListLit>(&e.node)) {
            for (const auto& item : n->items) expr(*item, bound);
            return false;
        }
        if (const auto* n = std::get_if<MapLit>(&e.node)) {
            for (const auto& [k, v] : n->entries) expr(*v, bound);
            return false;
        }
        if (const auto* n = std::get_if<Unary>(&e.node)) {
            expr(*n->operand, bound);
            return false;
        }
        if (const auto* n = std::get_if<Binary>(&e.node)) {
            expr(*n->lhs, bound);
            expr(*n->rhs, bound);
            return false;
        }
        if (const auto* n = std::get_if<Member>(&e.node)) {
            expr(*n->object, bound);
            return false;
        }
        if (const auto* n = std::get_if<Index>(&e.node)) {
            expr(*n->object, bound);
            expr(*n->index, bound);
            return false;
        }
        if (const auto* n = std::get_if<New>(&e.node)) {
            auto rec = foreign(n->class_name, bound);
            if (rec && rec->kind == SymbolKind::class_type) {
                check_arity(*rec, n->args, e.pos);
                edits_.push_back({e.pos.begin, n->open_paren.end,
                                  helper_head("kffi_new", *rec, !n->args.empty())});
                add_site(e.pos.begin, n->open_paren.end, UsageKind::instantiate, *rec);
                args(n->args, bound);
                return true;
            }
            args(n->args, bound);
            return false;
        }
        if (const auto* n = std::get_if<Call>(&e.node)) return call(e, *n, bound);
        return false;
    }

    bool call(const Expr& e, const node::Call& n, Names& bound) {
        using namespace node;
        if (const auto* id = std::get_if<Ident>(&n.callee->node)) {
            auto rec = foreign(id->name, bound);
            const bool adjacent = only_space(n.callee->pos.end, n.open_paren.begin);
            if (rec && adjacent && rec->kind != SymbolKind::variable) {
                check_arity(*rec, n.args, e.pos);
                const bool cls = rec->kind == SymbolKind::class_type;
                edits_.push_back({n.callee->pos.begin, n.open_paren.end,
                                  helper_head(cls ? "kffi_new" : "kffi_call", *rec, !n.args.empty())});
                add_site(n.callee->pos.begin, n.open_paren.end,
                         cls ? UsageKind::instantiate : UsageKind::call, *rec);
                args(n.args, bound);
                return cls;
            }
        }
        if (const auto* m = std::get_if<Member>(&n.callee->node)) {
            if (expr(*m->object, bound)) {
                RewriteSite site;
                site.begin = m->object->pos.end;
                site.end = n.open_paren.end;
                site.kind = UsageKind::method_call;
                site.method = m->name;
                sites_.push_back(std::move(site));
            }
            args(n.args, bound);
            return false;
        }
        expr(*n.callee, bound);
        args(n.args, bound);
        return false;
    }

    std::string_view src_;
    std::string client_;
    const RegistrySnapshot& snapshot_;
    bool report_unresolved_;
    int fn_depth_ = 0;
    Names cell_defs_;
    std::vector<Edit> edits_;
    std::vector<RewriteSite> sites_;
};

} // namespace

RewritePlan rewrite_cell(std::string_view source, const std::string& client_lang,
                         const std::string& client_kernel, const RegistrySnapshot& snapshot,
                         const RewriteOptions& options) {
    if (client_lang != "cellscript") {
        throw UnsupportedLanguage("client cells in '" + client_lang + "' are not rewritten");
    }
    const auto program = parse(source);
    Names bound;
    if (options.local_names) {
        bound = *options.local_names;
    } else {
        for (const auto& rec : snapshot.records()) {
            if (rec.kernel_id == client_kernel) bound.insert(rec.name);
        }
    }
    Rewriter rw(source, client_kernel, snapshot, options.report_unresolved);
    rw.run(program, std::move(bound));
    return rw.finish();
}

Ir generate_ir(const Usage& usage, codec::Context& client) {
    switch (usage.kind) {
    case UsageKind::call: return Ir::function(usage.name, codec::encode_args(usage.args, client));
    case UsageKind::var_ref: return Ir::variable(usage.name);
    case UsageKind::instantiate: return Ir::instantiate(usage.name, codec::encode_args(usage.args, client));
    case UsageKind::method_call:
        return Ir::method_call(usage.name, usage.method, codec::encode_args(usage.args, client));
    case UsageKind::release: return Ir::remove(usage.name);
    }
    throw UnsupportedIrKind("unknown usage kind");
}

} // namespace kffi

#include "kffi/cellscript/interpreter.hpp"

#include <chrono>
#include <iostream>
#include <limits>
#include <thread>

namespace kffi::cellscript {

namespace {

thread_local int t_call_depth = 0;

std::string position_suffix(int line, int column, const std::string& origin) {
    std::string out = " (line " + std::to_string(line) + ", column " + std::to_string(column) + ")";
    if (!origin.empty()) out += " [kernel " + origin + "]";
    return out;
}

[[noreturn]] void raise(const std::string& ename, const std::string& message, const Pos& pos) {
    throw ScriptError(ename, message, pos.line, pos.column);
}

struct DepthGuard {
    explicit DepthGuard(int limit, const Pos& pos) {
        if (++t_call_depth > limit) {
            --t_call_depth;
            raise("RecursionError", "maximum call depth " + std::to_string(limit) + " exceeded", pos);
        }
    }
    ~DepthGuard() { --t_call_depth; }
    DepthGuard(const DepthGuard&) = delete;
    DepthGuard& operator=(const DepthGuard&) = delete;
};

/// Runs `fn` and tags any non-script error with `pos`.
template <typename Fn>
Value positioned(const Pos& pos, Fn&& fn) {
    try {
        return fn();
    } catch (const ScriptError&) {
        throw;
    } catch (const ForeignError& e) {
        throw ScriptError(e.ename(), e.evalue(), pos.line, pos.column, e.origin_kernel(), e.trace());
    } catch (const Error& e) {
        throw ScriptError(e.ename(), e.what(), pos.line, pos.column);
    }
}

bool is_number(const Value& v) { return v.is<std::int64_t>() || v.is<double>(); }

double as_double(const Value& v) {
    return v.is<double>() ? v.as<double>() : static_cast<double>(v.as<std::int64_t>());
}

std::int64_t expect_int(const Value& v, const char* what) {
    if (!v.is<std::int64_t>()) throw Error("TypeError", std::string(what) + " must be an int, got " + type_name(v));
    return v.as<std::int64_t>();
}

} // namespace

ScriptError::ScriptError(std::string ename, std::string message, int line, int column,
                         std::string origin_kernel, std::string trace)
    : Error(ename, ename + ": " + message + position_suffix(line, column, origin_kernel)),
      message_(std::move(message)), line_(line), column_(column),
      origin_kernel_(std::move(origin_kernel)), trace_(std::move(trace)) {}

Interpreter::Interpreter(InterpreterHooks hooks) : hooks_(std::move(hooks)) {
    define_builtin("print", [this](std::span<Value> args) {
        std::string line;
        for (std::size_t i = 0; i < args.size(); ++i) {
            if (i) line += ' ';
            line += display(args[i]);
        }
        if (hooks_.output) {
            hooks_.output(line);
        } else {
            std::cout << line << '\n';
        }
        return Value();
    });
    define_builtin("len", [](std::span<Value> args) -> Value {
        if (args.size() != 1) throw Error("TypeError", "len expects 1 argument");
        const Value& v = args[0];
        if (v.is<std::string>()) return static_cast<std::int64_t>(v.as<std::string>().size());
        if (v.is<ListPtr>()) return static_cast<std::int64_t>(v.as<ListPtr>()->size());
        if (v.is<MapPtr>()) return static_cast<std::int64_t>(v.as<MapPtr>()->size());
        throw Error("TypeError", "len() of " + type_name(v));
    });
    define_builtin("str", [](std::span<Value> args) -> Value {
        if (args.size() != 1) throw Error("TypeError", "str expects 1 argument");
        return display(args[0]);
    });
    define_builtin("type", [](std::span<Value> args) -> Value {
        if (args.size() != 1) throw Error("TypeError", "type expects 1 argument");
        return type_name(args[0]);
    });
    define_builtin("push", [](std::span<Value> args) -> Value {
        if (args.size() != 2 || !args[0].is<ListPtr>()) {
            throw Error("TypeError", "push expects (list, value)");
        }
        args[0].as<ListPtr>()->push_back(args[1]);
        return Value();
    });
    define_builtin("keys", [](std::span<Value> args) -> Value {
        if (args.size() != 1 || !args[0].is<MapPtr>()) throw Error("TypeError", "keys expects a map");
        List out;
        for (const auto& [k, v] : *args[0].as<MapPtr>()) out.emplace_back(k);
        return out;
    });
    define_builtin("range", [](std::span<Value> args) -> Value {
        if (args.size() != 1) throw Error("TypeError", "range expects 1 argument");
        const auto n = expect_int(args[0], "range bound");
        List out;
        for (std::int64_t i = 0; i < n; ++i) out.emplace_back(i);
        return out;
    });
    define_builtin("sleep", [](std::span<Value> args) -> Value {
        if (args.size() != 1) throw Error("TypeError", "sleep expects milliseconds");
        std::this_thread::sleep_for(std::chrono::milliseconds(expect_int(args[0], "sleep duration")));
        return Value();
    });
}

void Interpreter::define_builtin(const std::string& name, NativeFn fn) {
    builtins_[name] = Value(std::make_shared<const Builtin>(Builtin{name, std::move(fn)}));
}

std::vector<std::string> Interpreter::builtin_names() const {
    std::vector<std::string> out;
    out.reserve(builtins_.size());
    for (const auto& [name, fn] : builtins_) out.push_back(name);
    return out;
}

void Interpreter::set_global(const std::string& name, Value value) {
    globals_[name] = std::move(value);
}

std::optional<Value> Interpreter::global(const std::string& name) const {
    auto it = globals_.find(name);
    if (it == globals_.end()) return std::nullopt;
    return it->second;
}

Value Interpreter::run(std::string_view source) {
    return run(parse(source));
}

Value Interpreter::run(const Program& program) {
    Value last;
    for (const auto& stmt : program.statements) {
        last = Value();
        if (const auto* e = std::get_if<node::ExprStmt>(&stmt->node)) {
            last = eval(*e->expr, nullptr);
            continue;
        }
        if (exec(*stmt, nullptr) == Flow::ret) {
            raise("SyntaxError", "'return' outside function", stmt->pos);
        }
    }
    return last;
}

Interpreter::Flow Interpreter::exec_block(const Block& block, Frame* frame) {
    for (const auto& stmt : block) {
        if (exec(*stmt, frame) == Flow::ret) return Flow::ret;
    }
    return Flow::normal;
}

Interpreter::Flow Interpreter::exec(const Stmt& stmt, Frame* frame) {
    if (const auto* s = std::get_if<node::ExprStmt>(&stmt.node)) {
        eval(*s->expr, frame);
    } else if (const auto* s = std::get_if<node::Assign>(&stmt.node)) {
        assign(*s->target, eval(*s->value, frame), frame);
    } else if (const auto* s = std::get_if<node::FnDef>(&stmt.node)) {
        Value fn(Function{s->decl});
        if (frame) {
            frame->locals[s->decl->name] = std::move(fn);
        } else {
            globals_[s->decl->name] = std::move(fn);
        }
    } else if (const auto* s = std::get_if<node::ClassDef>(&stmt.node)) {
        auto cls = std::make_shared<Class>();
        cls->name = s->name;
        for (const auto& m : s->methods) cls->methods[m->name] = m;
        Value v(ClassPtr(std::move(cls)));
        if (frame) {
            frame->locals[s->name] = std::move(v);
        } else {
            globals_[s->name] = std::move(v);
        }
    } else if (const auto* s = std::get_if<node::Return>(&stmt.node)) {
        if (!frame) raise("SyntaxError", "'return' outside function", stmt.pos);
        frame->result = s->value ? eval(*s->value, frame) : Value();
        return Flow::ret;
    } else if (const auto* s = std::get_if<node::Release>(&stmt.node)) {
        Value v = eval(*s->value, frame);
        if (hooks_.release) positioned(stmt.pos, [&] { hooks_.release(v); return Value(); });
    } else if (const auto* s = std::get_if<node::If>(&stmt.node)) {
        if (truthy(eval(*s->cond, frame))) return exec_block(s->then_block, frame);
        return exec_block(s->else_block, frame);
    } else if (const auto* s = std::get_if<node::While>(&stmt.node)) {
        while (truthy(eval(*s->cond, frame))) {
            if (exec_block(s->body, frame) == Flow::ret) return Flow::ret;
        }
    }
    return Flow::normal;
}

void Interpreter::assign(const Expr& target, Value value, Frame* frame) {
    if (const auto* id = std::get_if<node::Ident>(&target.node)) {
        if (frame) {
            frame->locals[id->name] = std::move(value);
            return;
        }
        auto it = globals_.find(id->name);
        if (it == globals_.end()) {
            globals_.emplace(id->name, std::move(value));
            return;
        }
        Value previous = std::move(it->second);
        it->second = std::move(value);
        if (hooks_.rebind && previous.is<ProxyPtr>()) {
            positioned(target.pos, [&] { hooks_.rebind(id->name, previous); return Value(); });
        }
        return;
    }
    if (const auto* m = std::get_if<node::Member>(&target.node)) {
        Value obj = eval(*m->object, frame);
        if (obj.is<InstancePtr>()) {
            obj.as<InstancePtr>()->fields[m->name] = std::move(value);
            return;
        }
        if (obj.is<ProxyPtr>()) {
            raise("TypeError", "cannot assign attributes of a foreign object; use a method", target.pos);
        }
        raise("TypeError", "cannot set attribute '" + m->name + "' on " + type_name(obj), target.pos);
    }
    const auto& ix = std::get<node::Index>(target.node);
    Value obj = eval(*ix.object, frame);
    Value key = eval(*ix.index, frame);
    if (obj.is<ListPtr>()) {
        auto& list = *obj.as<ListPtr>();
        if (!key.is<std::int64_t>()) raise("TypeError", "list index must be an int", target.pos);
        const auto i = key.as<std::int64_t>();
        if (i < 0 || static_cast<std::size_t>(i) >= list.size()) raise("IndexError", "list index out of range", target.pos);
        list[static_cast<std::size_t>(i)] = std::move(value);
    } else if (obj.is<MapPtr>()) {
        if (!key.is<std::string>()) raise("TypeError", "map keys must be strings", target.pos);
        (*obj.as<MapPtr>())[key.as<std::string>()] = std::move(value);
    } else {
        raise("TypeError", type_name(obj) + " does not support item assignment", target.pos);
    }
}

Value Interpreter::lookup(const std::string& name, const Pos& pos, Frame* frame) const {
    if (frame) {
        auto it = frame->locals.find(name);
        if (it != frame->locals.end()) return it->second;
    }
    if (auto it = globals_.find(name); it != globals_.end()) return it->second;
    if (auto it = builtins_.find(name); it != builtins_.end()) return it->second;
    if (hooks_.unbound) {
        if (auto v = hooks_.unbound(name)) return *v;
    }
    raise("NameError", "undefined identifier '" + name + "'", pos);
}

std::vector<Value> Interpreter::eval_args(const std::vector<Arg>& args, Frame* frame) {
    std::vector<Value> out;
    out.reserve(args.size());
    for (const auto& arg : args) {
        Value v = eval(*arg.value, frame);
        if (arg.spread) {
            if (!v.is<ListPtr>()) raise("TypeError", "can only spread a list, got " + type_name(v), arg.value->pos);
            const auto& items = *v.as<ListPtr>();
            out.insert(out.end(), items.begin(), items.end());
        } else {
            out.push_back(std::move(v));
        }
    }
    return out;
}

Value Interpreter::eval(const Expr& expr, Frame* frame) {
    using namespace node;
    if (const auto* e = std::get_if<Literal>(&expr.node)) return e->value;
    if (const auto* e = std::get_if<Ident>(&expr.node)) return lookup(e->name, expr.pos, frame);
    if (const auto* e = std::get_if<ListLit>(&expr.node)) {
        List items;
        items.reserve(e->items.size());
        for (const auto& item : e->items) items.push_back(eval(*item, frame));
        return Value(std::move(items));
    }
    if (const auto* e = std::get_if<MapLit>(&expr.node)) {
        Map entries;
        for (const auto& [k, v] : e->entries) entries[k] = eval(*v, frame);
        return Value(std::move(entries));
    }
    if (const auto* e = std::get_if<Unary>(&expr.node)) {
        Value v = eval(*e->operand, frame);
        if (e->op == UnOp::logical_not) return !truthy(v);
        if (v.is<std::int64_t>()) {
            if (v.as<std::int64_t>() == std::numeric_limits<std::int64_t>::min()) {
                raise("OverflowError", "integer negation overflows", expr.pos);
            }
            return -v.as<std::int64_t>();
        }
        if (v.is<double>()) return -v.as<double>();
        raise("TypeError", "bad operand type for unary -: " + type_name(v), expr.pos);
    }
    if (const auto* e = std::get_if<Binary>(&expr.node)) {
        if (e->op == BinOp::logical_and) {
            Value lhs = eval(*e->lhs, frame);
            return truthy(lhs) ? eval(*e->rhs, frame) : lhs;
        }
        if (e->op == BinOp::logical_or) {
            Value lhs = eval(*e->lhs, frame);
            return truthy(lhs) ? lhs : eval(*e->rhs, frame);
        }
        Value lhs = eval(*e->lhs, frame);
        Value rhs = eval(*e->rhs, frame);
        return positioned(expr.pos, [&] { return binary(e->op, lhs, rhs); });
    }
    if (const auto* e = std::get_if<Call>(&expr.node)) return eval_call(expr, *e, frame);
    if (const auto* e = std::get_if<Member>(&expr.node)) {
        Value obj = eval(*e->object, frame);
        if (obj.is<InstancePtr>()) {
            const auto& inst = *obj.as<InstancePtr>();
            auto it = inst.fields.find(e->name);
            if (it != inst.fields.end()) return it->second;
            raise("AttributeError", inst.cls->name + " object has no attribute '" + e->name + "'", expr.pos);
        }
        if (obj.is<ProxyPtr>()) {
            raise("TypeError", "attribute access on a foreign object is not forwarded; use a method", expr.pos);
        }
        raise("AttributeError", type_name(obj) + " has no attribute '" + e->name + "'", expr.pos);
    }
    if (const auto* e = std::get_if<Index>(&expr.node)) {
        Value obj = eval(*e->object, frame);
        Value key = eval(*e->index, frame);
        if (obj.is<ListPtr>() || obj.is<std::string>()) {
            if (!key.is<std::int64_t>()) raise("TypeError", "index must be an int", expr.pos);
            const auto i = key.as<std::int64_t>();
            const std::size_t size = obj.is<ListPtr>() ? obj.as<ListPtr>()->size() : obj.as<std::string>().size();
            if (i < 0 || static_cast<std::size_t>(i) >= size) raise("IndexError", "index out of range", expr.pos);
            if (obj.is<ListPtr>()) return (*obj.as<ListPtr>())[static_cast<std::size_t>(i)];
            return std::string(1, obj.as<std::string>()[static_cast<std::size_t>(i)]);
        }
        if (obj.is<MapPtr>()) {
            if (!key.is<std::string>()) raise("TypeError", "map keys must be strings", expr.pos);
            const auto& map = *obj.as<MapPtr>();
            auto it = map.find(key.as<std::string>());
            if (it == map.end()) raise("KeyError", repr(key), expr.pos);
            return it->second;
        }
        raise("TypeError", type_name(obj) + " is not indexable", expr.pos);
    }
    const auto& e = std::get<New>(expr.node);
    Value cls = lookup(e.class_name, e.name_pos, frame);
    if (!cls.is<ClassPtr>()) raise("TypeError", "'" + e.class_name + "' is not a class", e.name_pos);
    auto args = eval_args(e.args, frame);
    DepthGuard guard(max_call_depth_, expr.pos);
    return positioned(expr.pos, [&] { return instantiate(cls.as<ClassPtr>(), std::move(args)); });
}

Value Interpreter::eval_call(const Expr& expr, const node::Call& call, Frame* frame) {
    if (const auto* member = std::get_if<node::Member>(&call.callee->node)) {
        Value receiver = eval(*member->object, frame);
        auto args = eval_args(call.args, frame);
        DepthGuard guard(max_call_depth_, expr.pos);
        return positioned(expr.pos, [&] { return call_method(receiver, member->name, std::move(args)); });
    }
    Value callee = eval(*call.callee, frame);
    auto args = eval_args(call.args, frame);
    DepthGuard guard(max_call_depth_, expr.pos);
    return positioned(expr.pos, [&] { return this->call(callee, std::move(args)); });
}

Value Interpreter::call(const Value& callee, std::vector<Value> args) {
    if (callee.is<Function>()) return call_function(callee.as<Function>(), std::move(args));
    if (callee.is<ClassPtr>()) return instantiate(callee.as<ClassPtr>(), std::move(args));
    if (callee.is<BuiltinPtr>()) return callee.as<BuiltinPtr>()->fn(std::span<Value>(args));
    throw Error("TypeError", "'" + type_name(callee) + "' value is not callable");
}

Value Interpreter::call_function(const Function& fn, std::vector<Value> args) {
    const auto& decl = *fn.decl;
    if (args.size() != decl.params.size()) {
        throw Error("TypeError", decl.name + "() takes " + std::to_string(decl.params.size()) +
                                     " argument(s) but " + std::to_string(args.size()) + " were given");
    }
    Frame frame;
    for (std::size_t i = 0; i < args.size(); ++i) frame.locals[decl.params[i]] = std::move(args[i]);
    exec_block(decl.body, &frame);
    return std::move(frame.result);
}

Value Interpreter::call_method(const Value& receiver, const std::string& method, std::vector<Value> args) {
    if (receiver.is<InstancePtr>()) {
        const auto& inst = receiver.as<InstancePtr>();
        auto it = inst->cls->methods.find(method);
        if (it != inst->cls->methods.end()) {
            args.insert(args.begin(), receiver);
            return call_function(Function{it->second}, std::move(args));
        }
        auto field = inst->fields.find(method);
        if (field != inst->fields.end()) return call(field->second, std::move(args));
        throw Error("AttributeError", inst->cls->name + " object has no method '" + method + "'");
    }
    if (receiver.is<ProxyPtr>()) {
        if (!hooks_.proxy_method) throw Error("TypeError", "foreign objects are not available in this kernel");
        return hooks_.proxy_method(receiver.as<ProxyPtr>(), method, std::move(args));
    }
    throw Error("AttributeError", type_name(receiver) + " has no method '" + method + "'");
}

Value Interpreter::instantiate(const ClassPtr& cls, std::vector<Value> args) {
    auto inst = std::make_shared<Instance>();
    inst->cls = cls;
    Value self(inst);
    auto init = cls->methods.find("init");
    if (init != cls->methods.end()) {
        args.insert(args.begin(), self);
        call_function(Function{init->second}, std::move(args));
    } else if (!args.empty()) {
        throw Error("TypeError", cls->name + "() takes no arguments");
    }
    return self;
}

Value Interpreter::binary(BinOp op, const Value& lhs, const Value& rhs) {
    if (lhs.is<ProxyPtr>() || rhs.is<ProxyPtr>()) {
        if (op == BinOp::eq) return equals(lhs, rhs);
        if (op == BinOp::ne) return !equals(lhs, rhs);
        throw Error("TypeError", "foreign objects are opaque to arithmetic");
    }
    switch (op) {
    case BinOp::eq: return equals(lhs, rhs);
    case BinOp::ne: return !equals(lhs, rhs);
    default: break;
    }

    if (lhs.is<std::int64_t>() && rhs.is<std::int64_t>()) {
        const auto a = lhs.as<std::int64_t>();
        const auto b = rhs.as<std::int64_t>();
        std::int64_t r = 0;
        switch (op) {
        case BinOp::add:
            if (__builtin_add_overflow(a, b, &r)) throw Error("OverflowError", "integer overflow");
            return r;
        case BinOp::sub:
            if (__builtin_sub_overflow(a, b, &r)) throw Error("OverflowError", "integer overflow");
            return r;
        case BinOp::mul:
            if (__builtin_mul_overflow(a, b, &r)) throw Error("OverflowError", "integer overflow");
            return r;
        case BinOp::div:
        case BinOp::mod:
            if (b == 0) throw Error("ZeroDivisionError", "division by zero");
            if (a == std::numeric_limits<std::int64_t>::min() && b == -1) {
                throw Error("OverflowError", "integer overflow");
            }
            return op == BinOp::div ? a / b : a % b;
        case BinOp::lt: return a < b;
        case BinOp::gt: return a > b;
        case BinOp::le: return a <= b;
        case BinOp::ge: return a >= b;
        default: break;
        }
    }
    if (is_number(lhs) && is_number(rhs)) {
        const double a = as_double(lhs);
        const double b = as_double(rhs);
        switch (op) {
        case BinOp::add: return a + b;
        case BinOp::sub: return a - b;
        case BinOp::mul: return a * b;
        case BinOp::div:
            if (b == 0.0) throw Error("ZeroDivisionError", "division by zero");
            return a / b;
        case BinOp::mod: throw Error("TypeError", "% requires int operands");
        case BinOp::lt: return a < b;
        case BinOp::gt: return a > b;
        case BinOp::le: return a <= b;
        case BinOp::ge: return a >= b;
        default: break;
        }
    }
    if (lhs.is<std::string>() && rhs.is<std::string>()) {
        const auto& a = lhs.as<std::string>();
        const auto& b = rhs.as<std::string>();
        switch (op) {
        case BinOp::add: return a + b;
        case BinOp::lt: return a < b;
        case BinOp::gt: return a > b;
        case BinOp::le: return a <= b;
        case BinOp::ge: return a >= b;
        default: break;
        }
    }
    if (op == BinOp::add && lhs.is<ListPtr>() && rhs.is<ListPtr>()) {
        List out = *lhs.as<ListPtr>();
        const auto& tail = *rhs.as<ListPtr>();
        out.insert(out.end(), tail.begin(), tail.end());
        return out;
    }
    throw Error("TypeError", "unsupported operand types: " + type_name(lhs) + " and " + type_name(rhs));
}

} // namespace kffi::cellscript

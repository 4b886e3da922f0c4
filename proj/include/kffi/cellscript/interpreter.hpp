#pragma once

#include "kffi/cellscript/ast.hpp"
#include "kffi/errors.hpp"

#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace kffi::cellscript {

/// Runtime error raised while executing cellscript. Carries the source
/// position and, for errors that crossed a kernel boundary, the kernel that
/// raised them.
class ScriptError : public Error {
public:
    ScriptError(std::string ename, std::string message, int line, int column,
                std::string origin_kernel = {}, std::string trace = {});

    const std::string& message() const noexcept { return message_; }
    int line() const noexcept { return line_; }
    int column() const noexcept { return column_; }
    const std::string& origin_kernel() const noexcept { return origin_kernel_; }
    const std::string& trace() const noexcept { return trace_; }

private:
    std::string message_;
    int line_;
    int column_;
    std::string origin_kernel_;
    std::string trace_;
};

struct InterpreterHooks {
    /// Method call on a foreign proxy.
    std::function<Value(const ProxyPtr&, const std::string& method, std::vector<Value> args)>
        proxy_method;
    /// `release e`.
    std::function<void(const Value&)> release;
    /// A top-level assignment replaced `previous` in global `name`.
    std::function<void(const std::string& name, const Value& previous)> rebind;
    /// One line of print() output, without the trailing newline.
    std::function<void(const std::string&)> output;
    /// Last chance for a name that is neither local, global nor builtin.
    std::function<std::optional<Value>(const std::string& name)> unbound;
};

/// Tree-walking evaluator holding one kernel's global environment.
///
/// Not internally synchronized: the owning kernel serializes access. Nothing in
/// the evaluator keeps a reference into the global map across a call, so the
/// owner may hand the environment to another thread while a call is blocked on
/// a foreign kernel.
class Interpreter {
public:
    using NativeFn = std::function<Value(std::span<Value>)>;

    explicit Interpreter(InterpreterHooks hooks = {});

    /// Runs a cell. Returns the value of the last statement when it is an
    /// expression statement, null otherwise.
    Value run(std::string_view source);
    Value run(const Program& program);

    Value call(const Value& callee, std::vector<Value> args);
    Value instantiate(const ClassPtr& cls, std::vector<Value> args);

    void define_builtin(const std::string& name, NativeFn fn);
    void set_global(const std::string& name, Value value);
    std::optional<Value> global(const std::string& name) const;
    const Map& globals() const noexcept { return globals_; }
    std::vector<std::string> builtin_names() const;

    InterpreterHooks& hooks() noexcept { return hooks_; }

    void set_max_call_depth(int depth) noexcept { max_call_depth_ = depth; }

private:
    struct Frame {
        std::unordered_map<std::string, Value> locals;
        Value result;
    };
    enum class Flow { normal, ret };

    Flow exec_block(const Block& block, Frame* frame);
    Flow exec(const Stmt& stmt, Frame* frame);
    Value eval(const Expr& expr, Frame* frame);
    Value eval_call(const Expr& expr, const node::Call& call, Frame* frame);
    std::vector<Value> eval_args(const std::vector<Arg>& args, Frame* frame);
    Value lookup(const std::string& name, const Pos& pos, Frame* frame) const;
    void assign(const Expr& target, Value value, Frame* frame);
    Value call_function(const Function& fn, std::vector<Value> args);
    Value call_method(const Value& receiver, const std::string& method, std::vector<Value> args);
    Value binary(BinOp op, const Value& lhs, const Value& rhs);

    InterpreterHooks hooks_;
    Map globals_;
    std::unordered_map<std::string, Value> builtins_;
    int max_call_depth_ = 200;
};

} // namespace kffi::cellscript

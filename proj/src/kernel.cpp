#include "kffi/kernel.hpp"

#include "kffi/errors.hpp"

#include <httplib.h>

#include <chrono>
#include <iostream>

namespace kffi {

using cellscript::Encoded;
using cellscript::Value;

namespace {

thread_local const CellscriptKernel* t_holder = nullptr;

const std::string& string_arg(std::span<Value> args, std::size_t i, const char* fn) {
    if (i >= args.size() || !args[i].is<std::string>()) {
        throw Error("TypeError", std::string(fn) + " expects a string as argument " + std::to_string(i + 1));
    }
    return args[i].as<std::string>();
}

void expect_count(std::span<Value> args, std::size_t n, const char* fn) {
    if (args.size() != n) {
        throw Error("TypeError", std::string(fn) + " expects " + std::to_string(n) + " argument(s), got " +
                                     std::to_string(args.size()));
    }
}

void expect_at_least(std::span<Value> args, std::size_t n, const char* fn) {
    if (args.size() < n) {
        throw Error("TypeError", std::string(fn) + " expects at least " + std::to_string(n) + " arguments");
    }
}

bool holds_ref(const Value& v, const ObjectRef& ref, int depth) {
    if (depth > codec::kDefaultMaxDepth) return false;
    if (v.is<cellscript::ProxyPtr>()) {
        const auto& other = v.as<cellscript::ProxyPtr>()->ref;
        return other.owner_kernel == ref.owner_kernel && other.varname == ref.varname;
    }
    if (v.is<cellscript::ListPtr>()) {
        for (const auto& item : *v.as<cellscript::ListPtr>()) {
            if (holds_ref(item, ref, depth + 1)) return true;
        }
    } else if (v.is<cellscript::MapPtr>()) {
        for (const auto& [k, item] : *v.as<cellscript::MapPtr>()) {
            if (holds_ref(item, ref, depth + 1)) return true;
        }
    } else if (v.is<cellscript::InstancePtr>()) {
        for (const auto& [k, item] : v.as<cellscript::InstancePtr>()->fields) {
            if (holds_ref(item, ref, depth + 1)) return true;
        }
    }
    return false;
}

} // namespace

class CellscriptKernel::Hold {
public:
    explicit Hold(CellscriptKernel& kernel) : kernel_(kernel), reentrant_(t_holder == &kernel) {
        if (reentrant_) return;
        kernel_.exec_mutex_.lock();
        previous_ = t_holder;
        t_holder = &kernel_;
    }
    ~Hold() {
        if (reentrant_) return;
        t_holder = previous_;
        kernel_.exec_mutex_.unlock();
    }
    Hold(const Hold&) = delete;
    Hold& operator=(const Hold&) = delete;

private:
    CellscriptKernel& kernel_;
    bool reentrant_;
    const CellscriptKernel* previous_ = nullptr;
};

/// Gives the execution lock up for the guard's lifetime when this thread holds it.
class CellscriptKernel::Yield {
public:
    explicit Yield(CellscriptKernel& kernel) : kernel_(kernel), held_(t_holder == &kernel) {
        if (!held_) return;
        t_holder = nullptr;
        kernel_.exec_mutex_.unlock();
    }
    ~Yield() {
        if (!held_) return;
        kernel_.exec_mutex_.lock();
        t_holder = &kernel_;
    }
    Yield(const Yield&) = delete;
    Yield& operator=(const Yield&) = delete;

private:
    CellscriptKernel& kernel_;
    bool held_;
};

CellscriptKernel::CellscriptKernel(KernelOptions options, Dispatcher& dispatcher)
    : options_(std::move(options)), dispatcher_(dispatcher), store_(options_.kernel_id) {
    descriptor_.kernel_id = options_.kernel_id;
    descriptor_.lang = "cellscript";
    descriptor_.type_profile = TypeProfile::dynamic_type;
    descriptor_.eval_capable = options_.eval_capable;
    descriptor_.exec_split = false;
    descriptor_.wire_endpoint = "inproc:" + options_.kernel_id;
    install_builtins();
}

CellscriptKernel::~CellscriptKernel() { stop(); }

codec::Context CellscriptKernel::codec_context(std::vector<std::string>* minted) {
    codec::Context ctx;
    ctx.kernel_id = id();
    ctx.lang = descriptor_.lang;
    ctx.store = &store_;
    ctx.minted = minted;
    return ctx;
}

void CellscriptKernel::install_builtins() {
    auto& hooks = interp_.hooks();
    hooks.output = [this](const std::string& line) {
        if (options_.output) {
            options_.output(line);
        } else {
            std::cout << line << '\n';
        }
    };
    hooks.proxy_method = [this](const cellscript::ProxyPtr& proxy, const std::string& method,
                                std::vector<Value> args) {
        return foreign(Usage{UsageKind::method_call, proxy->ref.varname, method, std::move(args)},
                       proxy->ref.owner_kernel);
    };
    hooks.release = [this](const Value& v) { release(v); };
    hooks.unbound = [this](const std::string& name) -> std::optional<Value> {
        if (!options_.resolve) return std::nullopt;
        const auto rec = options_.resolve(name);
        if (!rec) return std::nullopt;
        const auto target = rec->kernel_id;
        switch (rec->kind) {
        case SymbolKind::variable:
            return foreign(Usage{UsageKind::var_ref, rec->name, {}, {}}, target);
        case SymbolKind::class_type:
        case SymbolKind::function: {
            const auto kind = rec->kind == SymbolKind::function ? UsageKind::call : UsageKind::instantiate;
            auto fn = [this, kind, target, symbol = rec->name](std::span<Value> args) {
                return foreign(Usage{kind, symbol, {}, {args.begin(), args.end()}}, target);
            };
            return Value(std::make_shared<const cellscript::Builtin>(cellscript::Builtin{rec->name, fn}));
        }
        }
        return std::nullopt;
    };
    hooks.rebind = [this](const std::string&, const Value& previous) {
        const auto& ref = previous.as<cellscript::ProxyPtr>()->ref;
        if (!aliased(ref)) release(previous);
    };

    interp_.define_builtin("kffi_call", [this](std::span<Value> args) {
        expect_at_least(args, 2, "kffi_call");
        Usage usage{UsageKind::call, string_arg(args, 1, "kffi_call"), {}, {args.begin() + 2, args.end()}};
        return foreign(usage, string_arg(args, 0, "kffi_call"));
    });
    interp_.define_builtin("kffi_var", [this](std::span<Value> args) {
        expect_count(args, 2, "kffi_var");
        return foreign(Usage{UsageKind::var_ref, string_arg(args, 1, "kffi_var"), {}, {}},
                       string_arg(args, 0, "kffi_var"));
    });
    interp_.define_builtin("kffi_new", [this](std::span<Value> args) {
        expect_at_least(args, 2, "kffi_new");
        Usage usage{UsageKind::instantiate, string_arg(args, 1, "kffi_new"), {}, {args.begin() + 2, args.end()}};
        return foreign(usage, string_arg(args, 0, "kffi_new"));
    });
    interp_.define_builtin("kffi_release", [this](std::span<Value> args) {
        expect_count(args, 1, "kffi_release");
        release(args[0]);
        return Value();
    });
    interp_.define_builtin("kffi_args_decode", [this](std::span<Value> args) {
        expect_count(args, 1, "kffi_args_decode");
        auto ctx = codec_context();
        return Value(codec::decode_args(string_arg(args, 0, "kffi_args_decode"), ctx));
    });
    interp_.define_builtin("kffi_return_encode", [this](std::span<Value> args) {
        expect_count(args, 1, "kffi_return_encode");
        if (args[0].is<Encoded>()) return args[0];
        auto ctx = codec_context();
        return Value(Encoded{codec::encode(args[0], ctx).text});
    });
    interp_.define_builtin("kffi_resolve", [this](std::span<Value> args) {
        expect_count(args, 1, "kffi_resolve");
        const auto& key = string_arg(args, 0, "kffi_resolve");
        if (store_.contains(key)) return store_.get(key).object;
        if (auto v = interp_.global(key)) return *v;
        throw UnknownReference("unknown reference '" + key + "' in kernel " + id());
    });
    interp_.define_builtin("kffi_stored", [this](std::span<Value> args) {
        expect_count(args, 2, "kffi_stored");
        const auto& key = string_arg(args, 0, "kffi_stored");
        const auto type = cellscript::type_name(args[1]);
        store_.put_at(key, args[1], type);
        return Value(Encoded{make_ref(key, descriptor_.lang, type, id()).to_text()});
    });
    interp_.define_builtin("kffi_store_delete", [this](std::span<Value> args) {
        expect_count(args, 1, "kffi_store_delete");
        store_.remove(string_arg(args, 0, "kffi_store_delete"));
        return Value(Encoded{"null"});
    });
    interp_.define_builtin("sleep", [this](std::span<Value> args) {
        expect_count(args, 1, "sleep");
        if (!args[0].is<std::int64_t>()) throw Error("TypeError", "sleep duration must be an int");
        Yield yield(*this);
        std::this_thread::sleep_for(std::chrono::milliseconds(args[0].as<std::int64_t>()));
        return Value();
    });
}

Value CellscriptKernel::foreign(const Usage& usage, const std::string& target) {
    std::vector<std::string> leases;
    auto encode_ctx = codec_context(&leases);
    struct LeaseGuard {
        codec::Store& store;
        std::vector<std::string>& keys;
        ~LeaseGuard() {
            for (const auto& key : keys) store.remove(key);
        }
    } guard{store_, leases};

    const Ir ir = generate_ir(usage, encode_ctx);
    CallContext call;
    if (const auto* current = current_call()) call = *current;
    call.kernel = id();
    EncodedValue result;
    {
        Yield yield(*this);
        result = dispatcher_.dispatch(ir, target, call);
    }
    auto decode_ctx = codec_context();
    return codec::decode(result.text, decode_ctx);
}

void CellscriptKernel::release(const Value& value) {
    if (!value.is<cellscript::ProxyPtr>()) return;
    const auto& ref = value.as<cellscript::ProxyPtr>()->ref;
    foreign(Usage{UsageKind::release, ref.varname, {}, {}}, ref.owner_kernel);
}

bool CellscriptKernel::aliased(const ObjectRef& ref) const {
    for (const auto& [name, v] : interp_.globals()) {
        if (holds_ref(v, ref, 0)) return true;
    }
    return false;
}

EvalResponse CellscriptKernel::failure_from_current_exception() {
    const auto where = [this](int line, int column) {
        return "  kernel " + id() + ", line " + std::to_string(line) + ", column " + std::to_string(column);
    };
    try {
        throw;
    } catch (const cellscript::ScriptError& e) {
        std::string trace = e.trace();
        if (!trace.empty()) trace += "\n";
        trace += where(e.line(), e.column());
        return EvalResponse::failure(e.ename(), e.message(), trace,
                                     e.origin_kernel().empty() ? id() : e.origin_kernel());
    } catch (const SyntaxError& e) {
        return EvalResponse::failure(e.ename(), e.what(), where(e.line(), e.column()), id());
    } catch (const ForeignError& e) {
        return EvalResponse::failure(e.ename(), e.evalue(), e.trace(), e.origin_kernel());
    } catch (const Error& e) {
        return EvalResponse::failure(e.ename(), e.what(), "", id());
    } catch (const std::exception& e) {
        return EvalResponse::failure("InternalError", e.what(), "", id());
    }
}

EvalResponse CellscriptKernel::run_cell(const std::string& source, const std::string& correlation_id) {
    if (!wire_) throw KernelUnavailable("kernel " + id() + " is not started");
    return wire_->execute(
        [this, source, correlation_id] {
            ScopedCall scope(CallContext{correlation_id, 0, id(), std::nullopt});
            Hold hold(*this);
            try {
                const Value v = interp_.run(source);
                return EvalResponse::success(v.is_null() ? "" : cellscript::repr(v));
            } catch (...) {
                return failure_from_current_exception();
            }
        },
        std::nullopt, correlation_id);
}

EvalResponse CellscriptKernel::handle(const EvalRequest& request, Endpoint endpoint) {
    std::optional<Clock::time_point> deadline;
    if (request.timeout_ms) deadline = Clock::now() + std::chrono::milliseconds(*request.timeout_ms);
    ScopedCall scope(CallContext{request.correlation_id, request.depth, id(), deadline});
    Hold hold(*this);
    try {
        const Value v = interp_.run(request.code);
        if (v.is<Encoded>()) return EvalResponse::success(v.as<Encoded>().text);
        if (endpoint == Endpoint::exec) return EvalResponse::success("null");
        auto ctx = codec_context();
        return EvalResponse::success(codec::encode(v, ctx).text);
    } catch (...) {
        return failure_from_current_exception();
    }
}

EvalResponse CellscriptKernel::wire_execute(const EvalRequest& request, Endpoint endpoint,
                                            std::optional<Clock::time_point> deadline) {
    if (!wire_) throw KernelUnavailable("kernel " + id() + " is not started");
    return wire_->execute([this, request, endpoint] { return handle(request, endpoint); }, deadline,
                          request.correlation_id);
}

std::set<std::string> CellscriptKernel::bound_names() {
    Hold hold(*this);
    std::set<std::string> out;
    for (const auto& [name, v] : interp_.globals()) out.insert(name);
    for (auto& name : interp_.builtin_names()) out.insert(std::move(name));
    return out;
}

void CellscriptKernel::with_interpreter(const std::function<void(cellscript::Interpreter&)>& fn) {
    Hold hold(*this);
    fn(interp_);
}

void CellscriptKernel::start() {
    if (!wire_) wire_ = std::make_unique<BlockingWire>();
    if (!options_.eval_capable || server_) return;

    server_ = std::make_unique<httplib::Server>();
    const int threads = options_.http_threads;
    server_->new_task_queue = [threads] { return new httplib::ThreadPool(static_cast<std::size_t>(threads)); };
    auto route = [this](Endpoint endpoint) {
        return [this, endpoint](const httplib::Request& req, httplib::Response& res) {
            EvalRequest parsed;
            try {
                parsed = EvalRequest::from_json(json::parse(req.body));
            } catch (const std::exception& e) {
                res.status = 400;
                res.set_content(dump_lenient(EvalResponse::failure("MalformedRequest", e.what(), "", id()).to_json()),
                                "application/json");
                return;
            }
            res.set_content(dump_lenient(handle(parsed, endpoint).to_json()), "application/json");
        };
    };
    server_->Post("/eval", route(Endpoint::eval));
    server_->Post("/exec", route(Endpoint::exec));
    server_->Get("/health", [this](const httplib::Request&, httplib::Response& res) {
        json body = json::object();
        body["kernel_id"] = id();
        body["lang"] = descriptor_.lang;
        body["status"] = "ok";
        res.set_content(dump_lenient(body), "application/json");
    });
    const int port = server_->bind_to_any_port(options_.bind_host);
    if (port <= 0) {
        server_.reset();
        throw KernelUnavailable("cannot bind a side channel for kernel " + id());
    }
    listener_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    descriptor_.side_channel_endpoint = "http://" + options_.bind_host + ":" + std::to_string(port);
}

void CellscriptKernel::stop() {
    if (server_) {
        server_->stop();
        if (listener_.joinable()) listener_.join();
        server_.reset();
        descriptor_.side_channel_endpoint.reset();
    }
    if (wire_) wire_->stop();
}

} // namespace kffi

#include "kffi/broker.hpp"

#include "kffi/errors.hpp"
#include "kffi/kernel.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <algorithm>

namespace kffi {

namespace {

json error_body(const std::string& ename, const std::string& evalue, const std::string& origin) {
    return EvalResponse::failure(ename, evalue, "", origin).to_json();
}

json diff_to_json(const RegistryDiff& diff) {
    json out = json::object();
    out["added"] = diff.added;
    out["updated"] = diff.updated;
    out["removed"] = diff.removed;
    return out;
}

void reply(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(dump_lenient(body), "application/json");
}

} // namespace

Broker::Broker(BrokerOptions options) : options_(options) {}

Broker::~Broker() { stop_http(); }

void Broker::register_kernel(const KernelDescriptor& descriptor, CellscriptKernel* local) {
    if (descriptor.kernel_id.empty()) throw ConfigError("kernel id must not be empty");
    if (descriptor.kernel_id.find(':') != std::string::npos) {
        throw ConfigError("kernel id '" + descriptor.kernel_id + "' must not contain ':'");
    }
    if (!descriptor.eval_capable && descriptor.side_channel_endpoint) {
        throw ConfigError("kernel " + descriptor.kernel_id + " is not eval-capable but advertises a side channel");
    }
    LanguageProfile profile;
    try {
        profile = profile_for(descriptor.lang);
    } catch (const UnsupportedLanguage& e) {
        throw ConfigError(e.what());
    }
    profile.exec_split = descriptor.exec_split;
    {
        std::unique_lock lock(kernels_mutex_);
        if (kernels_.count(descriptor.kernel_id) != 0) {
            throw ConfigError("kernel '" + descriptor.kernel_id + "' is already registered");
        }
        kernels_.emplace(descriptor.kernel_id, Entry{descriptor, profile, local});
    }
    spdlog::info("registered kernel {} ({}, {})", descriptor.kernel_id, descriptor.lang,
                 descriptor.side_channel_endpoint ? *descriptor.side_channel_endpoint : "blocking wire");
}

void Broker::unregister_kernel(const std::string& kernel_id) {
    std::unique_lock lock(kernels_mutex_);
    kernels_.erase(kernel_id);
}

std::vector<KernelDescriptor> Broker::kernels() const {
    std::shared_lock lock(kernels_mutex_);
    std::vector<KernelDescriptor> out;
    for (const auto& [id, entry] : kernels_) out.push_back(entry.descriptor);
    return out;
}

std::optional<KernelDescriptor> Broker::kernel(const std::string& kernel_id) const {
    std::shared_lock lock(kernels_mutex_);
    auto it = kernels_.find(kernel_id);
    if (it == kernels_.end()) return std::nullopt;
    return it->second.descriptor;
}

CellscriptKernel* Broker::local_kernel(const std::string& kernel_id) const {
    std::shared_lock lock(kernels_mutex_);
    auto it = kernels_.find(kernel_id);
    return it == kernels_.end() ? nullptr : it->second.local;
}

int Broker::max_depth_seen(const std::string& correlation_id) const {
    std::lock_guard lock(depth_mutex_);
    auto it = depths_.find(correlation_id);
    return it == depths_.end() ? 0 : it->second;
}

void Broker::set_trace(std::function<void(const std::string&)> sink) {
    std::lock_guard lock(trace_mutex_);
    trace_sink_ = std::move(sink);
}

void Broker::trace(const std::string& line) {
    std::lock_guard lock(trace_mutex_);
    if (trace_sink_) trace_sink_(line);
}

RegistryDiff Broker::register_cell(const std::string& kernel_id, const std::string& cell_id,
                                   const std::string& source, std::vector<std::string>* warnings) {
    const auto desc = kernel(kernel_id);
    if (!desc) throw KernelUnavailable("unknown kernel '" + kernel_id + "'");
    auto cell = extract_declarations(source, desc->lang, cell_id, kernel_id);
    for (const auto& w : cell.warnings) spdlog::warn("cell {} in kernel {}: {}", cell_id, kernel_id, w);
    if (warnings) *warnings = cell.warnings;
    auto diff = registry_.apply(std::move(cell));
    if (!diff.added.empty() || !diff.updated.empty() || !diff.removed.empty()) {
        spdlog::info("cell {} in kernel {}: {} added, {} updated, {} removed", cell_id, kernel_id, diff.added.size(),
                     diff.updated.size(), diff.removed.size());
    }
    return diff;
}

EncodedValue Broker::dispatch(const Ir& ir, const std::string& target_kernel, const CallContext& ctx) {
    validate(ir);
    const int depth = ctx.depth + 1;
    if (depth > options_.max_depth) {
        throw RecursionLimitError("foreign call depth " + std::to_string(depth) + " exceeds the limit of " +
                                  std::to_string(options_.max_depth) + " (correlation " + ctx.correlation_id + ")");
    }
    {
        std::lock_guard lock(depth_mutex_);
        auto& seen = depths_[ctx.correlation_id];
        seen = std::max(seen, depth);
    }
    trace(ir_to_json(ir));

    Entry entry;
    {
        std::shared_lock lock(kernels_mutex_);
        auto it = kernels_.find(target_kernel);
        if (it == kernels_.end()) throw KernelUnavailable("unknown kernel '" + target_kernel + "'");
        entry = it->second;
    }

    CodegenOptions gen_options;
    if (ir.kind == IrKind::instantiate) gen_options.fresh_key = generate_uuid();
    const auto generated = codegen(ir, entry.profile, gen_options);

    const auto now = Clock::now();
    auto deadline = now + options_.timeout;
    if (ctx.deadline) deadline = std::min(deadline, *ctx.deadline - options_.nested_margin);
    if (deadline <= now) {
        throw TimeoutError("no time left to call kernel " + target_kernel + " (correlation " +
                           ctx.correlation_id + ")");
    }

    EvalRequest request;
    request.code = generated.code;
    request.correlation_id = ctx.correlation_id;
    request.depth = depth;
    request.origin_kernel = ctx.kernel;
    request.timeout_ms = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count();

    EvalResponse response;
    const auto& desc = entry.descriptor;
    if (desc.eval_capable && desc.side_channel_endpoint) {
        const char* path = generated.endpoint == Endpoint::exec ? "/exec" : "/eval";
        response = post(*desc.side_channel_endpoint, path, request, deadline);
    } else if (entry.local) {
        response = entry.local->wire_execute(request, generated.endpoint, deadline);
    } else {
        throw KernelUnavailable("kernel " + target_kernel + " has neither a side channel nor a local wire");
    }

    if (!response.ok) {
        throw ForeignError(response.origin_kernel.empty() ? target_kernel : response.origin_kernel,
                           response.ename, response.evalue, response.trace);
    }
    std::string text = response.result;
    if (generated.endpoint == Endpoint::exec) {
        if (ir.kind == IrKind::instantiate && (text.empty() || text == "null")) {
            text = make_ref(*gen_options.fresh_key, desc.lang, ir.name, target_kernel).to_text();
        } else if (text.empty()) {
            text = "null";
        }
    }
    return EncodedValue::classify(std::move(text));
}

EvalResponse Broker::post(const std::string& endpoint, const std::string& path, const EvalRequest& request,
                          Clock::time_point deadline) const {
    httplib::Client client(endpoint);
    const auto budget = std::chrono::duration_cast<std::chrono::microseconds>(deadline - Clock::now());
    const auto secs = static_cast<time_t>(budget.count() / 1000000);
    const auto usecs = static_cast<time_t>(budget.count() % 1000000);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    auto res = client.Post(path, dump_lenient(request.to_json()), "application/json");
    if (!res) {
        const auto err = res.error();
        if (err == httplib::Error::Connection) {
            throw KernelUnavailable("cannot reach " + endpoint + path);
        }
        if (Clock::now() >= deadline || err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout) {
            throw TimeoutError("no answer from " + endpoint + path + " before the deadline (correlation " +
                               request.correlation_id + ")");
        }
        throw KernelUnavailable("request to " + endpoint + path + " failed: " + httplib::to_string(err));
    }
    json body = json::parse(res->body, nullptr, false);
    if (body.is_discarded()) {
        throw KernelUnavailable(endpoint + path + " answered with a non-JSON body (HTTP " +
                                std::to_string(res->status) + ")");
    }
    return EvalResponse::from_json(body);
}

json Broker::handle_ffi(const json& body) {
    try {
        if (!body.is_object()) throw MalformedIr("ffi request must be a JSON object");
        auto target = body.find("target_kernel");
        if (target == body.end() || !target->is_string()) throw MalformedIr("ffi request needs 'target_kernel'");
        auto ir_field = body.find("ir");
        if (ir_field == body.end()) throw MalformedIr("ffi request needs 'ir'");
        const Ir ir = ir_field->is_string() ? ir_from_json(ir_field->get<std::string>())
                                            : ir_from_json(ir_field->dump());
        CallContext ctx;
        if (auto it = body.find("correlation_id"); it != body.end() && it->is_string()) {
            ctx.correlation_id = it->get<std::string>();
        }
        if (auto it = body.find("depth"); it != body.end() && it->is_number_integer()) ctx.depth = it->get<int>();
        if (auto it = body.find("origin_kernel"); it != body.end() && it->is_string()) {
            ctx.kernel = it->get<std::string>();
        }
        if (auto it = body.find("timeout_ms"); it != body.end() && it->is_number_integer()) {
            ctx.deadline = Clock::now() + std::chrono::milliseconds(it->get<long long>());
        }
        const auto result = dispatch(ir, target->get<std::string>(), ctx);
        return EvalResponse::success(result.text).to_json();
    } catch (const ForeignError& e) {
        return EvalResponse::failure(e.ename(), e.evalue(), e.trace(), e.origin_kernel()).to_json();
    } catch (const Error& e) {
        return error_body(e.ename(), e.what(), "broker");
    } catch (const std::exception& e) {
        return error_body("InternalError", e.what(), "broker");
    }
}

int Broker::listen(const std::string& host, int port) {
    if (server_) throw ConfigError("broker is already listening");
    server_ = std::make_unique<httplib::Server>();
    server_->new_task_queue = [] { return new httplib::ThreadPool(80); };

    server_->Post("/ffi", [this](const httplib::Request& req, httplib::Response& res) {
        json body = json::parse(req.body, nullptr, false);
        if (body.is_discarded()) {
            reply(res, 400, error_body("MalformedRequest", "body is not JSON", "broker"));
            return;
        }
        reply(res, 200, handle_ffi(body));
    });
    server_->Get("/registry", [this](const httplib::Request&, httplib::Response& res) {
        json out = json::array();
        for (const auto& rec : registry_.snapshot()->records()) out.push_back(rec.to_json());
        reply(res, 200, out);
    });
    server_->Get("/kernels", [this](const httplib::Request&, httplib::Response& res) {
        json out = json::array();
        for (const auto& desc : kernels()) out.push_back(desc.to_json());
        reply(res, 200, out);
    });
    server_->Post("/kernels", [this](const httplib::Request& req, httplib::Response& res) {
        try {
            const auto desc = KernelDescriptor::from_json(json::parse(req.body));
            register_kernel(desc);
            reply(res, 201, desc.to_json());
        } catch (const ConfigError& e) {
            reply(res, 409, error_body(e.ename(), e.what(), "broker"));
        } catch (const std::exception& e) {
            reply(res, 400, error_body("MalformedRequest", e.what(), "broker"));
        }
    });
    server_->Get(R"(/store/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
        auto* local = local_kernel(req.matches[1]);
        if (!local) {
            reply(res, 404, error_body("NotFound", "no local kernel '" + std::string(req.matches[1]) + "'", "broker"));
            return;
        }
        json out = json::array();
        for (const auto& [key, type] : local->store().type_snapshot()) {
            json entry = json::object();
            entry["key"] = key;
            entry["typeName"] = type;
            out.push_back(std::move(entry));
        }
        reply(res, 200, out);
    });
    server_->Post("/cells", [this](const httplib::Request& req, httplib::Response& res) {
        try {
            const json body = json::parse(req.body);
            std::vector<std::string> warnings;
            const auto diff = register_cell(body.at("kernel").get<std::string>(), body.at("cell_id").get<std::string>(),
                                            body.at("source").get<std::string>(), &warnings);
            json out = diff_to_json(diff);
            out["warnings"] = warnings;
            reply(res, 200, out);
        } catch (const Error& e) {
            reply(res, 400, error_body(e.ename(), e.what(), "broker"));
        } catch (const std::exception& e) {
            reply(res, 400, error_body("MalformedRequest", e.what(), "broker"));
        }
    });
    server_->Delete(R"(/cells/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
        reply(res, 200, diff_to_json(registry_.remove_cell(req.matches[1])));
    });
    server_->Get("/health", [this](const httplib::Request&, httplib::Response& res) {
        json out = json::object();
        out["status"] = "ok";
        out["kernels"] = kernels().size();
        reply(res, 200, out);
    });

    server_->set_socket_options([](socket_t sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
    });
    const int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
    if (bound <= 0) {
        server_.reset();
        throw KernelUnavailable("cannot bind the broker to " + host + ":" + std::to_string(port));
    }
    listener_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    spdlog::debug("broker listening on {}:{}", host, bound);
    return bound;
}

void Broker::stop_http() {
    if (!server_) return;
    server_->stop();
    if (listener_.joinable()) listener_.join();
    server_.reset();
}

} // namespace kffi

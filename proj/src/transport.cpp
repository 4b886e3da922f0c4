#include "kffi/transport.hpp"

#include "kffi/errors.hpp"

namespace kffi {

namespace {

thread_local const CallContext* t_current = nullptr;

std::string require_string(const json& j, const char* field) {
    auto it = j.find(field);
    if (it == j.end() || !it->is_string()) {
        throw MalformedIr(std::string("request field '") + field + "' must be a string");
    }
    return it->get<std::string>();
}

std::string optional_string(const json& j, const char* field) {
    auto it = j.find(field);
    if (it == j.end() || it->is_null()) return {};
    if (!it->is_string()) throw MalformedIr(std::string("field '") + field + "' must be a string");
    return it->get<std::string>();
}

} // namespace

json EvalRequest::to_json() const {
    json out = json::object();
    out["code"] = code;
    out["correlation_id"] = correlation_id;
    out["depth"] = depth;
    out["origin_kernel"] = origin_kernel;
    if (timeout_ms) out["timeout_ms"] = *timeout_ms;
    return out;
}

EvalRequest EvalRequest::from_json(const json& j) {
    if (!j.is_object()) throw MalformedIr("eval request must be a JSON object");
    EvalRequest req;
    req.code = require_string(j, "code");
    req.correlation_id = optional_string(j, "correlation_id");
    req.origin_kernel = optional_string(j, "origin_kernel");
    if (auto it = j.find("depth"); it != j.end()) {
        if (!it->is_number_integer() || it->get<long long>() < 0) {
            throw MalformedIr("request field 'depth' must be a non-negative integer");
        }
        req.depth = it->get<int>();
    }
    if (auto it = j.find("timeout_ms"); it != j.end() && !it->is_null()) {
        if (!it->is_number_integer()) throw MalformedIr("request field 'timeout_ms' must be an integer");
        req.timeout_ms = it->get<long long>();
    }
    return req;
}

EvalResponse EvalResponse::success(std::string result) {
    EvalResponse r;
    r.result = std::move(result);
    return r;
}

EvalResponse EvalResponse::failure(std::string ename, std::string evalue, std::string trace,
                                   std::string origin_kernel) {
    EvalResponse r;
    r.ok = false;
    r.ename = std::move(ename);
    r.evalue = std::move(evalue);
    r.trace = std::move(trace);
    r.origin_kernel = std::move(origin_kernel);
    return r;
}

json EvalResponse::to_json() const {
    json out = json::object();
    if (ok) {
        out["status"] = "ok";
        out["result"] = result;
    } else {
        out["status"] = "error";
        out["ename"] = ename;
        out["evalue"] = evalue;
        out["trace"] = trace;
        out["origin_kernel"] = origin_kernel;
    }
    return out;
}

EvalResponse EvalResponse::from_json(const json& j) {
    if (!j.is_object()) throw MalformedIr("eval response must be a JSON object");
    const auto status = require_string(j, "status");
    if (status == "ok") return success(require_string(j, "result"));
    if (status == "error") {
        return failure(require_string(j, "ename"), optional_string(j, "evalue"),
                       optional_string(j, "trace"), optional_string(j, "origin_kernel"));
    }
    throw MalformedIr("unknown response status '" + status + "'");
}

const CallContext* current_call() noexcept { return t_current; }

ScopedCall::ScopedCall(CallContext ctx) : ctx_(std::move(ctx)), previous_(t_current) { t_current = &ctx_; }

ScopedCall::~ScopedCall() { t_current = previous_; }

BlockingWire::BlockingWire() : worker_([this] { loop(); }) {}

BlockingWire::~BlockingWire() { stop(); }

void BlockingWire::stop() {
    {
        std::lock_guard lock(mutex_);
        if (stopping_) return;
        stopping_ = true;
        for (auto& pending : queue_) pending.cancelled->store(true);
    }
    cv_.notify_all();
    if (worker_.joinable()) worker_.join();
}

BlockingWire::Ticket BlockingWire::submit(Job job) {
    Pending pending{std::move(job), {}, std::make_shared<std::atomic<bool>>(false)};
    Ticket ticket{pending.promise.get_future(), pending.cancelled};
    {
        std::lock_guard lock(mutex_);
        if (stopping_) throw KernelUnavailable("blocking wire is shut down");
        queue_.push_back(std::move(pending));
    }
    cv_.notify_one();
    return ticket;
}

EvalResponse BlockingWire::execute(Job job, std::optional<Clock::time_point> deadline,
                                   const std::string& correlation_id) {
    auto ticket = submit(std::move(job));
    if (!deadline) return ticket.result.get();
    if (ticket.result.wait_until(*deadline) == std::future_status::ready) return ticket.result.get();
    ticket.cancelled->store(true);
    throw TimeoutError("blocking wire did not answer before the deadline (correlation " + correlation_id +
                       "); the kernel is busy, possibly waiting on this very call");
}

void BlockingWire::loop() {
    for (;;) {
        Pending pending;
        {
            std::unique_lock lock(mutex_);
            cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
            if (queue_.empty()) return;
            pending = std::move(queue_.front());
            queue_.pop_front();
        }
        if (pending.cancelled->load()) {
            pending.promise.set_value(EvalResponse::failure("Cancelled", "caller gave up waiting", "", ""));
            continue;
        }
        try {
            pending.promise.set_value(pending.job());
        } catch (...) {
            pending.promise.set_exception(std::current_exception());
        }
    }
}

} // namespace kffi

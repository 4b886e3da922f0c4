#pragma once

#include "kffi/wire.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <future>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

namespace kffi {

using Clock = std::chrono::steady_clock;

inline constexpr int kDefaultMaxCallDepth = 64;
inline constexpr std::chrono::milliseconds kDefaultTimeout{30000};

struct EvalRequest {
    std::string code;
    std::string correlation_id;
    int depth = 0;
    std::string origin_kernel;
    /// Remaining time budget of the caller, when it has one.
    std::optional<long long> timeout_ms;

    json to_json() const;
    /// Throws MalformedIr on missing or mistyped fields.
    static EvalRequest from_json(const json& j);
};

struct EvalResponse {
    bool ok = true;
    std::string result;
    std::string ename;
    std::string evalue;
    std::string trace;
    std::string origin_kernel;

    static EvalResponse success(std::string result);
    static EvalResponse failure(std::string ename, std::string evalue, std::string trace,
                                std::string origin_kernel);

    json to_json() const;
    static EvalResponse from_json(const json& j);
};

/// Identity of the foreign-call chain the current thread is working for.
struct CallContext {
    std::string correlation_id;
    int depth = 0;
    std::string kernel;
    std::optional<Clock::time_point> deadline;
};

/// The context installed on this thread, if any.
const CallContext* current_call() noexcept;

/// Installs a context for the lifetime of the guard, restoring the previous one.
class ScopedCall {
public:
    explicit ScopedCall(CallContext ctx);
    ~ScopedCall();
    ScopedCall(const ScopedCall&) = delete;
    ScopedCall& operator=(const ScopedCall&) = delete;

private:
    CallContext ctx_;
    const CallContext* previous_;
};

/// Routes an IR to the kernel that owns the symbol or object.
class Dispatcher {
public:
    virtual ~Dispatcher() = default;
    virtual EncodedValue dispatch(const Ir& ir, const std::string& target_kernel, const CallContext& ctx) = 0;
};

/// One-at-a-time execution channel of a kernel. Jobs run strictly in arrival
/// order on a single worker thread; a job submitted while another runs waits.
class BlockingWire {
public:
    using Job = std::function<EvalResponse()>;

    struct Ticket {
        std::future<EvalResponse> result;
        std::shared_ptr<std::atomic<bool>> cancelled;
    };

    BlockingWire();
    ~BlockingWire();
    BlockingWire(const BlockingWire&) = delete;
    BlockingWire& operator=(const BlockingWire&) = delete;

    Ticket submit(Job job);

    /// Submits and waits. Throws TimeoutError when the deadline passes first;
    /// the job is then cancelled if it has not started.
    EvalResponse execute(Job job, std::optional<Clock::time_point> deadline,
                         const std::string& correlation_id);

    void stop();

private:
    struct Pending {
        Job job;
        std::promise<EvalResponse> promise;
        std::shared_ptr<std::atomic<bool>> cancelled;
    };

    void loop();

    std::mutex mutex_;
    std::condition_variable cv_;
    std::deque<Pending> queue_;
    bool stopping_ = false;
    std::thread worker_;
};

} // namespace kffi

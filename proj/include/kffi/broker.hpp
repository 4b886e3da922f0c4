#pragma once

#include "kffi/codegen.hpp"
#include "kffi/registry.hpp"
#include "kffi/transport.hpp"

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

namespace httplib {
class Server;
}

namespace kffi {

class CellscriptKernel;

struct BrokerOptions {
    std::chrono::milliseconds timeout = kDefaultTimeout;
    int max_depth = kDefaultMaxCallDepth;
    /// A nested call must give up this much earlier than its caller.
    std::chrono::milliseconds nested_margin{50};
};

/// Central router: owns the registry and the kernel table, turns IRs into
/// target code and delivers it over the side channel or the blocking wire.
class Broker : public Dispatcher {
public:
    explicit Broker(BrokerOptions options = {});
    ~Broker() override;
    Broker(const Broker&) = delete;
    Broker& operator=(const Broker&) = delete;

    const BrokerOptions& options() const noexcept { return options_; }
    Registry& registry() noexcept { return registry_; }

    /// Throws ConfigError on a duplicate id, an unknown language or a
    /// descriptor that violates its invariants. `local` gives access to an
    /// in-process kernel's blocking wire and store.
    void register_kernel(const KernelDescriptor& descriptor, CellscriptKernel* local = nullptr);
    void unregister_kernel(const std::string& kernel_id);
    std::vector<KernelDescriptor> kernels() const;
    std::optional<KernelDescriptor> kernel(const std::string& kernel_id) const;
    CellscriptKernel* local_kernel(const std::string& kernel_id) const;

    EncodedValue dispatch(const Ir& ir, const std::string& target_kernel, const CallContext& ctx) override;

    /// Deepest hop count seen for a correlation id (0 when none).
    int max_depth_seen(const std::string& correlation_id) const;

    /// Receives the wire JSON of every dispatched IR; pass nullptr to stop.
    void set_trace(std::function<void(const std::string&)> sink);

    /// Registers the declarations of a cell that ran in `kernel_id`.
    RegistryDiff register_cell(const std::string& kernel_id, const std::string& cell_id,
                               const std::string& source, std::vector<std::string>* warnings = nullptr);

    /// Serves the broker's HTTP API. Returns the bound port; throws
    /// KernelUnavailable when the port cannot be bound.
    int listen(const std::string& host, int port);
    void stop_http();

    /// POST /ffi body -> response body. Exposed for tests.
    json handle_ffi(const json& body);

private:
    struct Entry {
        KernelDescriptor descriptor;
        LanguageProfile profile;
        CellscriptKernel* local = nullptr;
    };

    EvalResponse post(const std::string& endpoint, const std::string& path, const EvalRequest& request,
                      Clock::time_point deadline) const;
    void trace(const std::string& line);

    BrokerOptions options_;
    Registry registry_;
    mutable std::shared_mutex kernels_mutex_;
    std::map<std::string, Entry> kernels_;
    mutable std::mutex depth_mutex_;
    std::map<std::string, int> depths_;
    std::mutex trace_mutex_;
    std::function<void(const std::string&)> trace_sink_;
    std::unique_ptr<httplib::Server> server_;
    std::thread listener_;
};

} // namespace kffi

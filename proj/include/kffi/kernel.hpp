#pragma once

#include "kffi/cellscript/interpreter.hpp"
#include "kffi/codec.hpp"
#include "kffi/codegen.hpp"
#include "kffi/rewriter.hpp"
#include "kffi/transport.hpp"

#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>

namespace httplib {
class Server;
}

namespace kffi {

struct KernelOptions {
    std::string kernel_id;
    /// When false the kernel serves no side channel and every inbound call
    /// goes over its blocking wire.
    bool eval_capable = true;
    std::string bind_host = "127.0.0.1";
    int http_threads = 80;
    /// Receives print() output, one line at a time.
    std::function<void(const std::string&)> output;
    /// Finds the foreign symbol behind a name the cell rewrite left alone,
    /// e.g. one defined after the function that uses it.
    std::function<std::optional<SymbolRecord>(const std::string& name)> resolve;
};

/// In-process kernel running cellscript.
///
/// The interpreter is guarded by an execution lock. A thread waiting on a
/// foreign call gives the lock up, so inbound side-channel requests interleave
/// with the main execution at those points (and during sleep()).
class CellscriptKernel {
public:
    CellscriptKernel(KernelOptions options, Dispatcher& dispatcher);
    ~CellscriptKernel();
    CellscriptKernel(const CellscriptKernel&) = delete;
    CellscriptKernel& operator=(const CellscriptKernel&) = delete;

    /// Starts the blocking wire and, when eval-capable, the HTTP side channel
    /// on an ephemeral port.
    void start();
    void stop();

    const std::string& id() const noexcept { return options_.kernel_id; }
    const KernelDescriptor& descriptor() const noexcept { return descriptor_; }

    /// Runs a top-level cell over the blocking wire. On success `result` is
    /// the repr of the cell value, or empty when the value is null.
    EvalResponse run_cell(const std::string& source, const std::string& correlation_id);

    /// Runs generated code for an inbound request on the calling thread.
    EvalResponse handle(const EvalRequest& request, Endpoint endpoint);

    /// Queues an inbound request on the blocking wire.
    EvalResponse wire_execute(const EvalRequest& request, Endpoint endpoint,
                              std::optional<Clock::time_point> deadline);

    codec::Store& store() noexcept { return store_; }

    /// Globals and builtins currently bound; these shadow foreign symbols.
    std::set<std::string> bound_names();

    /// Runs `fn` with exclusive access to the interpreter.
    void with_interpreter(const std::function<void(cellscript::Interpreter&)>& fn);

private:
    class Hold;
    class Yield;

    void install_builtins();
    cellscript::Value foreign(const Usage& usage, const std::string& target);
    void release(const cellscript::Value& value);
    bool aliased(const ObjectRef& ref) const;
    codec::Context codec_context(std::vector<std::string>* minted = nullptr);
    EvalResponse failure_from_current_exception();

    KernelOptions options_;
    Dispatcher& dispatcher_;
    KernelDescriptor descriptor_;
    codec::Store store_;
    cellscript::Interpreter interp_;
    std::mutex exec_mutex_;
    std::unique_ptr<BlockingWire> wire_;
    std::unique_ptr<httplib::Server> server_;
    std::thread listener_;
};

} // namespace kffi

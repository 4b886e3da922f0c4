#pragma once

#include "kffi/broker.hpp"
#include "kffi/kernel.hpp"

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace kffi {

struct KernelConfig {
    std::string id;
    std::string lang = "cellscript";
    bool eval_capable = true;
};

struct AdapterConfig {
    std::string command;
};

/// Session layout, usually read from a JSON file:
///   {"port": 8765, "timeout_ms": 30000, "max_depth": 64,
///    "kernels": [{"id": "A", "lang": "cellscript", "eval_capable": true}],
///    "adapters": [{"command": "python3 adapter.py"}]}
struct SessionConfig {
    int port = 0;
    std::vector<KernelConfig> kernels;
    std::vector<AdapterConfig> adapters;
    std::chrono::milliseconds timeout = kDefaultTimeout;
    int max_depth = kDefaultMaxCallDepth;

    /// Two eval-capable cellscript kernels, A and B.
    static SessionConfig defaults();
    /// Throws ConfigError.
    static SessionConfig from_json(const json& j);
    static SessionConfig load(const std::filesystem::path& path);
};

struct NotebookCell {
    std::string kernel;
    std::string lang = "cellscript";
    std::string source;
};

/// A notebook is a JSON array of {"kernel", "lang", "source"} objects.
/// Throws ConfigError.
std::vector<NotebookCell> parse_notebook(const json& j);
std::vector<NotebookCell> load_notebook(const std::filesystem::path& path);

struct CellOutcome {
    std::string cell_id;
    std::string kernel;
    bool ok = true;
    /// Repr of the cell value, empty for null.
    std::string result;
    std::string ename;
    std::string evalue;
    std::string origin_kernel;
    std::string trace;
    std::string correlation_id;
    /// Deepest foreign hop reached while the cell ran.
    int depth = 0;
    /// Cell source after rewriting.
    std::string transformed;

    json error_json() const;
};

/// A broker plus the in-process cellscript kernels of a configuration.
class Session {
public:
    using Sink = std::function<void(const std::string&)>;

    explicit Session(SessionConfig config, Sink output = {});
    ~Session();
    Session(const Session&) = delete;
    Session& operator=(const Session&) = delete;

    Broker& broker() noexcept { return broker_; }
    const SessionConfig& config() const noexcept { return config_; }
    CellscriptKernel* kernel(const std::string& id);
    std::vector<std::string> kernel_ids() const;

    /// Registers, rewrites and runs one cell. Never throws for cell errors;
    /// they are reported in the outcome.
    CellOutcome run_cell(const std::string& kernel, const std::string& source, std::string cell_id = {});

    /// Registers the declarations of every cell up front so cells can call
    /// symbols defined further down. Cells that fail to parse are skipped.
    void preregister(const std::vector<NotebookCell>& cells);

    /// Runs a notebook, printing results and error lines to the sink.
    /// Returns 0 when every cell succeeded and 1 otherwise.
    int run_notebook(const std::vector<NotebookCell>& cells);

private:
    static std::string notebook_cell_id(std::size_t index) { return "cell-" + std::to_string(index + 1); }
    void emit(const std::string& line);
    CellOutcome run_remote(const KernelDescriptor& desc, const std::string& source, CellOutcome outcome);

    SessionConfig config_;
    Sink output_;
    std::mutex output_mutex_;
    Broker broker_;
    std::map<std::string, std::unique_ptr<CellscriptKernel>> kernels_;
    std::size_t next_cell_ = 0;
    std::mutex cell_mutex_;
};

} // namespace kffi

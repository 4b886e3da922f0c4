#include "kffi/session.hpp"

#include "kffi/errors.hpp"
#include "kffi/rewriter.hpp"
#include "kffi/store.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <fstream>
#include <set>
#include <sstream>

namespace kffi {

namespace {

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    json j = json::parse(buf.str(), nullptr, false);
    if (j.is_discarded()) throw ConfigError(path.string() + " is not valid JSON");
    return j;
}

template <typename T>
T field(const json& obj, const char* name, T fallback, const char* what) {
    auto it = obj.find(name);
    if (it == obj.end() || it->is_null()) return fallback;
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string(what) + " field '" + name + "' has the wrong type");
    }
}

} // namespace

SessionConfig SessionConfig::defaults() {
    SessionConfig c;
    c.kernels = {KernelConfig{"A"}, KernelConfig{"B"}};
    return c;
}

SessionConfig SessionConfig::from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    SessionConfig c;
    c.port = field<int>(j, "port", 0, "config");
    if (c.port < 0 || c.port > 65535) throw ConfigError("port must be between 0 and 65535");
    const auto timeout = field<long long>(j, "timeout_ms", kDefaultTimeout.count(), "config");
    if (timeout <= 0) throw ConfigError("timeout_ms must be positive");
    c.timeout = std::chrono::milliseconds(timeout);
    c.max_depth = field<int>(j, "max_depth", kDefaultMaxCallDepth, "config");
    if (c.max_depth <= 0) throw ConfigError("max_depth must be positive");

    std::set<std::string> seen;
    if (auto it = j.find("kernels"); it != j.end()) {
        if (!it->is_array()) throw ConfigError("'kernels' must be an array");
        for (const auto& k : *it) {
            if (!k.is_object()) throw ConfigError("each kernel must be an object");
            KernelConfig kc;
            kc.id = field<std::string>(k, "id", "", "kernel");
            kc.lang = field<std::string>(k, "lang", "cellscript", "kernel");
            kc.eval_capable = field<bool>(k, "eval_capable", true, "kernel");
            if (kc.id.empty()) throw ConfigError("kernel id must not be empty");
            if (kc.id.find(':') != std::string::npos) throw ConfigError("kernel id '" + kc.id + "' contains ':'");
            if (kc.lang != "cellscript") {
                throw ConfigError("kernel " + kc.id + ": in-process kernels run cellscript; '" + kc.lang +
                                  "' kernels join through an adapter");
            }
            if (!seen.insert(kc.id).second) throw ConfigError("duplicate kernel id '" + kc.id + "'");
            c.kernels.push_back(std::move(kc));
        }
    }
    if (auto it = j.find("adapters"); it != j.end()) {
        if (!it->is_array()) throw ConfigError("'adapters' must be an array");
        for (const auto& a : *it) {
            if (!a.is_object()) throw ConfigError("each adapter must be an object");
            AdapterConfig ac{field<std::string>(a, "command", "", "adapter")};
            if (ac.command.empty()) throw ConfigError("adapter command must not be empty");
            c.adapters.push_back(std::move(ac));
        }
    }
    if (c.kernels.empty() && c.adapters.empty()) throw ConfigError("config declares no kernels");
    return c;
}

SessionConfig SessionConfig::load(const std::filesystem::path& path) { return from_json(read_json_file(path)); }

std::vector<NotebookCell> parse_notebook(const json& j) {
    if (!j.is_array()) throw ConfigError("notebook must be a JSON array of cells");
    std::vector<NotebookCell> cells;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const auto& c = j[i];
        const auto where = "cell " + std::to_string(i + 1);
        if (!c.is_object()) throw ConfigError(where + " must be an object");
        NotebookCell cell;
        cell.kernel = field<std::string>(c, "kernel", "", where.c_str());
        cell.lang = field<std::string>(c, "lang", "cellscript", where.c_str());
        cell.source = field<std::string>(c, "source", "", where.c_str());
        if (cell.kernel.empty()) throw ConfigError(where + " has no kernel");
        cells.push_back(std::move(cell));
    }
    return cells;
}

std::vector<NotebookCell> load_notebook(const std::filesystem::path& path) {
    return parse_notebook(read_json_file(path));
}

json CellOutcome::error_json() const {
    json out = json::object();
    out["cell"] = cell_id;
    out["kernel"] = kernel;
    out["ename"] = ename;
    out["evalue"] = evalue;
    out["origin_kernel"] = origin_kernel;
    return out;
}

Session::Session(SessionConfig config, Sink output)
    : config_(std::move(config)), output_(std::move(output)),
      broker_(BrokerOptions{config_.timeout, config_.max_depth}) {
    for (const auto& kc : config_.kernels) {
        KernelOptions opts;
        opts.kernel_id = kc.id;
        opts.eval_capable = kc.eval_capable;
        opts.output = [this](const std::string& line) { emit(line); };
        opts.resolve = [this, id = kc.id](const std::string& name) -> std::optional<SymbolRecord> {
            try {
                return broker_.registry().resolve(name, id);
            } catch (const NotFound&) {
                return std::nullopt;
            }
        };
        auto kernel = std::make_unique<CellscriptKernel>(std::move(opts), broker_);
        kernel->start();
        broker_.register_kernel(kernel->descriptor(), kernel.get());
        kernels_.emplace(kc.id, std::move(kernel));
    }
}

Session::~Session() {
    broker_.stop_http();
    for (auto& [id, kernel] : kernels_) kernel->stop();
}

CellscriptKernel* Session::kernel(const std::string& id) {
    auto it = kernels_.find(id);
    return it == kernels_.end() ? nullptr : it->second.get();
}

std::vector<std::string> Session::kernel_ids() const {
    std::vector<std::string> ids;
    for (const auto& desc : broker_.kernels()) ids.push_back(desc.kernel_id);
    return ids;
}

void Session::emit(const std::string& line) {
    std::lock_guard lock(output_mutex_);
    if (output_) {
        output_(line);
    } else {
        std::fputs((line + "\n").c_str(), stdout);
        std::fflush(stdout);
    }
}

CellOutcome Session::run_cell(const std::string& kernel_id, const std::string& source, std::string cell_id) {
    if (cell_id.empty()) {
        std::lock_guard lock(cell_mutex_);
        cell_id = kernel_id + "-" + std::to_string(++next_cell_);
    }
    CellOutcome outcome;
    outcome.cell_id = cell_id;
    outcome.kernel = kernel_id;
    outcome.correlation_id = generate_uuid();
    const auto fail = [&outcome](const std::string& ename, const std::string& evalue, const std::string& origin,
                                 const std::string& trace = {}) {
        outcome.ok = false;
        outcome.ename = ename;
        outcome.evalue = evalue;
        outcome.origin_kernel = origin;
        outcome.trace = trace;
        return outcome;
    };

    const auto desc = broker_.kernel(kernel_id);
    if (!desc) return fail("KernelUnavailable", "unknown kernel '" + kernel_id + "'", "broker");
    auto* local = kernel(kernel_id);

    try {
        broker_.register_cell(kernel_id, cell_id, source);
    } catch (const SyntaxError& e) {
        return fail(e.ename(), e.what(), kernel_id);
    } catch (const Error& e) {
        return fail(e.ename(), e.what(), "broker");
    }
    if (!local) return run_remote(*desc, source, std::move(outcome));

    try {
        RewriteOptions opts;
        opts.local_names = local->bound_names();
        opts.report_unresolved = true;
        outcome.transformed = rewrite_cell(source, desc->lang, kernel_id, *broker_.registry().snapshot(), opts)
                                  .transformed;
    } catch (const SyntaxError& e) {
        return fail(e.ename(), e.what(), kernel_id);
    } catch (const Error& e) {
        return fail(e.ename(), e.what(), "broker");
    }

    EvalResponse response;
    try {
        response = local->run_cell(outcome.transformed, outcome.correlation_id);
    } catch (const Error& e) {
        return fail(e.ename(), e.what(), kernel_id);
    }
    outcome.depth = broker_.max_depth_seen(outcome.correlation_id);
    if (!response.ok) return fail(response.ename, response.evalue, response.origin_kernel, response.trace);
    outcome.result = response.result;
    return outcome;
}

CellOutcome Session::run_remote(const KernelDescriptor& desc, const std::string& source, CellOutcome outcome) {
    outcome.transformed = source;
    const auto fail = [&outcome](const std::string& ename, const std::string& evalue, const std::string& origin) {
        outcome.ok = false;
        outcome.ename = ename;
        outcome.evalue = evalue;
        outcome.origin_kernel = origin;
        return outcome;
    };
    if (!desc.side_channel_endpoint) {
        return fail("KernelUnavailable", "kernel " + desc.kernel_id + " has no reachable endpoint", "broker");
    }
    EvalRequest req;
    req.code = source;
    req.correlation_id = outcome.correlation_id;
    req.origin_kernel = desc.kernel_id;
    httplib::Client client(*desc.side_channel_endpoint);
    client.set_read_timeout(std::chrono::duration_cast<std::chrono::seconds>(config_.timeout).count() + 1, 0);
    auto res = client.Post("/exec", dump_lenient(req.to_json()), "application/json");
    if (!res) {
        return fail("KernelUnavailable", "cannot reach " + *desc.side_channel_endpoint + "/exec", "broker");
    }
    try {
        const auto response = EvalResponse::from_json(json::parse(res->body));
        outcome.depth = broker_.max_depth_seen(outcome.correlation_id);
        if (!response.ok) {
            outcome = fail(response.ename, response.evalue,
                           response.origin_kernel.empty() ? desc.kernel_id : response.origin_kernel);
            outcome.trace = response.trace;
            return outcome;
        }
        outcome.result = response.result == "null" ? "" : response.result;
    } catch (const std::exception& e) {
        return fail("MalformedRequest", e.what(), desc.kernel_id);
    }
    return outcome;
}

void Session::preregister(const std::vector<NotebookCell>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const auto& cell = cells[i];
        if (!broker_.kernel(cell.kernel)) continue;
        try {
            broker_.register_cell(cell.kernel, notebook_cell_id(i), cell.source);
        } catch (const Error& e) {
            spdlog::debug("pre-registration skipped {}: {}", notebook_cell_id(i), e.what());
        }
    }
}

int Session::run_notebook(const std::vector<NotebookCell>& cells) {
    preregister(cells);
    int status = 0;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const auto& cell = cells[i];
        if (const auto desc = broker_.kernel(cell.kernel); desc && desc->lang != cell.lang) {
            CellOutcome bad;
            bad.cell_id = notebook_cell_id(i);
            bad.kernel = cell.kernel;
            bad.ename = "ConfigError";
            bad.evalue = "cell language '" + cell.lang + "' does not match kernel language '" + desc->lang + "'";
            bad.origin_kernel = "broker";
            emit(bad.error_json().dump());
            status = 1;
            continue;
        }
        const auto outcome = run_cell(cell.kernel, cell.source, notebook_cell_id(i));
        if (!outcome.ok) {
            emit(outcome.error_json().dump());
            status = 1;
        } else if (!outcome.result.empty()) {
            emit(outcome.result);
        }
    }
    return status;
}

} // namespace kffi

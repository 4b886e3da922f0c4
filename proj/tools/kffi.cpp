#include "kffi/errors.hpp"
#include "kffi/rewriter.hpp"
#include "kffi/session.hpp"

#include <CLI11.hpp>
#include <httplib.h>
#include <spdlog/spdlog.h>

#include <unistd.h>
#include <sys/wait.h>

#include <atomic>
#include <csignal>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <thread>

using namespace kffi;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitPort = 3;

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

void init_logging() {
    spdlog::set_level(spdlog::level::warn);
    if (const char* level = std::getenv("KFFI_LOG")) spdlog::set_level(spdlog::level::from_str(level));
    spdlog::set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
}

SessionConfig load_config(const std::string& path) {
    return path.empty() ? SessionConfig::defaults() : SessionConfig::load(path);
}

pid_t launch_adapter(const std::string& command, const std::string& broker_url) {
    const pid_t pid = fork();
    if (pid == 0) {
        setenv("KFFI_BROKER", broker_url.c_str(), 1);
        execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        _exit(127);
    }
    if (pid < 0) throw KernelUnavailable("cannot launch adapter: " + command);
    return pid;
}

int fetch(const std::string& broker, const std::string& path) {
    httplib::Client client(broker);
    client.set_connection_timeout(2, 0);
    auto res = client.Get(path);
    if (!res) {
        std::cerr << "cannot reach broker at " << broker << "\n";
        return 1;
    }
    const auto body = json::parse(res->body, nullptr, false);
    if (res->status != 200 || !body.is_array()) {
        std::cerr << res->body << "\n";
        return 1;
    }
    for (const auto& item : body) std::cout << item.dump() << "\n";
    return 0;
}

int cmd_serve(const std::string& config_path) {
    if (!std::getenv("KFFI_LOG")) spdlog::set_level(spdlog::level::info);
    Session session(load_config(config_path));
    int port = 0;
    try {
        port = session.broker().listen("127.0.0.1", session.config().port);
    } catch (const KernelUnavailable& e) {
        std::cerr << e.what() << "\n";
        return kExitPort;
    }
    const auto url = "http://127.0.0.1:" + std::to_string(port);
    std::cout << "broker listening on " << url << "\n" << std::flush;
    std::vector<pid_t> adapters;
    for (const auto& a : session.config().adapters) adapters.push_back(launch_adapter(a.command, url));

    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    for (pid_t pid : adapters) {
        kill(pid, SIGTERM);
        waitpid(pid, nullptr, 0);
    }
    return 0;
}

int cmd_run(const std::string& file, const std::string& config_path, bool trace) {
    const auto cells = load_notebook(file);
    Session session(load_config(config_path));
    if (trace) session.broker().set_trace([](const std::string& line) { std::cerr << line << "\n"; });
    return session.run_notebook(cells);
}

int cmd_rewrite(const std::string& file, const std::string& kernel_id, const std::string& config_path) {
    const auto cells = load_notebook(file);
    Session session(load_config(config_path));
    if (!session.kernel(kernel_id)) throw ConfigError("unknown kernel '" + kernel_id + "'");
    session.preregister(cells);
    for (const auto& cell : cells) {
        if (cell.kernel != kernel_id) continue;
        RewriteOptions opts;
        opts.local_names = session.kernel(kernel_id)->bound_names();
        const auto plan =
            rewrite_cell(cell.source, cell.lang, kernel_id, *session.broker().registry().snapshot(), opts);
        std::cout << plan.transformed << "\n";
    }
    return 0;
}

int brace_balance(const std::string& text) {
    int depth = 0;
    for (char c : text) {
        if (c == '{' || c == '(' || c == '[') ++depth;
        if (c == '}' || c == ')' || c == ']') --depth;
    }
    return depth;
}

int cmd_repl(const std::string& config_path) {
    Session session(load_config(config_path));
    auto ids = session.kernel_ids();
    if (ids.empty()) throw ConfigError("no kernels configured");
    std::string current = ids.front();
    bool tracing = false;
    std::string pending;
    for (;;) {
        std::cout << (pending.empty() ? "[" + current + "]> " : "... ") << std::flush;
        std::string line;
        if (!std::getline(std::cin, line)) break;
        if (pending.empty() && !line.empty() && line[0] == ':') {
            std::istringstream words(line);
            std::string cmd, arg;
            words >> cmd >> arg;
            if (cmd == ":quit" || cmd == ":q") break;
            if (cmd == ":kernel") {
                if (arg.empty()) {
                    for (const auto& id : session.kernel_ids()) std::cout << (id == current ? "* " : "  ") << id << "\n";
                } else if (session.broker().kernel(arg)) {
                    current = arg;
                } else {
                    std::cout << "unknown kernel '" << arg << "'\n";
                }
            } else if (cmd == ":registry") {
                for (const auto& rec : session.broker().registry().snapshot()->records()) {
                    std::cout << rec.to_json().dump() << "\n";
                }
            } else if (cmd == ":store") {
                auto* k = session.kernel(arg.empty() ? current : arg);
                if (!k) {
                    std::cout << "no local kernel '" << arg << "'\n";
                    continue;
                }
                for (const auto& [key, type] : k->store().type_snapshot()) std::cout << key << "  " << type << "\n";
            } else if (cmd == ":trace") {
                tracing = arg != "off";
                if (tracing) {
                    session.broker().set_trace([](const std::string& ir) { std::cout << ir << "\n"; });
                } else {
                    session.broker().set_trace(nullptr);
                }
            } else {
                std::cout << "commands: :kernel [id]  :registry  :store [id]  :trace on|off  :quit\n";
            }
            continue;
        }
        pending += line + "\n";
        if (brace_balance(pending) > 0) continue;
        const auto outcome = session.run_cell(current, pending);
        pending.clear();
        if (!outcome.ok) {
            std::cout << outcome.ename << ": " << outcome.evalue << "\n";
            if (!outcome.trace.empty()) std::cout << outcome.trace << "\n";
        } else if (!outcome.result.empty()) {
            std::cout << outcome.result << "\n";
        }
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    init_logging();
    CLI::App app{"Cross-kernel function calls between notebook kernels"};
    app.require_subcommand(1);

    std::string config_path;
    std::string broker_url = "http://127.0.0.1:8765";
    std::string file;
    std::string kernel_id;
    bool trace = false;

    auto* serve = app.add_subcommand("serve", "Run the broker and its kernels until interrupted");
    serve->add_option("--config", config_path, "Session config (JSON)")->check(CLI::ExistingFile);

    auto* run = app.add_subcommand("run", "Run a notebook file and print each cell's result");
    run->add_option("file", file, "Notebook (JSON array of cells)")->required()->check(CLI::ExistingFile);
    run->add_option("--config", config_path, "Session config (JSON)")->check(CLI::ExistingFile);
    run->add_flag("--trace", trace, "Print every dispatched IR to stderr");

    auto* repl = app.add_subcommand("repl", "Interactive multi-kernel session");
    repl->add_option("--config", config_path, "Session config (JSON)")->check(CLI::ExistingFile);

    auto* registry = app.add_subcommand("registry", "Show a running broker's registry");
    registry->add_option("--broker", broker_url, "Broker URL");

    auto* store = app.add_subcommand("store", "Show a kernel's object store on a running broker");
    store->add_option("kernel", kernel_id, "Kernel id")->required();
    store->add_option("--broker", broker_url, "Broker URL");

    auto* rewrite = app.add_subcommand("rewrite", "Print one kernel's cells of a notebook after rewriting");
    rewrite->add_option("file", file, "Notebook (JSON array of cells)")->required()->check(CLI::ExistingFile);
    rewrite->add_option("--kernel", kernel_id, "Client kernel id")->required();
    rewrite->add_option("--config", config_path, "Session config (JSON)")->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    try {
        if (serve->parsed()) return cmd_serve(config_path);
        if (run->parsed()) return cmd_run(file, config_path, trace);
        if (repl->parsed()) return cmd_repl(config_path);
        if (registry->parsed()) return fetch(broker_url, "/registry");
        if (store->parsed()) return fetch(broker_url, "/store/" + kernel_id);
        if (rewrite->parsed()) return cmd_rewrite(file, kernel_id, config_path);
    } catch (const ConfigError& e) {
        std::cerr << "invalid configuration: " << e.what() << "\n";
        return kExitConfig;
    } catch (const Error& e) {
        std::cerr << e.ename() << ": " << e.what() << "\n";
        return 1;
    }
    return 0;
}

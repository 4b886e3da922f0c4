#pragma once

#include "kffi/session.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace kffi::fixture {

/// One program of the split corpus. Each cell starts with a `--- host` or
/// `--- client` line.
struct Program {
    std::string name;
    struct Cell {
        bool host = false;
        std::string source;
    };
    std::vector<Cell> cells;
};

inline void PrintTo(const Program& prog, std::ostream* os) { *os << prog.name; }

inline Program load_program(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    Program prog;
    prog.name = path.stem().string();
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("--- ", 0) == 0) {
            const auto role = line.substr(4);
            if (role != "host" && role != "client") throw std::runtime_error(path.string() + ": bad marker " + line);
            prog.cells.push_back({role == "host", {}});
            continue;
        }
        if (prog.cells.empty()) {
            if (line.empty()) continue;
            throw std::runtime_error(path.string() + ": text before the first cell");
        }
        auto& src = prog.cells.back().source;
        if (!src.empty()) src += "\n";
        src += line;
    }
    return prog;
}

inline std::vector<Program> load_corpus(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        if (e.path().extension() == ".txt") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<Program> out;
    for (const auto& f : files) out.push_back(load_program(f));
    return out;
}

/// Everything the program printed plus each cell's value or error name.
/// `split` runs host cells in B and client cells in A; otherwise every
/// cell runs in A.
inline std::string transcript(const Program& prog, bool split) {
    std::ostringstream out;
    SessionConfig cfg;
    cfg.kernels = {{"A"}};
    if (split) cfg.kernels.push_back({"B"});
    Session session(cfg, [&](const std::string& line) { out << line << "\n"; });

    std::vector<NotebookCell> cells;
    for (const auto& c : prog.cells) cells.push_back({split && c.host ? "B" : "A", "cellscript", c.source});
    session.preregister(cells);
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const auto outcome = session.run_cell(cells[i].kernel, cells[i].source, "cell-" + std::to_string(i + 1));
        if (!outcome.ok) {
            out << "error " << outcome.ename << "\n";
        } else if (!outcome.result.empty()) {
            out << outcome.result << "\n";
        }
    }
    return out.str();
}

} // namespace kffi::fixture

#pragma once

#include "kffi/wire.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace kffi {

enum class SymbolKind { function, class_type, variable };

std::string_view to_string(SymbolKind kind) noexcept;

struct MethodInfo {
    std::string name;
    std::vector<std::string> params;   // receiver excluded
    bool variadic = false;

    bool operator==(const MethodInfo&) const = default;
};

/// One discoverable top-level construct of a kernel.
///
/// For classes, `params` holds the constructor parameters so instantiation can
/// be arity-checked like a call.
struct SymbolRecord {
    std::string name;
    SymbolKind kind = SymbolKind::function;
    std::string kernel_id;
    std::string lang;
    std::vector<std::string> params;
    bool variadic = false;
    std::vector<MethodInfo> methods;
    std::optional<std::string> base;
    std::string cell_id;
    std::int64_t version = 0;

    std::string qualified_name() const { return kernel_id + ":" + name; }
    json to_json() const;
};

struct CellDeclaration {
    std::string cell_id;
    std::string kernel_id;
    std::string lang;
    std::vector<SymbolRecord> declarations;
    /// Constructs the frontend skipped rather than understood.
    std::vector<std::string> warnings;
};

/// Syntactic extraction of top-level functions, classes (with methods) and
/// variables. Supported languages: "cellscript" and "python" (the subset of
/// top-level def/class/assignment forms). All-or-nothing: a syntax error throws
/// SyntaxError and yields no declarations.
CellDeclaration extract_declarations(std::string_view source, const std::string& lang,
                                     const std::string& cell_id, const std::string& kernel_id);

struct RegistryDiff {
    std::vector<std::string> added;     // qualified names
    std::vector<std::string> updated;
    std::vector<std::string> removed;

    bool empty() const { return added.empty() && updated.empty() && removed.empty(); }
};

/// Immutable view of the registry at one point in time.
class RegistrySnapshot {
public:
    using Key = std::pair<std::string, std::string>;   // (kernel_id, name)

    std::optional<SymbolRecord> lookup(const std::string& kernel_id, const std::string& name) const;
    bool defines(const std::string& kernel_id, const std::string& name) const {
        return visible_.count({kernel_id, name}) != 0;
    }

    /// Finds `name` in a kernel other than `client_kernel`. `kernel:name`
    /// qualification selects a kernel explicitly. Throws NotFound or
    /// AmbiguousSymbol (listing every candidate).
    SymbolRecord resolve(const std::string& name, const std::string& client_kernel) const;

    /// Visible records ordered by (kernel_id, name).
    std::vector<SymbolRecord> records() const;

private:
    friend class Registry;
    struct Visible {
        SymbolRecord record;
        std::uint64_t seq;
    };
    std::map<Key, Visible> visible_;
};

/// Symbol table kept current as cells are (re-)executed. Later registrations
/// of a name within one kernel shadow earlier ones; removing a cell uncovers
/// whatever it shadowed.
class Registry {
public:
    Registry();

    RegistryDiff apply(CellDeclaration cell);
    RegistryDiff remove_cell(const std::string& cell_id);

    std::shared_ptr<const RegistrySnapshot> snapshot() const;
    SymbolRecord resolve(const std::string& name, const std::string& client_kernel) const {
        return snapshot()->resolve(name, client_kernel);
    }

private:
    struct CellEntry {
        CellDeclaration cell;
        std::uint64_t seq;
    };

    RegistryDiff rebuild();

    mutable std::mutex mutex_;
    std::map<std::string, CellEntry> cells_;
    std::map<RegistrySnapshot::Key, std::int64_t> versions_;
    std::uint64_t next_seq_ = 1;
    std::shared_ptr<const RegistrySnapshot> snapshot_;
};

} // namespace kffi

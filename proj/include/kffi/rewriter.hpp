#pragma once

#include "kffi/codec.hpp"
#include "kffi/registry.hpp"
#include "kffi/wire.hpp"

#include <cstddef>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace kffi {

enum class UsageKind { call, var_ref, method_call, instantiate, release };

std::string_view to_string(UsageKind kind) noexcept;

struct RewriteSite {
    std::size_t begin = 0;   // edited byte range in the original source
    std::size_t end = 0;
    UsageKind kind = UsageKind::call;
    std::optional<SymbolRecord> symbol;
    /// Method name for method_call sites.
    std::string method;
};

struct RewritePlan {
    std::string original;
    std::string transformed;
    std::vector<RewriteSite> sites;
};

struct RewriteOptions {
    /// Names already bound in the client kernel. When absent, the client
    /// kernel's own registry records are used instead.
    std::optional<std::set<std::string>> local_names;
    /// Throw NotFound for top-level names that are neither bound nor foreign.
    bool report_unresolved = false;
};

/// Rewrites foreign usages in a cellscript client cell into runtime helper
/// calls (kffi_call, kffi_var, kffi_new, kffi_release). Pure: no kernel is
/// contacted. Throws SyntaxError, AmbiguousSymbol, ArityMismatch or
/// UnsupportedLanguage.
RewritePlan rewrite_cell(std::string_view source, const std::string& client_lang,
                         const std::string& client_kernel, const RegistrySnapshot& snapshot,
                         const RewriteOptions& options = {});

/// One runtime foreign operation. `name` is the function, variable or class
/// name; for method_call and release it is the receiver's store key.
struct Usage {
    UsageKind kind = UsageKind::call;
    std::string name;
    std::string method;
    std::vector<codec::Value> args;
};

/// Builds the IR for a usage, encoding arguments in the client's context:
/// local objects are placed in the client store, proxies keep their reference.
Ir generate_ir(const Usage& usage, codec::Context& client);

} // namespace kffi

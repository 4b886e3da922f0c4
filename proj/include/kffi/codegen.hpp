#pragma once

#include "kffi/wire.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace kffi {

enum class ProfileKind { dynamic_implicit, static_explicit, dynamic_explicit };

std::string_view to_string(ProfileKind kind) noexcept;

struct LanguageProfile {
    std::string lang;
    ProfileKind profile = ProfileKind::dynamic_implicit;
    bool eval_capable = true;
    bool vararg = true;
    /// instantiate/delete go to the statement endpoint.
    bool exec_split = false;
};

/// Languages with a known profile (the classification of the supported
/// language table plus cellscript).
const std::vector<LanguageProfile>& known_profiles();

/// Throws UnsupportedLanguage.
const LanguageProfile& profile_for(std::string_view lang);

struct CodegenOptions {
    /// Store key minted by the broker; required for instantiate.
    std::optional<std::string> fresh_key;
    /// Declared type of a method receiver (static profile only).
    std::optional<std::string> receiver_type;
};

enum class Endpoint { eval, exec };

struct GeneratedCode {
    std::string code;
    Endpoint endpoint = Endpoint::eval;
};

/// Target code for one IR. Throws MalformedIr (bad identifiers, missing key),
/// MissingTemplate (language without templates) or MalformedArgs.
GeneratedCode codegen(const Ir& ir, const LanguageProfile& profile, const CodegenOptions& options = {});

} // namespace kffi

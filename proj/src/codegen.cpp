#include "kffi/codegen.hpp"

#include "kffi/errors.hpp"

#include <cctype>
#include <cstdio>

namespace kffi {

std::string_view to_string(ProfileKind kind) noexcept {
    switch (kind) {
    case ProfileKind::dynamic_implicit: return "dynamic_implicit";
    case ProfileKind::static_explicit: return "static_explicit";
    case ProfileKind::dynamic_explicit: return "dynamic_explicit";
    }
    return "unknown";
}

const std::vector<LanguageProfile>& known_profiles() {
    static const std::vector<LanguageProfile> profiles = {
        {"cellscript", ProfileKind::dynamic_implicit, true, true, false},
        {"python", ProfileKind::dynamic_implicit, true, true, true},
        {"javascript", ProfileKind::dynamic_implicit, true, true, false},
        {"typescript", ProfileKind::dynamic_implicit, true, true, false},
        {"julia", ProfileKind::dynamic_implicit, true, true, false},
        {"racket", ProfileKind::dynamic_implicit, true, true, false},
        {"ruby", ProfileKind::dynamic_implicit, true, true, false},
        {"csharp", ProfileKind::dynamic_explicit, false, true, false},
        {"cpp", ProfileKind::static_explicit, false, false, false},
        {"go", ProfileKind::static_explicit, false, false, false},
        {"rust", ProfileKind::static_explicit, false, false, false},
    };
    return profiles;
}

const LanguageProfile& profile_for(std::string_view lang) {
    for (const auto& p : known_profiles()) {
        if (p.lang == lang) return p;
    }
    throw UnsupportedLanguage("no language profile for '" + std::string(lang) + "'");
}

namespace {

void require_identifier(const std::string& text, const char* field) {
    bool ok = !text.empty() && (std::isalpha(static_cast<unsigned char>(text[0])) || text[0] == '_');
    for (char c : text) ok = ok && (std::isalnum(static_cast<unsigned char>(c)) || c == '_');
    if (!ok) throw MalformedIr(std::string("field '") + field + "' is not an identifier: " + text);
}

const std::string& fresh_key(const Ir& ir, const CodegenOptions& options) {
    if (!options.fresh_key || options.fresh_key->empty()) {
        throw MalformedIr("instantiate needs a fresh store key for class " + ir.name);
    }
    return *options.fresh_key;
}

json parse_args(const Ir& ir) {
    json args = json::parse(ir.args.value_or("[]"), nullptr, false);
    if (args.is_discarded()) throw ParseError("args text is not valid JSON");
    if (!args.is_array()) throw MalformedArgs("args must be a JSON array");
    return args;
}

// JSON string escapes are valid string literal escapes in cellscript, Python
// and JavaScript.
std::string json_literal(const std::string& s) { return json(s).dump(); }

/// Per-language spellings for the implicit dynamic profile.
struct DynamicTemplate {
    const char* return_encode;
    const char* args_decode;
    const char* spread;
    const char* resolve;
    const char* construct_prefix;   // "new " or ""
    const char* stored;             // store-and-encode helper; empty when exec split
    const char* store_delete;
};

std::optional<DynamicTemplate> dynamic_template(std::string_view lang) {
    if (lang == "cellscript") {
        return DynamicTemplate{"kffi_return_encode", "kffi_args_decode", "*", "kffi_resolve", "new ",
                               "kffi_stored", "kffi_store_delete"};
    }
    if (lang == "python") {
        return DynamicTemplate{"kffi_return_encode", "kffi_args_decode", "*", "kffi_resolve", "", "", ""};
    }
    if (lang == "javascript" || lang == "typescript") {
        return DynamicTemplate{"kffiReturnEncode", "kffiArgsDecode", "...", "kffiResolve", "new ",
                               "kffiStored", "kffiStoreDelete"};
    }
    return std::nullopt;
}

GeneratedCode dynamic_implicit(const Ir& ir, const LanguageProfile& profile, const CodegenOptions& options) {
    const auto t = dynamic_template(profile.lang);
    if (!t) throw MissingTemplate("no code templates for language '" + profile.lang + "'");
    auto decoded = [&] {
        return std::string(t->spread) + t->args_decode + "(" + json_literal(*ir.args) + ")";
    };
    auto encoded = [&](const std::string& inner) { return std::string(t->return_encode) + "(" + inner + ")"; };

    switch (ir.kind) {
    case IrKind::function:
        require_identifier(ir.name, "name");
        return {encoded(ir.name + "(" + decoded() + ")"), Endpoint::eval};
    case IrKind::variable:
        require_identifier(ir.name, "name");
        return {encoded(ir.name), Endpoint::eval};
    case IrKind::method:
        require_identifier(*ir.method, "method");
        return {encoded(std::string(t->resolve) + "(" + json_literal(*ir.obj) + ")." + *ir.method + "(" +
                        decoded() + ")"),
                Endpoint::eval};
    case IrKind::instantiate: {
        require_identifier(ir.name, "class");
        const auto& key = fresh_key(ir, options);
        const std::string construct = t->construct_prefix + ir.name + "(" + decoded() + ")";
        if (profile.exec_split) {
            return {"globalVars[" + json_literal(key) + "] = " + construct, Endpoint::exec};
        }
        return {std::string(t->stored) + "(" + json_literal(key) + ", " + construct + ")", Endpoint::eval};
    }
    case IrKind::del:
        if (profile.exec_split) return {"globalVars.pop(" + json_literal(ir.name) + ", None)", Endpoint::exec};
        return {std::string(t->store_delete) + "(" + json_literal(ir.name) + ")", Endpoint::eval};
    }
    throw UnsupportedIrKind("unknown IR kind");
}

std::string cpp_string_literal(const std::string& s) {
    std::string out = "\"";
    for (unsigned char c : s) {
        switch (c) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        case '\t': out += "\\t"; break;
        case '\r': out += "\\r"; break;
        default:
            if (c < 0x20 || c == 0x7F) {
                char buf[8];
                std::snprintf(buf, sizeof buf, "\\%03o", c);
                out += buf;
            } else {
                out.push_back(static_cast<char>(c));
            }
        }
    }
    return out + "\"";
}

std::string cpp_value(const json& v) {
    switch (v.type()) {
    case json::value_t::null: return "nullptr";
    case json::value_t::boolean: return v.get<bool>() ? "true" : "false";
    case json::value_t::number_integer:
    case json::value_t::number_unsigned: return "static_cast<int64_t>(" + v.dump() + ")";
    case json::value_t::number_float: return "static_cast<double>(" + v.dump() + ")";
    case json::value_t::string: return "std::string(" + cpp_string_literal(v.get<std::string>()) + ")";
    case json::value_t::object:
        if (is_ref_map(v)) {
            const auto ref = ref_from_json(v);
            const std::string type = ref.type_name.empty() ? "std::any" : ref.type_name;
            return "kffi::global_as<" + type + ">(" + cpp_string_literal(ref.varname) + ")";
        }
        [[fallthrough]];
    default: return "nlohmann::json::parse(" + cpp_string_literal(v.dump()) + ")";
    }
}

std::string cpp_args(const Ir& ir) {
    std::string out;
    for (const auto& arg : parse_args(ir)) {
        if (!out.empty()) out += ", ";
        out += cpp_value(arg);
    }
    return out;
}

GeneratedCode static_explicit(const Ir& ir, const LanguageProfile& profile, const CodegenOptions& options) {
    if (profile.lang != "cpp") throw MissingTemplate("no code templates for language '" + profile.lang + "'");
    switch (ir.kind) {
    case IrKind::function:
        require_identifier(ir.name, "name");
        return {"kffi::return_encode(" + ir.name + "(" + cpp_args(ir) + "));", Endpoint::eval};
    case IrKind::variable:
        require_identifier(ir.name, "name");
        return {"kffi::return_encode(" + ir.name + ");", Endpoint::eval};
    case IrKind::method: {
        require_identifier(*ir.method, "method");
        std::string receiver;
        if (options.receiver_type) {
            receiver = "kffi::global_as<" + *options.receiver_type + ">(" + cpp_string_literal(*ir.obj) + ")";
        } else {
            require_identifier(*ir.obj, "obj");
            receiver = *ir.obj;
        }
        return {"kffi::return_encode(" + receiver + "." + *ir.method + "(" + cpp_args(ir) + "));",
                Endpoint::eval};
    }
    case IrKind::instantiate: {
        require_identifier(ir.name, "class");
        const auto key = cpp_string_literal(fresh_key(ir, options));
        return {"kffi::globalVars[" + key + "] = std::make_any<" + ir.name + ">(" + cpp_args(ir) + ");\n" +
                    "kffi::return_encode(kffi::make_ref(" + key + ", " + cpp_string_literal(ir.name) + "));",
                Endpoint::eval};
    }
    case IrKind::del:
        return {"kffi::globalVars.erase(" + cpp_string_literal(ir.name) + ");\nkffi::return_encode(nullptr);",
                Endpoint::eval};
    }
    throw UnsupportedIrKind("unknown IR kind");
}

std::string csharp_string_literal(const std::string& s) {
    std::string out = "@\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    return out + "\"";
}

GeneratedCode dynamic_explicit(const Ir& ir, const LanguageProfile& profile, const CodegenOptions& options) {
    if (profile.lang != "csharp") throw MissingTemplate("no code templates for language '" + profile.lang + "'");
    std::string prologue;
    std::string call_args;
    if (ir.args) {
        const auto count = parse_args(ir).size();
        prologue = "dynamic[] kffiArgs = Kffi.ArgsDecode(" + csharp_string_literal(*ir.args) + ");\n";
        for (std::size_t i = 0; i < count; ++i) {
            if (i) call_args += ", ";
            call_args += "kffiArgs[" + std::to_string(i) + "]";
        }
    }
    switch (ir.kind) {
    case IrKind::function:
        require_identifier(ir.name, "name");
        return {prologue + "Kffi.ReturnEncode(" + ir.name + "(" + call_args + "));", Endpoint::eval};
    case IrKind::variable:
        require_identifier(ir.name, "name");
        return {"Kffi.ReturnEncode(" + ir.name + ");", Endpoint::eval};
    case IrKind::method:
        require_identifier(*ir.method, "method");
        return {prologue + "Kffi.ReturnEncode(Kffi.Resolve(" + csharp_string_literal(*ir.obj) + ")." +
                    *ir.method + "(" + call_args + "));",
                Endpoint::eval};
    case IrKind::instantiate: {
        require_identifier(ir.name, "class");
        const auto key = csharp_string_literal(fresh_key(ir, options));
        return {prologue + "Kffi.GlobalVars[" + key + "] = new " + ir.name + "(" + call_args + ");\n" +
                    "Kffi.ReturnEncode(Kffi.MakeRef(" + key + ", " + csharp_string_literal(ir.name) + "));",
                Endpoint::eval};
    }
    case IrKind::del:
        return {"Kffi.GlobalVars.Remove(" + csharp_string_literal(ir.name) + ");\nKffi.ReturnEncode(null);",
                Endpoint::eval};
    }
    throw UnsupportedIrKind("unknown IR kind");
}

} // namespace

GeneratedCode codegen(const Ir& ir, const LanguageProfile& profile, const CodegenOptions& options) {
    validate(ir);
    switch (profile.profile) {
    case ProfileKind::dynamic_implicit: return dynamic_implicit(ir, profile, options);
    case ProfileKind::static_explicit: return static_explicit(ir, profile, options);
    case ProfileKind::dynamic_explicit: return dynamic_explicit(ir, profile, options);
    }
    throw UnsupportedIrKind("unknown profile");
}

} // namespace kffi

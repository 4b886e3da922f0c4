#pragma once

// Canonical wire forms shared by every transport and adapter. The byte-level
// contract is written down in docs/wire-protocol.md.

#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

namespace kffi {

using json = nlohmann::ordered_json;

/// Compact dump that replaces invalid UTF-8 instead of throwing; for
/// diagnostics and response envelopes.
inline std::string dump_lenient(const json& j) {
    return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

enum class IrKind { function, variable, method, instantiate, del };

std::string_view to_string(IrKind kind) noexcept;
std::optional<IrKind> ir_kind_from_string(std::string_view text) noexcept;

/// One foreign operation. `name` holds the function, variable or class name,
/// or the store key for deletes. `args` is the text of a JSON array.
struct Ir {
    IrKind kind = IrKind::function;
    std::string name;
    std::optional<std::string> obj;
    std::optional<std::string> method;
    std::optional<std::string> args;

    static Ir function(std::string name, std::string args);
    static Ir variable(std::string name);
    static Ir method_call(std::string obj, std::string method, std::string args);
    static Ir instantiate(std::string class_name, std::string args);
    static Ir remove(std::string store_key);

    bool operator==(const Ir&) const = default;
};

/// Throws MalformedIr naming the offending field.
void validate(const Ir& ir);

/// Compact canonical JSON: "type" first, then name/obj/method/class, then
/// "args". Deterministic byte output.
std::string ir_to_json(const Ir& ir);
Ir ir_from_json(std::string_view text);

/// Reserved key marking a JSON map as an object reference. Its value is the
/// id of the kernel whose store owns the object.
inline constexpr std::string_view kRefMarker = "__kffi_ref__";

struct ObjectRef {
    std::string varname;
    std::string lang;
    std::string type_name;
    std::string owner_kernel;

    json to_json() const;
    std::string to_text() const { return to_json().dump(); }

    bool operator==(const ObjectRef&) const = default;
};

/// Throws std::invalid_argument on an empty store key.
ObjectRef make_ref(std::string store_key, std::string lang, std::string type_name,
                   std::string owner_kernel);

bool is_ref_map(const json& value);
/// Throws MalformedArgs when the marker is present but the map is malformed.
ObjectRef ref_from_json(const json& value);

enum class ValueClass { primitive_json, reference };

struct EncodedValue {
    std::string text;
    ValueClass cls = ValueClass::primitive_json;

    /// Parses and classifies wire text; throws ParseError on invalid JSON.
    static EncodedValue classify(std::string text);
};

enum class TypeProfile { dynamic_type, static_type };

struct KernelDescriptor {
    std::string kernel_id;
    std::string lang;
    TypeProfile type_profile = TypeProfile::dynamic_type;
    bool eval_capable = true;
    bool exec_split = false;
    std::optional<std::string> side_channel_endpoint;
    std::optional<std::string> wire_endpoint;

    json to_json() const;
    static KernelDescriptor from_json(const json& j);
};

} // namespace kffi

#include "kffi/wire.hpp"

#include "kffi/errors.hpp"

#include <array>
#include <stdexcept>

namespace kffi {

namespace {

constexpr std::array<std::pair<IrKind, std::string_view>, 5> kKindNames{{
    {IrKind::function, "function"},
    {IrKind::variable, "variable"},
    {IrKind::method, "method"},
    {IrKind::instantiate, "instantiate"},
    {IrKind::del, "delete"},
}};

void require(bool present, const Ir& ir, std::string_view field) {
    if (!present) {
        throw MalformedIr(std::string(to_string(ir.kind)) + " IR is missing field '" +
                          std::string(field) + "'");
    }
}

void forbid(bool present, const Ir& ir, std::string_view field) {
    if (present) {
        throw MalformedIr(std::string(to_string(ir.kind)) + " IR must not carry field '" +
                          std::string(field) + "'");
    }
}

std::string string_field(const json& j, const char* key) {
    const auto& v = j.at(key);
    if (!v.is_string()) {
        throw MalformedIr(std::string("field '") + key + "' must be a string");
    }
    return v.get<std::string>();
}

} // namespace

std::string_view to_string(IrKind kind) noexcept {
    for (const auto& [k, name] : kKindNames) {
        if (k == kind) return name;
    }
    return "unknown";
}

std::optional<IrKind> ir_kind_from_string(std::string_view text) noexcept {
    for (const auto& [k, name] : kKindNames) {
        if (name == text) return k;
    }
    return std::nullopt;
}

Ir Ir::function(std::string name, std::string args) {
    return Ir{IrKind::function, std::move(name), std::nullopt, std::nullopt, std::move(args)};
}

Ir Ir::variable(std::string name) {
    return Ir{IrKind::variable, std::move(name), std::nullopt, std::nullopt, std::nullopt};
}

Ir Ir::method_call(std::string obj, std::string method, std::string args) {
    return Ir{IrKind::method, {}, std::move(obj), std::move(method), std::move(args)};
}

Ir Ir::instantiate(std::string class_name, std::string args) {
    return Ir{IrKind::instantiate, std::move(class_name), std::nullopt, std::nullopt,
              std::move(args)};
}

Ir Ir::remove(std::string store_key) {
    return Ir{IrKind::del, std::move(store_key), std::nullopt, std::nullopt, std::nullopt};
}

void validate(const Ir& ir) {
    switch (ir.kind) {
    case IrKind::function:
    case IrKind::instantiate:
        require(!ir.name.empty(), ir, ir.kind == IrKind::function ? "name" : "class");
        require(ir.args.has_value(), ir, "args");
        forbid(ir.obj.has_value(), ir, "obj");
        forbid(ir.method.has_value(), ir, "method");
        break;
    case IrKind::variable:
    case IrKind::del:
        require(!ir.name.empty(), ir, "name");
        forbid(ir.obj.has_value(), ir, "obj");
        forbid(ir.method.has_value(), ir, "method");
        forbid(ir.args.has_value(), ir, "args");
        break;
    case IrKind::method:
        require(ir.obj.has_value() && !ir.obj->empty(), ir, "obj");
        require(ir.method.has_value() && !ir.method->empty(), ir, "method");
        require(ir.args.has_value(), ir, "args");
        forbid(!ir.name.empty(), ir, "name");
        break;
    }
    if (ir.args) {
        json parsed = json::parse(*ir.args, nullptr, false);
        if (parsed.is_discarded() || !parsed.is_array()) {
            throw MalformedIr("field 'args' must hold the text of a JSON array");
        }
    }
}

std::string ir_to_json(const Ir& ir) {
    validate(ir);
    json out = json::object();
    out["type"] = to_string(ir.kind);
    switch (ir.kind) {
    case IrKind::function:
    case IrKind::variable:
    case IrKind::del:
        out["name"] = ir.name;
        break;
    case IrKind::method:
        out["obj"] = *ir.obj;
        out["method"] = *ir.method;
        break;
    case IrKind::instantiate:
        out["class"] = ir.name;
        break;
    }
    if (ir.args) out["args"] = *ir.args;
    return out.dump();
}

Ir ir_from_json(std::string_view text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw ParseError("IR text is not valid JSON");
    if (!j.is_object()) throw MalformedIr("IR must be a JSON object");
    if (!j.contains("type") || !j["type"].is_string()) {
        throw MalformedIr("IR is missing field 'type'");
    }
    const auto type = j["type"].get<std::string>();
    const auto kind = ir_kind_from_string(type);
    if (!kind) throw UnsupportedIrKind("unsupported IR kind '" + type + "'");

    Ir ir;
    ir.kind = *kind;
    for (const auto& [key, value] : j.items()) {
        if (key == "type") continue;
        if (key == "args") {
            ir.args = string_field(j, "args");
        } else if (key == "name" && ir.kind != IrKind::method && ir.kind != IrKind::instantiate) {
            ir.name = string_field(j, "name");
        } else if (key == "class" && ir.kind == IrKind::instantiate) {
            ir.name = string_field(j, "class");
        } else if (key == "obj" && ir.kind == IrKind::method) {
            ir.obj = string_field(j, "obj");
        } else if (key == "obj" && ir.kind == IrKind::del) {
            if (j.contains("name")) throw MalformedIr("delete IR carries both 'name' and 'obj'");
            ir.name = string_field(j, "obj");
        } else if (key == "method" && ir.kind == IrKind::method) {
            ir.method = string_field(j, "method");
        } else {
            throw MalformedIr(type + " IR must not carry field '" + key + "'");
        }
    }
    validate(ir);
    return ir;
}

json ObjectRef::to_json() const {
    json out = json::object();
    out["varname"] = varname;
    out["lang"] = lang;
    out["typeName"] = type_name;
    out[std::string(kRefMarker)] = owner_kernel;
    return out;
}

ObjectRef make_ref(std::string store_key, std::string lang, std::string type_name,
                   std::string owner_kernel) {
    if (store_key.empty()) throw std::invalid_argument("object reference needs a store key");
    return ObjectRef{std::move(store_key), std::move(lang), std::move(type_name),
                     std::move(owner_kernel)};
}

bool is_ref_map(const json& value) {
    return value.is_object() && value.contains(std::string(kRefMarker));
}

ObjectRef ref_from_json(const json& value) {
    auto field = [&](const char* key) -> std::string {
        auto it = value.find(key);
        if (it == value.end() || !it->is_string()) {
            throw MalformedArgs(std::string("object reference is missing '") + key + "'");
        }
        return it->get<std::string>();
    };
    const auto& marker = value.at(std::string(kRefMarker));
    if (!marker.is_string()) throw MalformedArgs("object reference owner must be a string");
    ObjectRef ref{field("varname"), field("lang"), field("typeName"), marker.get<std::string>()};
    if (ref.varname.empty()) throw MalformedArgs("object reference has an empty varname");
    return ref;
}

EncodedValue EncodedValue::classify(std::string text) {
    json parsed = json::parse(text, nullptr, false);
    if (parsed.is_discarded()) throw ParseError("encoded value is not valid JSON: " + text);
    const auto cls = is_ref_map(parsed) ? ValueClass::reference : ValueClass::primitive_json;
    return EncodedValue{std::move(text), cls};
}

json KernelDescriptor::to_json() const {
    json out = json::object();
    out["kernel_id"] = kernel_id;
    out["lang"] = lang;
    out["type_profile"] = type_profile == TypeProfile::static_type ? "static" : "dynamic";
    out["eval_capable"] = eval_capable;
    out["exec_split"] = exec_split;
    out["side_channel_endpoint"] = side_channel_endpoint ? json(*side_channel_endpoint) : json();
    out["wire_endpoint"] = wire_endpoint ? json(*wire_endpoint) : json();
    return out;
}

KernelDescriptor KernelDescriptor::from_json(const json& j) {
    if (!j.is_object()) throw MalformedArgs("kernel descriptor must be a JSON object");
    KernelDescriptor d;
    try {
        d.kernel_id = j.at("kernel_id").get<std::string>();
        d.lang = j.at("lang").get<std::string>();
        const auto profile = j.value("type_profile", std::string("dynamic"));
        if (profile != "dynamic" && profile != "static") {
            throw MalformedArgs("type_profile must be 'dynamic' or 'static'");
        }
        d.type_profile = profile == "static" ? TypeProfile::static_type : TypeProfile::dynamic_type;
        d.eval_capable = j.value("eval_capable", true);
        d.exec_split = j.value("exec_split", false);
        if (j.contains("side_channel_endpoint") && !j["side_channel_endpoint"].is_null()) {
            d.side_channel_endpoint = j["side_channel_endpoint"].get<std::string>();
        }
        if (j.contains("wire_endpoint") && !j["wire_endpoint"].is_null()) {
            d.wire_endpoint = j["wire_endpoint"].get<std::string>();
        }
    } catch (const json::exception& e) {
        throw MalformedArgs(std::string("invalid kernel descriptor: ") + e.what());
    }
    if (d.kernel_id.empty()) throw MalformedArgs("kernel descriptor needs a kernel_id");
    if (!d.eval_capable && d.side_channel_endpoint) {
        throw MalformedArgs("eval-incapable kernel cannot advertise a side channel");
    }
    return d;
}

} // namespace kffi

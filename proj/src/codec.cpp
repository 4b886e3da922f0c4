#include "kffi/codec.hpp"

#include "kffi/errors.hpp"

#include <cmath>
#include <limits>

namespace kffi::codec {

using namespace cellscript;

namespace {

std::string dump(const json& j) {
    try {
        return j.dump(-1, ' ', false, json::error_handler_t::strict);
    } catch (const json::type_error& e) {
        throw MarshallingError(std::string("value is not valid UTF-8 text: ") + e.what());
    }
}

json to_json_at(const Value& value, Context& ctx, int depth) {
    if (depth > ctx.max_depth) {
        throw MarshallingError("value nests deeper than " + std::to_string(ctx.max_depth) +
                               " levels (cyclic structure?)");
    }
    struct Visitor {
        Context& ctx;
        int depth;
        json operator()(std::monostate) const { return nullptr; }
        json operator()(bool b) const { return b; }
        json operator()(std::int64_t i) const { return i; }
        json operator()(double d) const {
            if (!std::isfinite(d)) throw MarshallingError("non-finite float cannot be marshalled");
            return d;
        }
        json operator()(const std::string& s) const { return s; }
        json operator()(const ListPtr& list) const {
            json out = json::array();
            for (const auto& item : *list) out.push_back(to_json_at(item, ctx, depth + 1));
            return out;
        }
        json operator()(const MapPtr& map) const {
            json out = json::object();
            for (const auto& [k, v] : *map) {
                if (k == kRefMarker) {
                    throw MarshallingError("map key '" + k + "' is reserved for object references");
                }
                out[k] = to_json_at(v, ctx, depth + 1);
            }
            return out;
        }
        json operator()(const InstancePtr& obj) const {
            if (!ctx.store) throw MarshallingError("no object store to marshal " + obj->cls->name);
            const auto key = ctx.store->put(Value(obj), obj->cls->name);
            if (ctx.minted) ctx.minted->push_back(key);
            return make_ref(key, ctx.lang, obj->cls->name, ctx.kernel_id).to_json();
        }
        json operator()(const ProxyPtr& proxy) const { return proxy->ref.to_json(); }
        json operator()(const Function&) const { throw MarshallingError("cannot marshal value of type function"); }
        json operator()(const ClassPtr&) const { throw MarshallingError("cannot marshal value of type class"); }
        json operator()(const BuiltinPtr&) const { throw MarshallingError("cannot marshal value of type builtin"); }
        json operator()(const Encoded& e) const {
            json parsed = json::parse(e.text, nullptr, false);
            if (parsed.is_discarded()) throw MarshallingError("encoded payload is not JSON");
            return parsed;
        }
    };
    return std::visit(Visitor{ctx, depth}, value.data);
}

Value from_json_at(const json& j, Context& ctx, int depth) {
    if (depth > ctx.max_depth) {
        throw MarshallingError("value nests deeper than " + std::to_string(ctx.max_depth) + " levels");
    }
    switch (j.type()) {
    case json::value_t::null: return Value();
    case json::value_t::boolean: return j.get<bool>();
    case json::value_t::number_integer: return j.get<std::int64_t>();
    case json::value_t::number_unsigned: {
        const auto u = j.get<std::uint64_t>();
        if (u > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max())) {
            throw MarshallingError("integer " + std::to_string(u) + " exceeds the 64-bit signed range");
        }
        return static_cast<std::int64_t>(u);
    }
    case json::value_t::number_float: return j.get<double>();
    case json::value_t::string: return j.get<std::string>();
    case json::value_t::array: {
        List items;
        items.reserve(j.size());
        for (const auto& item : j) items.push_back(from_json_at(item, ctx, depth + 1));
        return Value(std::move(items));
    }
    case json::value_t::object: {
        if (is_ref_map(j)) {
            ObjectRef ref = ref_from_json(j);
            if (ref.owner_kernel == ctx.kernel_id) {
                if (!ctx.store) throw UnknownReference("no object store for " + ref.varname);
                return ctx.store->get(ref.varname).object;
            }
            return Value(std::make_shared<const Proxy>(Proxy{std::move(ref)}));
        }
        Map entries;
        for (const auto& [k, v] : j.items()) entries[k] = from_json_at(v, ctx, depth + 1);
        return Value(std::move(entries));
    }
    default: throw MarshallingError("unsupported JSON value");
    }
}

} // namespace

json to_json(const Value& value, Context& ctx) { return to_json_at(value, ctx, 0); }

EncodedValue encode(const Value& value, Context& ctx) {
    const json j = to_json(value, ctx);
    return EncodedValue{dump(j), is_ref_map(j) ? ValueClass::reference : ValueClass::primitive_json};
}

Value from_json(const json& value, Context& ctx) { return from_json_at(value, ctx, 0); }

Value decode(std::string_view text, Context& ctx) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw ParseError("encoded value is not valid JSON");
    return from_json(j, ctx);
}

std::string encode_args(std::span<const Value> args, Context& ctx) {
    json out = json::array();
    for (const auto& arg : args) out.push_back(to_json(arg, ctx));
    return dump(out);
}

std::vector<Value> decode_args(std::string_view args_text, Context& ctx) {
    json j = json::parse(args_text, nullptr, false);
    if (j.is_discarded()) throw ParseError("args text is not valid JSON");
    if (!j.is_array()) throw MalformedArgs("args must be a JSON array");
    std::vector<Value> out;
    out.reserve(j.size());
    for (const auto& item : j) out.push_back(from_json(item, ctx));
    return out;
}

} // namespace kffi::codec

#include "kffi/cellscript/value.hpp"

#include "kffi/cellscript/ast.hpp"

#include <charconv>
#include <cmath>

namespace kffi::cellscript {

namespace {

std::string quote(const std::string& s) {
    return nlohmann::json(s).dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

std::string object_repr(const std::string& type) {
    return type.empty() ? "<object>" : "<" + type + " object>";
}

} // namespace

std::string format_float(double d) {
    if (std::isnan(d)) return "nan";
    if (std::isinf(d)) return d < 0 ? "-inf" : "inf";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, d);
    std::string out(buf, ptr);
    if (out.find_first_of(".en") == std::string::npos) out += ".0";
    return out;
}

std::string type_name(const Value& v) {
    struct Visitor {
        std::string operator()(std::monostate) const { return "null"; }
        std::string operator()(bool) const { return "bool"; }
        std::string operator()(std::int64_t) const { return "int"; }
        std::string operator()(double) const { return "float"; }
        std::string operator()(const std::string&) const { return "string"; }
        std::string operator()(const ListPtr&) const { return "list"; }
        std::string operator()(const MapPtr&) const { return "map"; }
        std::string operator()(const InstancePtr& o) const { return o->cls->name; }
        std::string operator()(const ProxyPtr& p) const {
            return p->ref.type_name.empty() ? "object" : p->ref.type_name;
        }
        std::string operator()(const Function&) const { return "function"; }
        std::string operator()(const ClassPtr&) const { return "class"; }
        std::string operator()(const BuiltinPtr&) const { return "builtin"; }
        std::string operator()(const Encoded&) const { return "encoded"; }
    };
    return std::visit(Visitor{}, v.data);
}

bool equals(const Value& a, const Value& b) {
    if (a.is<std::int64_t>() && b.is<double>()) {
        return static_cast<double>(a.as<std::int64_t>()) == b.as<double>();
    }
    if (a.is<double>() && b.is<std::int64_t>()) return equals(b, a);
    if (a.data.index() != b.data.index()) return false;

    struct Visitor {
        const Value& other;
        bool operator()(std::monostate) const { return true; }
        bool operator()(bool x) const { return x == other.as<bool>(); }
        bool operator()(std::int64_t x) const { return x == other.as<std::int64_t>(); }
        bool operator()(double x) const { return x == other.as<double>(); }
        bool operator()(const std::string& x) const { return x == other.as<std::string>(); }
        bool operator()(const ListPtr& x) const {
            const auto& y = other.as<ListPtr>();
            if (x->size() != y->size()) return false;
            for (std::size_t i = 0; i < x->size(); ++i) {
                if (!equals((*x)[i], (*y)[i])) return false;
            }
            return true;
        }
        bool operator()(const MapPtr& x) const {
            const auto& y = other.as<MapPtr>();
            if (x->size() != y->size()) return false;
            for (auto it = x->begin(), jt = y->begin(); it != x->end(); ++it, ++jt) {
                if (it->first != jt->first || !equals(it->second, jt->second)) return false;
            }
            return true;
        }
        bool operator()(const InstancePtr& x) const { return x == other.as<InstancePtr>(); }
        bool operator()(const ProxyPtr& x) const {
            const auto& y = other.as<ProxyPtr>();
            return x->ref.owner_kernel == y->ref.owner_kernel && x->ref.varname == y->ref.varname;
        }
        bool operator()(const Function& x) const { return x.decl == other.as<Function>().decl; }
        bool operator()(const ClassPtr& x) const { return x == other.as<ClassPtr>(); }
        bool operator()(const BuiltinPtr& x) const { return x == other.as<BuiltinPtr>(); }
        bool operator()(const Encoded& x) const { return x.text == other.as<Encoded>().text; }
    };
    return std::visit(Visitor{b}, a.data);
}

bool truthy(const Value& v) {
    if (v.is_null()) return false;
    if (v.is<bool>()) return v.as<bool>();
    if (v.is<std::int64_t>()) return v.as<std::int64_t>() != 0;
    if (v.is<double>()) return v.as<double>() != 0.0;
    if (v.is<std::string>()) return !v.as<std::string>().empty();
    if (v.is<ListPtr>()) return !v.as<ListPtr>()->empty();
    if (v.is<MapPtr>()) return !v.as<MapPtr>()->empty();
    return true;
}

std::string repr(const Value& v) {
    struct Visitor {
        std::string operator()(std::monostate) const { return "null"; }
        std::string operator()(bool b) const { return b ? "true" : "false"; }
        std::string operator()(std::int64_t i) const { return std::to_string(i); }
        std::string operator()(double d) const { return format_float(d); }
        std::string operator()(const std::string& s) const { return quote(s); }
        std::string operator()(const ListPtr& l) const {
            std::string out = "[";
            for (std::size_t i = 0; i < l->size(); ++i) {
                if (i) out += ", ";
                out += repr((*l)[i]);
            }
            return out + "]";
        }
        std::string operator()(const MapPtr& m) const {
            std::string out = "{";
            bool first = true;
            for (const auto& [k, val] : *m) {
                if (!first) out += ", ";
                first = false;
                out += quote(k) + ": " + repr(val);
            }
            return out + "}";
        }
        std::string operator()(const InstancePtr& o) const { return object_repr(o->cls->name); }
        std::string operator()(const ProxyPtr& p) const { return object_repr(p->ref.type_name); }
        std::string operator()(const Function& f) const { return "<fn " + f.decl->name + ">"; }
        std::string operator()(const ClassPtr& c) const { return "<class " + c->name + ">"; }
        std::string operator()(const BuiltinPtr& b) const { return "<builtin " + b->name + ">"; }
        std::string operator()(const Encoded& e) const { return "<encoded " + e.text + ">"; }
    };
    return std::visit(Visitor{}, v.data);
}

std::string display(const Value& v) {
    if (v.is<std::string>()) return v.as<std::string>();
    return repr(v);
}

} // namespace kffi::cellscript

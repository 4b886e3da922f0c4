#pragma once

#include "kffi/wire.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace kffi::cellscript {

struct FnDecl;
struct Value;

using List = std::vector<Value>;
using Map = std::map<std::string, Value>;

struct Class {
    std::string name;
    std::map<std::string, std::shared_ptr<const FnDecl>> methods;
};

struct Instance {
    std::shared_ptr<const Class> cls;
    Map fields;
};

/// Stand-in for an object owned by another kernel. Opaque to arithmetic.
struct Proxy {
    ObjectRef ref;
};

struct Function {
    std::shared_ptr<const FnDecl> decl;
};

struct Builtin {
    std::string name;
    std::function<Value(std::span<Value>)> fn;
};

/// Text that is already in wire form; produced by the return-encode shim so
/// the eval endpoint does not encode it a second time.
struct Encoded {
    std::string text;
};

struct Value {
    using Storage = std::variant<std::monostate, bool, std::int64_t, double, std::string,
                                 std::shared_ptr<List>, std::shared_ptr<Map>,
                                 std::shared_ptr<Instance>, std::shared_ptr<const Proxy>,
                                 Function, std::shared_ptr<const Class>,
                                 std::shared_ptr<const Builtin>, Encoded>;
    Storage data;

    Value() = default;
    Value(std::nullptr_t) {}
    Value(bool b) : data(b) {}
    Value(int i) : data(static_cast<std::int64_t>(i)) {}
    Value(std::int64_t i) : data(i) {}
    Value(double d) : data(d) {}
    Value(const char* s) : data(std::string(s)) {}
    Value(std::string s) : data(std::move(s)) {}
    Value(List items) : data(std::make_shared<List>(std::move(items))) {}
    Value(Map entries) : data(std::make_shared<Map>(std::move(entries))) {}
    Value(std::shared_ptr<List> l) : data(std::move(l)) {}
    Value(std::shared_ptr<Map> m) : data(std::move(m)) {}
    Value(std::shared_ptr<Instance> o) : data(std::move(o)) {}
    Value(std::shared_ptr<const Proxy> p) : data(std::move(p)) {}
    Value(Function f) : data(std::move(f)) {}
    Value(std::shared_ptr<const Class> c) : data(std::move(c)) {}
    Value(std::shared_ptr<const Builtin> b) : data(std::move(b)) {}
    Value(Encoded e) : data(std::move(e)) {}

    template <typename T> bool is() const { return std::holds_alternative<T>(data); }
    template <typename T> const T& as() const { return std::get<T>(data); }
    template <typename T> T& as() { return std::get<T>(data); }

    bool is_null() const { return is<std::monostate>(); }
};

using ListPtr = std::shared_ptr<List>;
using MapPtr = std::shared_ptr<Map>;
using InstancePtr = std::shared_ptr<Instance>;
using ProxyPtr = std::shared_ptr<const Proxy>;
using ClassPtr = std::shared_ptr<const Class>;
using BuiltinPtr = std::shared_ptr<const Builtin>;

/// Language-level type name: int, float, string, ..., or the class name.
std::string type_name(const Value& v);

/// Structural for data, identity for instances, (owner, key) for proxies.
bool equals(const Value& a, const Value& b);

bool truthy(const Value& v);

/// Source-like rendering; strings are quoted.
std::string repr(const Value& v);

/// Like repr, but a top-level string is printed raw.
std::string display(const Value& v);

std::string format_float(double d);

} // namespace kffi::cellscript

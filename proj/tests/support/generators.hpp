#pragma once

#include "kffi/cellscript/value.hpp"
#include "kffi/store.hpp"
#include "kffi/wire.hpp"

#include <cstdint>
#include <limits>
#include <memory>
#include <random>
#include <string>

namespace kffi::fixture {

namespace cs = kffi::cellscript;

class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    int below(int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng_); }
    bool coin() { return below(2) == 0; }

    std::int64_t integer() {
        switch (below(4)) {
        case 0: return below(21) - 10;
        case 1: return std::numeric_limits<std::int64_t>::max() - below(3);
        case 2: return std::numeric_limits<std::int64_t>::min() + below(3);
        default: return std::uniform_int_distribution<std::int64_t>()(rng_);
        }
    }

    double real() {
        switch (below(3)) {
        case 0: return below(1000) / 8.0;
        case 1: return std::uniform_real_distribution<double>(-1e300, 1e300)(rng_);
        default: return std::uniform_real_distribution<double>(-1.0, 1.0)(rng_);
        }
    }

    std::string text() {
        static const char* pieces[] = {"a", "Z", "0", " ", "\"", "\\", "\n", "\t", "/", "\x01",
                                       "\xc3\xa9", "\xe2\x82\xac", "\xf0\x9f\x98\x80", "varname", "{", "]"};
        std::string out;
        const int n = below(8);
        for (int i = 0; i < n; ++i) out += pieces[below(16)];
        return out;
    }

    std::string identifier() {
        static const char first[] = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_";
        static const char rest[] = "abcdefghijklmnopqrstuvwxyz0123456789_";
        std::string out(1, first[below(sizeof first - 1)]);
        const int n = below(10);
        for (int i = 0; i < n; ++i) out.push_back(rest[below(sizeof rest - 1)]);
        return out;
    }

    /// Primitive or collection value, no objects.
    cs::Value data(int depth = 0) {
        const int pick = below(depth >= 3 ? 5 : 7);
        switch (pick) {
        case 0: return cs::Value();
        case 1: return cs::Value(coin());
        case 2: return cs::Value(integer());
        case 3: return cs::Value(real());
        case 4: return cs::Value(text());
        case 5: {
            cs::List items;
            const int n = below(5);
            for (int i = 0; i < n; ++i) items.push_back(data(depth + 1));
            return cs::Value(std::move(items));
        }
        default: {
            cs::Map entries;
            const int n = below(5);
            for (int i = 0; i < n; ++i) entries[text()] = data(depth + 1);
            return cs::Value(std::move(entries));
        }
        }
    }

    /// Like data() but with object instances injected at the leaves.
    cs::Value with_objects(int depth = 0) {
        if (below(5) == 0) return instance();
        const int pick = below(depth >= 3 ? 2 : 4);
        if (pick == 0) return data(3);
        if (pick == 1) return instance();
        if (pick == 2) {
            cs::List items;
            const int n = below(4);
            for (int i = 0; i < n; ++i) items.push_back(with_objects(depth + 1));
            return cs::Value(std::move(items));
        }
        cs::Map entries;
        const int n = below(4);
        for (int i = 0; i < n; ++i) entries[identifier()] = with_objects(depth + 1);
        return cs::Value(std::move(entries));
    }

    cs::Value instance() {
        auto cls = std::make_shared<cs::Class>();
        cls->name = "C" + std::to_string(below(5));
        auto obj = std::make_shared<cs::Instance>();
        obj->cls = cls;
        obj->fields["v"] = cs::Value(integer());
        return cs::Value(obj);
    }

    /// JSON value suitable as an IR argument, sometimes an object reference.
    json arg(int depth = 0) {
        switch (below(depth >= 2 ? 5 : 8)) {
        case 0: return nullptr;
        case 1: return coin();
        case 2: return integer();
        case 3: return real();
        case 4: return text();
        case 5: {
            json a = json::array();
            const int n = below(4);
            for (int i = 0; i < n; ++i) a.push_back(arg(depth + 1));
            return a;
        }
        case 6: {
            json o = json::object();
            const int n = below(4);
            for (int i = 0; i < n; ++i) o[identifier()] = arg(depth + 1);
            return o;
        }
        default: return make_ref(generate_uuid(), "cellscript", identifier(), "K" + std::to_string(below(3))).to_json();
        }
    }

    std::string args_text() {
        json a = json::array();
        const int n = below(5);
        for (int i = 0; i < n; ++i) a.push_back(arg());
        return a.dump();
    }

    Ir ir() {
        switch (below(5)) {
        case 0: return Ir::function(identifier(), args_text());
        case 1: return Ir::variable(identifier());
        case 2: return Ir::method_call(coin() ? generate_uuid() : identifier(), identifier(), args_text());
        case 3: return Ir::instantiate(identifier(), args_text());
        default: return Ir::remove(coin() ? generate_uuid() : identifier());
        }
    }

    std::mt19937_64& engine() { return rng_; }

private:
    std::mt19937_64 rng_;
};

} // namespace kffi::fixture

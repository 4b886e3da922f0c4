#pragma once

#include "kffi/cellscript/value.hpp"
#include "kffi/store.hpp"
#include "kffi/wire.hpp"

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace kffi::codec {

using cellscript::Value;
using Store = GlobalStore<Value>;

inline constexpr int kDefaultMaxDepth = 64;

/// The kernel on whose behalf values are encoded or decoded.
struct Context {
    std::string kernel_id;
    std::string lang;
    Store* store = nullptr;
    int max_depth = kDefaultMaxDepth;
    /// When set, receives every store key minted while encoding.
    std::vector<std::string>* minted = nullptr;
};

/// Primitives and collections become plain JSON; local objects are stored and
/// replaced by a reference; proxies re-emit the reference they wrap.
EncodedValue encode(const Value& value, Context& ctx);
json to_json(const Value& value, Context& ctx);

/// References owned by `ctx.kernel_id` resolve to the stored object itself;
/// references owned elsewhere become proxies.
Value decode(std::string_view text, Context& ctx);
Value from_json(const json& value, Context& ctx);

/// Text of a JSON array holding each encoded argument.
std::string encode_args(std::span<const Value> args, Context& ctx);
std::vector<Value> decode_args(std::string_view args_text, Context& ctx);

} // namespace kffi::codec

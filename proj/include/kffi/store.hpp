#pragma once

#include "kffi/errors.hpp"

#include <cstdint>
#include <map>
#include <mutex>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace kffi {

/// RFC-4122 version 4 UUID text, lower-case.
inline std::string generate_uuid() {
    thread_local std::mt19937_64 rng{[] {
        std::random_device rd;
        std::seed_seq seq{rd(), rd(), rd(), rd(), rd(), rd(), rd(), rd()};
        return std::mt19937_64(seq);
    }()};
    std::uint64_t hi = rng();
    std::uint64_t lo = rng();
    hi = (hi & 0xFFFFFFFFFFFF0FFFULL) | 0x0000000000004000ULL;
    lo = (lo & 0x3FFFFFFFFFFFFFFFULL) | 0x8000000000000000ULL;

    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(36);
    auto emit = [&](std::uint64_t word, int from_nibble, int count) {
        for (int i = from_nibble; i < from_nibble + count; ++i) {
            out.push_back(kHex[(word >> (60 - 4 * i)) & 0xF]);
        }
    };
    emit(hi, 0, 8);
    out.push_back('-');
    emit(hi, 8, 4);
    out.push_back('-');
    emit(hi, 12, 4);
    out.push_back('-');
    emit(lo, 0, 4);
    out.push_back('-');
    emit(lo, 4, 12);
    return out;
}

/// Per-kernel global variable store: key -> (live object, type name).
///
/// `Handle` is whatever the owning runtime uses to keep an object alive; the
/// store hands back the same handle it was given, so object identity survives a
/// round trip. All operations are atomic with respect to each other. No lock is
/// held while caller code runs.
template <typename Handle>
class GlobalStore {
public:
    struct Entry {
        Handle object;
        std::string type_name;
    };

    explicit GlobalStore(std::string owner_kernel = {}) : owner_(std::move(owner_kernel)) {}

    GlobalStore(const GlobalStore&) = delete;
    GlobalStore& operator=(const GlobalStore&) = delete;

    const std::string& owner_kernel() const noexcept { return owner_; }

    std::string put(Handle object, std::string type_name) {
        std::lock_guard lock(mutex_);
        std::string key;
        do {
            key = generate_uuid();
        } while (entries_.count(key) != 0);
        entries_.emplace(key, Entry{std::move(object), std::move(type_name)});
        return key;
    }

    /// Stores under a key minted elsewhere. Throws on a key collision.
    void put_at(const std::string& key, Handle object, std::string type_name) {
        if (key.empty()) throw UnknownReference("cannot store under an empty key");
        std::lock_guard lock(mutex_);
        if (!entries_.emplace(key, Entry{std::move(object), std::move(type_name)}).second) {
            throw Error("KeyCollision", "store key already in use: " + key);
        }
    }

    Entry get(const std::string& key) const {
        std::lock_guard lock(mutex_);
        auto it = entries_.find(key);
        if (it == entries_.end()) {
            throw UnknownReference("unknown reference '" + key + "'" +
                                   (owner_.empty() ? "" : " in kernel " + owner_));
        }
        return it->second;
    }

    bool contains(const std::string& key) const {
        std::lock_guard lock(mutex_);
        return entries_.count(key) != 0;
    }

    /// Idempotent. Returns true when the key was not present (not_found).
    bool remove(const std::string& key) {
        std::lock_guard lock(mutex_);
        return entries_.erase(key) == 0;
    }

    std::size_t size() const {
        std::lock_guard lock(mutex_);
        return entries_.size();
    }

    /// key -> type name, ordered by key.
    std::map<std::string, std::string> type_snapshot() const {
        std::lock_guard lock(mutex_);
        std::map<std::string, std::string> out;
        for (const auto& [key, entry] : entries_) out.emplace(key, entry.type_name);
        return out;
    }

    void clear() {
        std::lock_guard lock(mutex_);
        entries_.clear();
    }

private:
    std::string owner_;
    mutable std::mutex mutex_;
    std::map<std::string, Entry> entries_;
};

} // namespace kffi

#include "kffi/store.hpp"

#include <gtest/gtest.h>

#include <memory>
#include <regex>
#include <thread>
#include <unordered_set>

using namespace kffi;

using Store = GlobalStore<std::shared_ptr<int>>;

TEST(Uuid, Format) {
    static const std::regex shape("^[0-9a-f]{8}-[0-9a-f]{4}-4[0-9a-f]{3}-[89ab][0-9a-f]{3}-[0-9a-f]{12}$");
    for (int i = 0; i < 100; ++i) EXPECT_TRUE(std::regex_match(generate_uuid(), shape));
}

TEST(Uuid, NoCollisionsOverHundredThousand) {
    std::unordered_set<std::string> seen;
    for (int i = 0; i < 100000; ++i) ASSERT_TRUE(seen.insert(generate_uuid()).second);
}

TEST(StoreTest, PutThenGetKeepsIdentity) {
    Store store("A");
    auto obj = std::make_shared<int>(7);
    const auto key = store.put(obj, "C1");
    const auto entry = store.get(key);
    EXPECT_EQ(entry.object.get(), obj.get());
    EXPECT_EQ(entry.type_name, "C1");
}

TEST(StoreTest, SameObjectTwiceGetsTwoKeys) {
    Store store;
    auto obj = std::make_shared<int>(1);
    EXPECT_NE(store.put(obj, "C"), store.put(obj, "C"));
    EXPECT_EQ(store.size(), 2u);
}

TEST(StoreTest, AcceptsNullObject) {
    Store store;
    const auto key = store.put(nullptr, "NoneType");
    EXPECT_FALSE(key.empty());
    EXPECT_EQ(store.get(key).object, nullptr);
}

TEST(StoreTest, GetAfterDeleteIsUnknownReference) {
    Store store;
    const auto key = store.put(std::make_shared<int>(1), "C");
    store.remove(key);
    EXPECT_THROW(store.get(key), UnknownReference);
}

TEST(StoreTest, GetEmptyKeyIsUnknownReference) {
    Store store;
    EXPECT_THROW(store.get(""), UnknownReference);
}

TEST(StoreTest, DeleteIsIdempotent) {
    Store store;
    const auto key = store.put(std::make_shared<int>(1), "C");
    EXPECT_FALSE(store.remove(key));
    EXPECT_TRUE(store.remove(key));
}

TEST(StoreTest, DeleteThenPutGivesNewKey) {
    Store store;
    const auto key = store.put(std::make_shared<int>(1), "C");
    store.remove(key);
    EXPECT_NE(store.put(std::make_shared<int>(2), "C"), key);
}

TEST(StoreTest, DeleteOneOfThree) {
    Store store;
    const auto k = store.put(std::make_shared<int>(1), "C");
    store.put(std::make_shared<int>(2), "C");
    store.put(std::make_shared<int>(3), "C");
    store.remove(k);
    EXPECT_EQ(store.size(), 2u);
}

TEST(StoreTest, PutAtRejectsCollision) {
    Store store;
    store.put_at("k", nullptr, "C");
    EXPECT_THROW(store.put_at("k", nullptr, "C"), Error);
}

TEST(StoreTest, ConcurrentPutsAndRemoves) {
    Store store;
    std::vector<std::thread> threads;
    for (int t = 0; t < 8; ++t) {
        threads.emplace_back([&store] {
            for (int i = 0; i < 2000; ++i) {
                const auto key = store.put(std::make_shared<int>(i), "C");
                if (i % 2 == 0) store.remove(key);
            }
        });
    }
    for (auto& t : threads) t.join();
    EXPECT_EQ(store.size(), 8u * 1000u);
}

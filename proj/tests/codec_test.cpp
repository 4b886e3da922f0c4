#include "kffi/cellscript/interpreter.hpp"
#include "kffi/codec.hpp"
#include "kffi/errors.hpp"
#include "support/generators.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace kffi;
namespace cs = kffi::cellscript;

namespace {

struct Kernel {
    explicit Kernel(std::string id) : store(id) {
        ctx.kernel_id = std::move(id);
        ctx.lang = "cellscript";
        ctx.store = &store;
    }
    codec::Store store;
    codec::Context ctx;
};

} // namespace

TEST(Encode, IntegerOne) {
    Kernel k("A");
    EXPECT_EQ(codec::encode(cs::Value(1), k.ctx).text, "1");
}

TEST(Encode, StringIsQuotedJson) {
    Kernel k("A");
    EXPECT_EQ(codec::encode(cs::Value("hello"), k.ctx).text, "\"hello\"");
}

TEST(Encode, InstanceBecomesReference) {
    Kernel k("A");
    fixture::Gen gen(1);
    const auto obj = gen.instance();
    const auto enc = codec::encode(obj, k.ctx);
    EXPECT_EQ(enc.cls, ValueClass::reference);
    const auto ref = ref_from_json(json::parse(enc.text));
    EXPECT_EQ(ref.lang, "cellscript");
    EXPECT_EQ(ref.type_name, obj.as<cs::InstancePtr>()->cls->name);
    EXPECT_EQ(ref.owner_kernel, "A");
    EXPECT_EQ(k.store.size(), 1u);
}

TEST(Encode, ListWithObjectHoldsRefInSlotTwo) {
    Kernel k("A");
    fixture::Gen gen(2);
    const auto enc = codec::encode(cs::Value(cs::List{cs::Value(1), gen.instance()}), k.ctx);
    const auto j = json::parse(enc.text);
    EXPECT_EQ(j[0], 1);
    EXPECT_TRUE(is_ref_map(j[1]));
}

TEST(Encode, ProxyKeepsItsReference) {
    Kernel k("A");
    const auto ref = make_ref("k1", "cellscript", "C", "B");
    const cs::Value proxy(std::make_shared<const cs::Proxy>(cs::Proxy{ref}));
    EXPECT_EQ(codec::encode(proxy, k.ctx).text, ref.to_text());
    EXPECT_EQ(k.store.size(), 0u);
}

TEST(Encode, FunctionValueIsUnencodable) {
    cs::Interpreter interp;
    interp.run("fn f() { return 1 }");
    Kernel k("A");
    EXPECT_THROW(codec::encode(*interp.global("f"), k.ctx), MarshallingError);
}

TEST(Encode, NonFiniteFloatRejected) {
    Kernel k("A");
    EXPECT_THROW(codec::encode(cs::Value(std::nan("")), k.ctx), MarshallingError);
}

TEST(Encode, DepthLimit) {
    Kernel k("A");
    cs::Value v(1);
    for (int i = 0; i < 70; ++i) v = cs::Value(cs::List{v});
    EXPECT_THROW(codec::encode(v, k.ctx), MarshallingError);
}

TEST(Decode, ForeignRefBecomesProxy) {
    Kernel k("A");
    const auto ref = make_ref("k1", "python", "C1", "P");
    const auto v = codec::decode(ref.to_text(), k.ctx);
    ASSERT_TRUE(v.is<cs::ProxyPtr>());
    EXPECT_EQ(v.as<cs::ProxyPtr>()->ref, ref);
}

TEST(Decode, SelfRefResolvesToSameObject) {
    Kernel k("A");
    fixture::Gen gen(3);
    const auto obj = gen.instance();
    const auto back = codec::decode(codec::encode(obj, k.ctx).text, k.ctx);
    ASSERT_TRUE(back.is<cs::InstancePtr>());
    EXPECT_EQ(back.as<cs::InstancePtr>().get(), obj.as<cs::InstancePtr>().get());
}

TEST(Decode, SelfRefWithMissingKeyIsUnknownReference) {
    Kernel k("A");
    EXPECT_THROW(codec::decode(make_ref("gone", "cellscript", "C", "A").to_text(), k.ctx), UnknownReference);
}

TEST(Decode, InvalidJson) {
    Kernel k("A");
    EXPECT_THROW(codec::decode("[1,", k.ctx), ParseError);
}

TEST(Decode, IntegerOverflowRejected) {
    Kernel k("A");
    EXPECT_THROW(codec::decode("18446744073709551615", k.ctx), MarshallingError);
}

TEST(DecodeArgs, Examples) {
    Kernel k("A");
    const auto two = codec::decode_args("[1, 2]", k.ctx);
    ASSERT_EQ(two.size(), 2u);
    EXPECT_EQ(two[0].as<std::int64_t>(), 1);
    EXPECT_EQ(two[1].as<std::int64_t>(), 2);
    EXPECT_TRUE(codec::decode_args("[]", k.ctx).empty());
    const auto data = codec::decode_args(R"(["data"])", k.ctx);
    ASSERT_EQ(data.size(), 1u);
    EXPECT_EQ(data[0].as<std::string>(), "data");
}

TEST(DecodeArgs, NonArrayIsMalformed) {
    Kernel k("A");
    EXPECT_THROW(codec::decode_args("{}", k.ctx), MalformedArgs);
}

TEST(CodecRoundTrip, RandomDataPreservesValueAndType) {
    Kernel k("A");
    fixture::Gen gen(11);
    for (int i = 0; i < 10000; ++i) {
        const auto v = gen.data();
        const auto back = codec::decode(codec::encode(v, k.ctx).text, k.ctx);
        ASSERT_TRUE(cs::equals(v, back)) << cs::repr(v) << " vs " << cs::repr(back);
        ASSERT_EQ(cs::type_name(v), cs::type_name(back));
    }
}

TEST(CodecRoundTrip, ObjectsLocalizeAndProxy) {
    Kernel a("A");
    Kernel b("B");
    fixture::Gen gen(12);
    for (int i = 0; i < 500; ++i) {
        const auto v = gen.with_objects();
        const auto text = codec::encode(v, a.ctx).text;
        EXPECT_TRUE(cs::equals(codec::decode(text, a.ctx), v));
        const auto remote = codec::decode(text, b.ctx);
        EXPECT_EQ(codec::encode(remote, b.ctx).text, text);
    }
    EXPECT_EQ(b.store.size(), 0u);
}

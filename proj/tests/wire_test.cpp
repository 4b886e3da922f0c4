#include "kffi/errors.hpp"
#include "kffi/wire.hpp"
#include "support/generators.hpp"

#include <gtest/gtest.h>

using namespace kffi;

namespace {

std::string canonical(const std::string& text) { return json::parse(text).dump(); }

} // namespace

TEST(IrToJson, FunctionCalculate) {
    const auto ir = Ir::function("calculate", "[1, 2]");
    EXPECT_EQ(ir_to_json(ir), canonical(R"({"type": "function", "name": "calculate", "args": "[1, 2]"})"));
    EXPECT_EQ(ir_to_json(ir), R"({"type":"function","name":"calculate","args":"[1, 2]"})");
}

TEST(IrToJson, VariableResult) {
    EXPECT_EQ(ir_to_json(Ir::variable("result")), R"({"type":"variable","name":"result"})");
}

TEST(IrToJson, MethodProcess) {
    EXPECT_EQ(ir_to_json(Ir::method_call("obj", "process", R"(["data"])")),
              R"({"type":"method","obj":"obj","method":"process","args":"[\"data\"]"})");
}

TEST(IrToJson, InstantiateMyClass) {
    EXPECT_EQ(ir_to_json(Ir::instantiate("MyClass", "[1, 2]")),
              canonical(R"({"type": "instantiate", "class": "MyClass", "args": "[1, 2]"})"));
}

TEST(IrToJson, DeleteObj) {
    EXPECT_EQ(ir_to_json(Ir::remove("obj")), R"({"type":"delete","name":"obj"})");
}

TEST(IrToJson, RejectsMissingArgs) {
    Ir ir = Ir::function("f", "[]");
    ir.args.reset();
    try {
        ir_to_json(ir);
        FAIL() << "expected MalformedIr";
    } catch (const MalformedIr& e) {
        EXPECT_NE(std::string(e.what()).find("args"), std::string::npos);
    }
}

TEST(IrToJson, RejectsExtraField) {
    Ir ir = Ir::variable("x");
    ir.args = "[]";
    EXPECT_THROW(ir_to_json(ir), MalformedIr);
}

TEST(IrToJson, RejectsNonArrayArgs) {
    EXPECT_THROW(ir_to_json(Ir::function("f", "{}")), MalformedIr);
    EXPECT_THROW(ir_to_json(Ir::function("f", "[1,")), MalformedIr);
}

TEST(IrToJson, Deterministic) {
    const auto ir = Ir::method_call("k", "m", "[1]");
    EXPECT_EQ(ir_to_json(ir), ir_to_json(ir));
}

TEST(IrFromJson, InstantiateUsesClassAsName) {
    const auto ir = ir_from_json(R"({"type":"instantiate","class":"MyClass","args":"[1, 2]"})");
    EXPECT_EQ(ir.kind, IrKind::instantiate);
    EXPECT_EQ(ir.name, "MyClass");
    EXPECT_EQ(ir.args, "[1, 2]");
}

TEST(IrFromJson, DeleteAcceptsObjAlias) {
    const auto ir = ir_from_json(R"({"type":"delete","obj":"k"})");
    EXPECT_EQ(ir.kind, IrKind::del);
    EXPECT_EQ(ir.name, "k");
    EXPECT_EQ(ir_to_json(ir), R"({"type":"delete","name":"k"})");
}

TEST(IrFromJson, UnknownKind) { EXPECT_THROW(ir_from_json(R"({"type":"teleport"})"), UnsupportedIrKind); }

TEST(IrFromJson, NotJson) { EXPECT_THROW(ir_from_json("{type"), ParseError); }

TEST(IrFromJson, RejectsMissingFields) {
    EXPECT_THROW(ir_from_json(R"({"type":"method","obj":"o","args":"[]"})"), MalformedIr);
    EXPECT_THROW(ir_from_json(R"({"type":"function","name":"f"})"), MalformedIr);
    EXPECT_THROW(ir_from_json(R"({"name":"f"})"), MalformedIr);
}

TEST(IrFromJson, RejectsDeleteWithBothNames) {
    EXPECT_THROW(ir_from_json(R"({"type":"delete","name":"a","obj":"b"})"), MalformedIr);
}

TEST(IrRoundTrip, Randomized) {
    fixture::Gen gen(7);
    for (int i = 0; i < 2000; ++i) {
        const auto ir = gen.ir();
        const auto text = ir_to_json(ir);
        EXPECT_EQ(ir_from_json(text), ir) << text;
        EXPECT_EQ(ir_to_json(ir_from_json(text)), text);
    }
}

TEST(ObjectRefTest, MakeRefCarriesFields) {
    const auto ref = make_ref("ab12", "python", "C1", "H");
    const auto j = ref.to_json();
    EXPECT_EQ(j["varname"], "ab12");
    EXPECT_EQ(j["lang"], "python");
    EXPECT_EQ(j["typeName"], "C1");
    EXPECT_TRUE(is_ref_map(j));
    EXPECT_EQ(ref_from_json(j), ref);
}

TEST(ObjectRefTest, EmptyTypeNameIsValid) {
    const auto ref = make_ref("k", "cellscript", "", "A");
    EXPECT_EQ(ref_from_json(ref.to_json()).type_name, "");
}

TEST(ObjectRefTest, EmptyKeyRejected) { EXPECT_THROW(make_ref("", "cellscript", "C", "A"), std::invalid_argument); }

TEST(ObjectRefTest, WireFormKeyOrder) {
    EXPECT_EQ(make_ref("k", "cellscript", "C", "A").to_text(),
              R"({"varname":"k","lang":"cellscript","typeName":"C","__kffi_ref__":"A"})");
}

TEST(EncodedValueTest, ClassifiesByMarkerOnly) {
    EXPECT_EQ(EncodedValue::classify(R"({"varname":"k","lang":"x","typeName":"C"})").cls, ValueClass::primitive_json);
    EXPECT_EQ(EncodedValue::classify(R"({"__kffi_ref__":"A","varname":"k","lang":"x","typeName":"C","extra":1})").cls,
              ValueClass::reference);
    EXPECT_EQ(EncodedValue::classify("1").cls, ValueClass::primitive_json);
    EXPECT_THROW(EncodedValue::classify("nope"), ParseError);
}

TEST(KernelDescriptorTest, RoundTrip) {
    KernelDescriptor d;
    d.kernel_id = "P";
    d.lang = "python";
    d.exec_split = true;
    d.side_channel_endpoint = "http://127.0.0.1:9";
    const auto back = KernelDescriptor::from_json(d.to_json());
    EXPECT_EQ(back.kernel_id, "P");
    EXPECT_EQ(back.lang, "python");
    EXPECT_TRUE(back.exec_split);
    EXPECT_EQ(back.side_channel_endpoint, d.side_channel_endpoint);
}

TEST(KernelDescriptorTest, EvalIncapableWithSideChannelRejected) {
    json j = {{"kernel_id", "X"}, {"lang", "cpp"}, {"eval_capable", false}, {"side_channel_endpoint", "http://h"}};
    EXPECT_THROW(KernelDescriptor::from_json(j), MalformedArgs);
}

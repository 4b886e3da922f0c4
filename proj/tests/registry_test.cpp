#include "kffi/errors.hpp"
#include "kffi/registry.hpp"

#include <gtest/gtest.h>

#include <algorithm>

using namespace kffi;

namespace {

const SymbolRecord& find(const CellDeclaration& cell, const std::string& name) {
    auto it = std::find_if(cell.declarations.begin(), cell.declarations.end(),
                           [&](const SymbolRecord& r) { return r.name == name; });
    if (it == cell.declarations.end()) throw std::runtime_error("no record " + name);
    return *it;
}

bool has(const CellDeclaration& cell, const std::string& name) {
    return std::any_of(cell.declarations.begin(), cell.declarations.end(),
                       [&](const SymbolRecord& r) { return r.name == name; });
}

std::vector<std::string> names(const std::vector<std::string>& v) { return v; }

} // namespace

TEST(ExtractCellscript, FunctionWithParams) {
    const auto cell = extract_declarations("fn f1(a,b){return a+b;}", "cellscript", "c1", "H");
    ASSERT_EQ(cell.declarations.size(), 1u);
    const auto& f = cell.declarations[0];
    EXPECT_EQ(f.name, "f1");
    EXPECT_EQ(f.kind, SymbolKind::function);
    EXPECT_EQ(f.params, (std::vector<std::string>{"a", "b"}));
    EXPECT_EQ(f.kernel_id, "H");
    EXPECT_EQ(f.cell_id, "c1");
}

TEST(ExtractCellscript, ClassMethodsAndVariables) {
    const auto cell = extract_declarations(R"(
class C1 {
  fn init(self, v) { self.v = v }
  fn m1(self) { return 7 }
}
x1 = 1
x2 = 35
x3 = new C1(3)
)",
                                           "cellscript", "c", "H");
    const auto& c1 = find(cell, "C1");
    EXPECT_EQ(c1.kind, SymbolKind::class_type);
    EXPECT_EQ(c1.params, (std::vector<std::string>{"v"}));
    ASSERT_EQ(c1.methods.size(), 2u);
    EXPECT_EQ(c1.methods[1].name, "m1");
    EXPECT_TRUE(c1.methods[1].params.empty());
    for (const char* v : {"x1", "x2", "x3"}) EXPECT_EQ(find(cell, v).kind, SymbolKind::variable);
}

TEST(ExtractCellscript, LocalsAreNotTopLevel) {
    const auto cell = extract_declarations("fn g() { x = f() return x }", "cellscript", "c", "H");
    EXPECT_TRUE(has(cell, "g"));
    EXPECT_FALSE(has(cell, "x"));
}

TEST(ExtractCellscript, SyntaxErrorIsAllOrNothing) {
    try {
        extract_declarations("fn ok() { return 1 }\nfn bad( {", "cellscript", "c", "H");
        FAIL();
    } catch (const SyntaxError& e) {
        EXPECT_EQ(e.line(), 2);
    }
}

TEST(ExtractPython, SimpleLoopHost) {
    const auto cell = extract_declarations(R"(
def f1(a, b):
    return a + b

def f2(*xs):
    return sum(xs)

class C1:
    def __init__(self, v):
        self.v = v

    def m1(self):
        return 7

x1 = 1
x2 = 35
x3 = C1(2)
)",
                                           "python", "c", "P");
    EXPECT_EQ(find(cell, "f1").params, (std::vector<std::string>{"a", "b"}));
    EXPECT_TRUE(find(cell, "f2").variadic);
    const auto& c1 = find(cell, "C1");
    EXPECT_EQ(c1.kind, SymbolKind::class_type);
    EXPECT_EQ(c1.params, (std::vector<std::string>{"v"}));
    ASSERT_EQ(c1.methods.size(), 2u);
    EXPECT_EQ(c1.methods[1].name, "m1");
    for (const char* v : {"x1", "x2", "x3"}) EXPECT_EQ(find(cell, v).kind, SymbolKind::variable);
}

TEST(ExtractPython, UnknownTopLevelConstructsWarn) {
    const auto cell = extract_declarations("import os\nfor i in range(3):\n    pass\ny = 2\n", "python", "c", "P");
    EXPECT_TRUE(has(cell, "y"));
    EXPECT_FALSE(cell.warnings.empty());
}

TEST(ExtractPython, BaseClassRecorded) {
    const auto cell = extract_declarations("class D(Base):\n    def m(self, a):\n        pass\n", "python", "c", "P");
    EXPECT_EQ(find(cell, "D").base, "Base");
}

TEST(ExtractPython, SyntaxError) {
    EXPECT_THROW(extract_declarations("def f(:\n    x = 'open\n", "python", "c", "P"), SyntaxError);
}

TEST(Extract, UnsupportedLanguage) {
    EXPECT_THROW(extract_declarations("x", "cobol", "c", "K"), UnsupportedLanguage);
}

TEST(RegistryTest, RedefineBumpsVersion) {
    Registry reg;
    reg.apply(extract_declarations("fn f(a) { return 1 }", "cellscript", "c1", "H"));
    const auto diff = reg.apply(extract_declarations("fn f(a, b) { return 2 }", "cellscript", "c2", "H"));
    EXPECT_EQ(names(diff.updated), (std::vector<std::string>{"H:f"}));
    const auto rec = reg.resolve("f", "C");
    EXPECT_EQ(rec.version, 2);
    EXPECT_EQ(rec.params.size(), 2u);
}

TEST(RegistryTest, ReRegisteringSameCellReplacesItsDeclarations) {
    Registry reg;
    reg.apply(extract_declarations("fn f() { return 1 }\nfn g() { return 1 }", "cellscript", "c1", "H"));
    const auto diff = reg.apply(extract_declarations("fn f() { return 2 }", "cellscript", "c1", "H"));
    EXPECT_EQ(diff.removed, (std::vector<std::string>{"H:g"}));
    EXPECT_THROW(reg.resolve("g", "C"), NotFound);
}

TEST(RegistryTest, RemoveCellMakesSymbolsUnresolvable) {
    Registry reg;
    reg.apply(extract_declarations("fn f() { return 1 }", "cellscript", "c1", "H"));
    const auto diff = reg.remove_cell("c1");
    EXPECT_EQ(diff.removed, (std::vector<std::string>{"H:f"}));
    EXPECT_THROW(reg.resolve("f", "C"), NotFound);
}

TEST(RegistryTest, RemovingShadowingCellUncoversOlderDefinition) {
    Registry reg;
    reg.apply(extract_declarations("fn f() { return 1 }", "cellscript", "c1", "H"));
    reg.apply(extract_declarations("fn f(a) { return 2 }", "cellscript", "c2", "H"));
    reg.remove_cell("c2");
    EXPECT_EQ(reg.resolve("f", "C").cell_id, "c1");
}

TEST(RegistryTest, TwoKernelsBothLive) {
    Registry reg;
    reg.apply(extract_declarations("fn g() { return 1 }", "cellscript", "c1", "H1"));
    reg.apply(extract_declarations("fn g() { return 2 }", "cellscript", "c2", "H2"));
    const auto snap = reg.snapshot();
    EXPECT_TRUE(snap->lookup("H1", "g"));
    EXPECT_TRUE(snap->lookup("H2", "g"));
}

TEST(Resolve, ForeignSymbol) {
    Registry reg;
    reg.apply(extract_declarations("fn f1(a, b) { return a + b }", "cellscript", "c1", "hostK"));
    EXPECT_EQ(reg.resolve("f1", "clientK").kernel_id, "hostK");
}

TEST(Resolve, SelfSymbolIsNotForeign) {
    Registry reg;
    reg.apply(extract_declarations("fn f1(a, b) { return a + b }", "cellscript", "c1", "hostK"));
    EXPECT_THROW(reg.resolve("f1", "hostK"), NotFound);
    EXPECT_THROW(reg.resolve("hostK:f1", "hostK"), NotFound);
}

TEST(Resolve, AmbiguousListsBothCandidates) {
    Registry reg;
    reg.apply(extract_declarations("fn g() { return 1 }", "cellscript", "c1", "H1"));
    reg.apply(extract_declarations("fn g() { return 2 }", "cellscript", "c2", "H2"));
    try {
        reg.resolve("g", "C");
        FAIL();
    } catch (const AmbiguousSymbol& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("H1:g"), std::string::npos);
        EXPECT_NE(msg.find("H2:g"), std::string::npos);
    }
}

TEST(Resolve, QualificationWins) {
    Registry reg;
    reg.apply(extract_declarations("fn g() { return 1 }", "cellscript", "c1", "H1"));
    reg.apply(extract_declarations("fn g() { return 2 }", "cellscript", "c2", "H2"));
    EXPECT_EQ(reg.resolve("H1:g", "C").kernel_id, "H1");
    EXPECT_EQ(reg.resolve("g", "H1").kernel_id, "H2");
}

TEST(Resolve, NeverReturnsClientKernel) {
    Registry reg;
    for (int i = 0; i < 20; ++i) {
        const std::string k = "K" + std::to_string(i % 3);
        reg.apply(extract_declarations("fn h() { return 1 }", "cellscript", "c" + std::to_string(i), k));
    }
    for (const char* client : {"K0", "K1", "K2"}) {
        try {
            EXPECT_NE(reg.resolve("h", client).kernel_id, client);
        } catch (const AmbiguousSymbol&) {
        }
    }
}

TEST(RegistryTest, MatchesRebuildFromSurvivors) {
    Registry live;
    const std::vector<std::pair<std::string, std::string>> cells = {
        {"c1", "fn a() { return 1 }\nv = 1"}, {"c2", "fn a(x) { return 2 }"}, {"c3", "fn b() { return 3 }"},
        {"c4", "v = 4\nclass K { fn m(self) { return 1 } }"}};
    for (const auto& [id, src] : cells) live.apply(extract_declarations(src, "cellscript", id, "H"));
    live.remove_cell("c2");
    live.remove_cell("c4");

    Registry fresh;
    fresh.apply(extract_declarations(cells[0].second, "cellscript", "c1", "H"));
    fresh.apply(extract_declarations(cells[2].second, "cellscript", "c3", "H"));

    const auto a = live.snapshot()->records();
    const auto b = fresh.snapshot()->records();
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].name, b[i].name);
        EXPECT_EQ(a[i].cell_id, b[i].cell_id);
        EXPECT_EQ(a[i].params, b[i].params);
    }
}

TEST(SymbolRecordJson, Shape) {
    Registry reg;
    reg.apply(extract_declarations("class C { fn m(self, a) { return a } }", "cellscript", "c1", "H"));
    const auto j = reg.resolve("C", "X").to_json();
    EXPECT_EQ(j["kind"], "class");
    EXPECT_EQ(j["kernel_id"], "H");
    EXPECT_EQ(j["methods"][0]["name"], "m");
    EXPECT_EQ(j["methods"][0]["params"][0], "a");
}

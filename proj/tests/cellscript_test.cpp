#include "kffi/cellscript/interpreter.hpp"
#include "kffi/errors.hpp"

#include <gtest/gtest.h>

using namespace kffi;
using namespace kffi::cellscript;

namespace {

std::string run(Interpreter& interp, const std::string& src) { return repr(interp.run(src)); }

std::string error_name(const std::string& src) {
    Interpreter interp;
    try {
        interp.run(src);
    } catch (const Error& e) {
        return e.ename();
    }
    return "none";
}

} // namespace

TEST(CsRun, AddFunction) {
    Interpreter interp;
    EXPECT_EQ(run(interp, "fn add(a,b){return a+b;} add(2,3)"), "5");
}

TEST(CsRun, AssignThenRead) {
    Interpreter interp;
    EXPECT_EQ(run(interp, "x = 1; x"), "1");
}

TEST(CsRun, NewUndefinedClassIsNameError) { EXPECT_EQ(error_name("new C()"), "NameError"); }

TEST(CsRun, DefinitionsPersistAcrossCells) {
    Interpreter interp;
    interp.run("fn sq(n) { return n * n }");
    interp.run("y = sq(4)");
    EXPECT_EQ(run(interp, "y + 1"), "17");
}

TEST(CsRun, LastStatementNotExpressionGivesNull) {
    Interpreter interp;
    EXPECT_TRUE(interp.run("z = 3").is_null());
}

TEST(CsRun, ClassesAndMethods) {
    Interpreter interp;
    interp.run(R"(
class Counter {
  fn init(self, start) { self.n = start }
  fn bump(self, by) { self.n = self.n + by  return self.n }
}
c = new Counter(10)
c.bump(2)
)");
    EXPECT_EQ(run(interp, "c.bump(3)"), "15");
    EXPECT_EQ(run(interp, "Counter(1).bump(1)"), "2");
    EXPECT_EQ(run(interp, "type(c)"), "\"Counter\"");
}

TEST(CsRun, ControlFlow) {
    Interpreter interp;
    EXPECT_EQ(run(interp, R"(
fn fib(n) { if n < 2 { return n } else { return fib(n - 1) + fib(n - 2) } }
i = 0
acc = []
while i < 8 { push(acc, fib(i)) i = i + 1 }
acc
)"),
              "[0, 1, 1, 2, 3, 5, 8, 13]");
}

TEST(CsRun, CollectionsAndStrings) {
    Interpreter interp;
    EXPECT_EQ(run(interp, R"(m = {"b": 2, "a": [1, "x"]}
m["c"] = true
[len(m), keys(m), m["a"][1] + "y", str(1.5)])"),
              R"([3, ["a", "b", "c"], "xy", "1.5"])");
}

TEST(CsRun, LogicalAndComparison) {
    Interpreter interp;
    EXPECT_EQ(run(interp, "[1 == 1, 1 < 2 and 2 > 3, not false, 7 / 2, 7.0 / 2, -3 % 2 == -1]"),
              "[true, false, true, 3, 3.5, true]");
}

TEST(CsRun, Errors) {
    EXPECT_EQ(error_name("undefined_thing"), "NameError");
    EXPECT_EQ(error_name("1 / 0"), "ZeroDivisionError");
    EXPECT_EQ(error_name("[1][3]"), "IndexError");
    EXPECT_EQ(error_name("1 + \"a\""), "TypeError");
    EXPECT_EQ(error_name("fn f( { }"), "SyntaxError");
    EXPECT_EQ(error_name("fn r(n) { return r(n + 1) } r(0)"), "RecursionError");
}

TEST(CsRun, RuntimeErrorsCarryLine) {
    Interpreter interp;
    try {
        interp.run("x = 1\ny = x + missing");
        FAIL();
    } catch (const ScriptError& e) {
        EXPECT_EQ(e.ename(), "NameError");
        EXPECT_EQ(e.line(), 2);
    }
}

TEST(CsRun, PrintGoesToHook) {
    std::vector<std::string> lines;
    InterpreterHooks hooks;
    hooks.output = [&](const std::string& l) { lines.push_back(l); };
    Interpreter interp(hooks);
    interp.run(R"(print("a", 1, [2, "b"]))");
    ASSERT_EQ(lines.size(), 1u);
    EXPECT_EQ(lines[0], R"(a 1 [2, "b"])");
}

TEST(CsRun, ProxyIsOpaqueToArithmetic) {
    Interpreter interp;
    interp.set_global("p", Value(std::make_shared<const Proxy>(Proxy{make_ref("k", "cellscript", "C", "B")})));
    EXPECT_THROW(interp.run("p + 1"), ScriptError);
}

TEST(CsRun, ProxyMethodGoesThroughHook) {
    InterpreterHooks hooks;
    std::string seen;
    hooks.proxy_method = [&](const ProxyPtr& p, const std::string& m, std::vector<Value> args) {
        seen = p->ref.varname + "." + m + "/" + std::to_string(args.size());
        return Value(7);
    };
    Interpreter interp(hooks);
    interp.set_global("p", Value(std::make_shared<const Proxy>(Proxy{make_ref("k", "cellscript", "C", "B")})));
    EXPECT_EQ(run(interp, "p.m1(1, 2)"), "7");
    EXPECT_EQ(seen, "k.m1/2");
}

TEST(CsRun, RebindHookSeesPreviousProxy) {
    InterpreterHooks hooks;
    int rebinds = 0;
    hooks.rebind = [&](const std::string& name, const Value& prev) {
        EXPECT_EQ(name, "p");
        EXPECT_TRUE(prev.is<ProxyPtr>());
        ++rebinds;
    };
    Interpreter interp(hooks);
    interp.set_global("p", Value(std::make_shared<const Proxy>(Proxy{make_ref("k", "cellscript", "C", "B")})));
    interp.run("p = 1");
    interp.run("p = 2");
    EXPECT_EQ(rebinds, 1);
}

TEST(CsRun, ReleaseStatementCallsHook) {
    InterpreterHooks hooks;
    int releases = 0;
    hooks.release = [&](const Value&) { ++releases; };
    Interpreter interp(hooks);
    interp.run("x = 1\nrelease x");
    EXPECT_EQ(releases, 1);
}

TEST(CsRun, SpreadArguments) {
    Interpreter interp;
    EXPECT_EQ(run(interp, "fn add3(a, b, c) { return a + b + c } add3(*[1, 2, 3])"), "6");
}

TEST(CsRun, StringEscapes) {
    Interpreter interp;
    EXPECT_EQ(run(interp, R"("a\"b\né")"), R"("a\"b\né")");
}

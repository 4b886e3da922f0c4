#include "kffi/broker.hpp"
#include "kffi/errors.hpp"
#include "kffi/kernel.hpp"
#include "kffi/transport.hpp"

#include <gtest/gtest.h>
#include <httplib.h>

#include <future>
#include <thread>

using namespace kffi;
using namespace std::chrono_literals;

TEST(EvalRequestJson, RoundTrip) {
    EvalRequest r{"1+1", "corr", 2, "A", 500};
    const auto back = EvalRequest::from_json(r.to_json());
    EXPECT_EQ(back.code, "1+1");
    EXPECT_EQ(back.correlation_id, "corr");
    EXPECT_EQ(back.depth, 2);
    EXPECT_EQ(back.origin_kernel, "A");
    EXPECT_EQ(back.timeout_ms, 500);
}

TEST(EvalRequestJson, Malformed) {
    EXPECT_THROW(EvalRequest::from_json(json::parse(R"({"depth":1})")), MalformedIr);
    EXPECT_THROW(EvalRequest::from_json(json::parse(R"({"code":"1","depth":-1})")), MalformedIr);
    EXPECT_THROW(EvalRequest::from_json(json::parse("[]")), MalformedIr);
}

TEST(EvalResponseJson, OkAndErrorShapes) {
    EXPECT_EQ(EvalResponse::success("2").to_json().dump(), R"({"status":"ok","result":"2"})");
    const auto err = EvalResponse::failure("NameError", "x", "  kernel A, line 1, column 1", "A");
    EXPECT_EQ(err.to_json().dump(),
              R"({"status":"error","ename":"NameError","evalue":"x","trace":"  kernel A, line 1, column 1","origin_kernel":"A"})");
    const auto back = EvalResponse::from_json(err.to_json());
    EXPECT_FALSE(back.ok);
    EXPECT_EQ(back.ename, "NameError");
    EXPECT_THROW(EvalResponse::from_json(json::parse(R"({"status":"maybe"})")), MalformedIr);
}

TEST(ScopedCallTest, NestsAndRestores) {
    EXPECT_EQ(current_call(), nullptr);
    {
        ScopedCall outer(CallContext{"c", 0, "A", std::nullopt});
        {
            ScopedCall inner(CallContext{"c", 1, "B", std::nullopt});
            EXPECT_EQ(current_call()->kernel, "B");
        }
        EXPECT_EQ(current_call()->kernel, "A");
    }
    EXPECT_EQ(current_call(), nullptr);
}

TEST(BlockingWireTest, SequentialInOrder) {
    BlockingWire wire;
    std::vector<int> order;
    std::mutex m;
    std::vector<BlockingWire::Ticket> tickets;
    for (int i = 0; i < 20; ++i) {
        tickets.push_back(wire.submit([&, i] {
            std::this_thread::sleep_for(1ms);
            std::lock_guard lock(m);
            order.push_back(i);
            return EvalResponse::success(std::to_string(i));
        }));
    }
    for (int i = 0; i < 20; ++i) EXPECT_EQ(tickets[i].result.get().result, std::to_string(i));
    for (int i = 0; i < 20; ++i) EXPECT_EQ(order[i], i);
}

TEST(BlockingWireTest, OneAtATime) {
    BlockingWire wire;
    std::atomic<int> running{0};
    std::atomic<int> peak{0};
    std::vector<std::future<EvalResponse>> results;
    for (int i = 0; i < 5; ++i) {
        results.push_back(std::async(std::launch::async, [&] {
            return wire.execute(
                [&] {
                    peak = std::max(peak.load(), ++running);
                    std::this_thread::sleep_for(5ms);
                    --running;
                    return EvalResponse::success("null");
                },
                std::nullopt, "c");
        }));
    }
    for (auto& r : results) EXPECT_TRUE(r.get().ok);
    EXPECT_EQ(peak.load(), 1);
}

TEST(BlockingWireTest, NestedSubmitTimesOut) {
    BlockingWire wire;
    const auto outer = wire.execute(
        [&] {
            try {
                wire.execute([] { return EvalResponse::success("1"); }, Clock::now() + 200ms, "corr-1");
                return EvalResponse::success("wrong");
            } catch (const TimeoutError& e) {
                return EvalResponse::failure(e.ename(), e.what(), "", "");
            }
        },
        std::nullopt, "corr-1");
    EXPECT_FALSE(outer.ok);
    EXPECT_EQ(outer.ename, "TimeoutError");
    EXPECT_NE(outer.evalue.find("corr-1"), std::string::npos);
}

namespace {

class SideChannel : public ::testing::Test {
protected:
    void SetUp() override {
        KernelOptions opts;
        opts.kernel_id = "A";
        opts.output = [](const std::string&) {};
        kernel = std::make_unique<CellscriptKernel>(opts, broker);
        kernel->start();
        broker.register_kernel(kernel->descriptor(), kernel.get());
        client = std::make_unique<httplib::Client>(*kernel->descriptor().side_channel_endpoint);
    }

    json post(const std::string& path, const std::string& code) {
        EvalRequest req;
        req.code = code;
        req.correlation_id = "t";
        auto res = client->Post(path, req.to_json().dump(), "application/json");
        if (!res) throw std::runtime_error("no response");
        return json::parse(res->body);
    }

    Broker broker;
    std::unique_ptr<CellscriptKernel> kernel;
    std::unique_ptr<httplib::Client> client;
};

} // namespace

TEST_F(SideChannel, EvalOnePlusOne) {
    EXPECT_EQ(post("/eval", "1+1").dump(), R"({"status":"ok","result":"2"})");
}

TEST_F(SideChannel, InvalidSyntaxIsErrorStatus) {
    const auto body = post("/eval", "1 +");
    EXPECT_EQ(body["status"], "error");
    EXPECT_EQ(body["ename"], "SyntaxError");
    EXPECT_EQ(body["origin_kernel"], "A");
}

TEST_F(SideChannel, MalformedBodyIs400) {
    auto res = client->Post("/eval", "{not json", "application/json");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 400);
    EXPECT_EQ(json::parse(res->body)["status"], "error");
}

TEST_F(SideChannel, ExecReturnsNull) {
    EXPECT_EQ(post("/exec", "x = 5")["result"], "null");
    EXPECT_EQ(post("/eval", "x")["result"], "5");
}

TEST_F(SideChannel, Health) {
    auto res = client->Get("/health");
    ASSERT_TRUE(res);
    const auto body = json::parse(res->body);
    EXPECT_EQ(body["kernel_id"], "A");
    EXPECT_EQ(body["lang"], "cellscript");
}

TEST_F(SideChannel, ConcurrentEvalsBothComplete) {
    auto slow = std::async(std::launch::async, [&] {
        httplib::Client c(*kernel->descriptor().side_channel_endpoint);
        EvalRequest req{"sleep(300)\n1", "s", 0, "", std::nullopt};
        return json::parse(c.Post("/eval", req.to_json().dump(), "application/json")->body);
    });
    std::this_thread::sleep_for(50ms);
    const auto start = Clock::now();
    const auto fast = post("/eval", "2");
    EXPECT_LT(Clock::now() - start, 250ms);
    EXPECT_EQ(fast["result"], "2");
    EXPECT_EQ(slow.get()["result"], "1");
}

TEST_F(SideChannel, HealthAnswersDuringLongHostCall) {
    auto busy = std::async(std::launch::async, [&] { return kernel->run_cell("sleep(1000)\n3", "busy"); });
    std::this_thread::sleep_for(100ms);
    const auto start = Clock::now();
    auto res = client->Get("/health");
    const auto elapsed = Clock::now() - start;
    ASSERT_TRUE(res);
    EXPECT_LT(elapsed, 100ms);
    EXPECT_EQ(busy.get().result, "3");
}

TEST_F(SideChannel, RequestTimeoutBudgetIsHonoured) {
    EvalRequest req{"kffi_call(\"A\", \"nothing\")", "t", 0, "", 40};
    const auto resp = kernel->handle(req, Endpoint::eval);
    EXPECT_FALSE(resp.ok);
    EXPECT_EQ(resp.ename, "TimeoutError");
}

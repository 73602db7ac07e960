#include <doctest.h>

#include <atomic>
#include <sstream>
#include <thread>

#include "crysflow/error.hpp"
#include "crysflow/mcp.hpp"
#include "fixtures.hpp"

// Last: resolv.h (via httplib) defines _res, which Eigen uses as a name.
#include <httplib.h>

using namespace crysflow;
using namespace std::chrono_literals;

namespace {

json rpc(const mcp::Server& s, const json& req) { return json::parse(s.handle_frame(req.dump())); }

json call_req(int id, const std::string& name, json args) {
    return {{"jsonrpc", "2.0"}, {"id", id}, {"method", "tools/call"}, {"params", {{"name", name}, {"arguments", args}}}};
}

json payload_of(const json& result) {
    for (const auto& c : result["content"])
        if (c["type"] == "json") return c["json"];
    return nullptr;
}

}  // namespace

TEST_SUITE("mcp") {
    TEST_CASE("registry") {
        mcp::Registry r;
        mcp::register_builtin_tools(r);
        CHECK(r.size() == mcp::builtin_tool_count());
        CHECK(r.size() == 13);
        CHECK(r.find("energy_above_hull") != nullptr);
        CHECK_THROWS_AS(r.register_tool({"energy_above_hull", "dup", json::object()}, nullptr), Error);
        CHECK_THROWS_AS(r.register_tool({"weird", "x", {{"type", "object"}, {"oneOf", json::array()}}},
                                        [](const json&, mcp::ToolContext&) { return json(); }),
                        Error);
        const auto full = mcp::default_registry();
        CHECK(full.size() == 13 + mcp::external_tool_names().size());
    }

    TEST_CASE("argument validation") {
        const json schema = {{"type", "object"},
                             {"properties",
                              {{"cif", {{"type", "string"}, {"format", "cif-document"}}},
                               {"n", {{"type", "integer"}, {"minimum", 1}}},
                               {"xs", {{"type", "array"}, {"items", {{"type", "number"}}}}}}},
                             {"required", {"cif"}},
                             {"additionalProperties", false}};
        CHECK(mcp::validate_schema(schema).empty());
        const auto missing = mcp::validate_args(schema, json::object());
        REQUIRE(missing.size() == 1);
        CHECK(missing[0].path == "$.cif");
        CHECK(missing[0].rule == "required");
        CHECK(mcp::validate_args(schema, {{"cif", read_fixture("cif/po.cif")}}).empty());
        const auto prose = mcp::validate_args(schema, {{"cif", "just some words"}});
        REQUIRE(prose.size() == 1);
        CHECK(prose[0].rule == "format");
        const auto nested = mcp::validate_args(schema, {{"cif", read_fixture("cif/po.cif")}, {"n", 0}, {"xs", {1, "a"}}});
        REQUIRE(nested.size() == 2);
        CHECK(nested[0].path == "$.n");
        CHECK(nested[1].path == "$.xs[1]");
        const auto extra = mcp::validate_args(schema, {{"cif", read_fixture("cif/po.cif")}, {"zz", 1}});
        REQUIRE(extra.size() == 1);
        CHECK(extra[0].rule == "additionalProperties");
    }

    TEST_CASE("tool calls") {
        const auto reg = mcp::default_registry();
        const mcp::Server srv(reg);
        const auto po = read_fixture("cif/po.cif");

        const auto unknown = rpc(srv, call_req(1, "teleport", json::object()));
        CHECK(unknown["error"]["code"] == mcp::kMethodNotFound);
        CHECK(unknown["id"] == 1);

        const auto invalid = rpc(srv, call_req(2, "nrr_to_rhe", {{"e_sce", "low"}}));
        CHECK(invalid["error"]["code"] == mcp::kInvalidParams);
        CHECK(invalid["error"]["data"]["violations"].size() == 2);

        const auto match = rpc(srv, call_req(3, "structures_match", {{"cif_a", po}, {"cif_b", po}}));
        CHECK(match["result"]["isError"] == false);
        CHECK(payload_of(match["result"])["match"] == true);

        const json entries = json::array({{{"id", "A"}, {"formula", "A"}, {"energy_per_atom", 0.0}},
                                          {{"id", "B"}, {"formula", "B"}, {"energy_per_atom", 0.0}},
                                          {{"id", "AB"}, {"formula", "AB"}, {"energy_per_atom", -0.5}},
                                          {{"id", "AB3"}, {"formula", "AB3"}, {"energy_per_atom", -0.2}}});
        const auto eh = rpc(srv, call_req(4, "energy_above_hull", {{"entries", entries}, {"target", "AB3"}}));
        CHECK(payload_of(eh["result"])["energy_above_hull"].get<double>() == doctest::Approx(0.05));

        // Domain failure: elements without references.
        const auto bad = rpc(srv, call_req(5, "energy_above_hull", {{"entries", entries}, {"target", "C"}}));
        CHECK(bad["result"]["isError"] == true);
    }

    TEST_CASE("protocol errors") {
        const auto reg = mcp::default_registry();
        const mcp::Server srv(reg);
        CHECK(json::parse(srv.handle_frame("{oops"))["error"]["code"] == mcp::kParseError);
        CHECK(json::parse(srv.handle_frame(R"({"id": 1, "method": "tools/list"})"))["error"]["code"] ==
              mcp::kInvalidRequest);
        CHECK(json::parse(srv.handle_frame(R"({"jsonrpc": "2.0", "id": 1, "method": "nope"})"))["error"]["code"] ==
              mcp::kMethodNotFound);
        CHECK(srv.handle_frame(R"({"jsonrpc": "2.0", "method": "tools/list"})").empty());
        const auto list = json::parse(srv.handle_frame(R"({"jsonrpc": "2.0", "id": "x", "method": "tools/list"})"));
        CHECK(list["result"]["tools"].size() == reg.size());
        const auto init = json::parse(srv.handle_frame(R"({"jsonrpc": "2.0", "id": 0, "method": "initialize"})"));
        CHECK(init["result"].contains("capabilities"));
        const auto batch = json::parse(srv.handle_frame(
            R"([{"jsonrpc": "2.0", "id": 1, "method": "tools/list"}, {"jsonrpc": "2.0", "id": 2, "method": "x"}])"));
        CHECK(batch.size() == 2);
    }

    TEST_CASE("timeouts and exclusive tools") {
        mcp::Registry r;
        r.register_tool({"slow", "sleeps", {{"type", "object"}}}, [](const json&, mcp::ToolContext& ctx) {
            for (int i = 0; i < 100 && !*ctx.cancelled; ++i) std::this_thread::sleep_for(5ms);
            return json(true);
        });
        std::atomic<int> inside{0}, peak{0};
        r.register_tool({"serial", "exclusive", {{"type", "object"}}, true}, [&](const json&, mcp::ToolContext& ctx) {
            const int now = ++inside;
            peak = std::max(peak.load(), now);
            std::this_thread::sleep_for(10ms);
            --inside;
            ctx.out << "done";
            return json(now);
        });
        const auto out = r.call({1, "slow", json::object()}, 20ms);
        REQUIRE(out.result);
        CHECK(out.result->is_error);
        CHECK(out.result->stderr_text.find("timeout") != std::string::npos);

        std::vector<std::thread> ts;
        for (int i = 0; i < 8; ++i)
            ts.emplace_back([&, i] {
                const auto o = r.call({i, "serial", json::object()});
                CHECK(o.result->stdout_text == "done");
            });
        for (auto& t : ts) t.join();
        CHECK(peak == 1);
    }

    TEST_CASE("stdio transport correlates concurrent ids") {
        const auto reg = mcp::default_registry();
        const mcp::Server srv(reg);
        std::stringstream in, out;
        for (int i = 0; i < 50; ++i)
            in << call_req(i, "nrr_to_rhe", {{"e_sce", 0.01 * i}, {"ph", 0}}).dump() << "\n";
        in << "garbage\n";
        mcp::serve_stdio(srv, in, out);
        std::string line;
        int seen = 0, parse_errors = 0;
        while (std::getline(out, line)) {
            const auto j = json::parse(line);
            if (j.contains("error")) {
                ++parse_errors;
                continue;
            }
            const int id = j["id"].get<int>();
            CHECK(payload_of(j["result"])["e_rhe"].get<double>() == doctest::Approx(0.01 * id + 0.242));
            ++seen;
        }
        CHECK(seen == 50);
        CHECK(parse_errors == 1);
    }

    TEST_CASE("http transport") {
        const auto reg = mcp::default_registry();
        const mcp::Server srv(reg);
        mcp::HttpServer http(srv, "127.0.0.1", 0);
        http.start();
        httplib::Client cli("127.0.0.1", http.port());
        const auto res = cli.Post("/rpc", call_req(7, "nrr_to_rhe", {{"e_sce", -0.851}, {"ph", 1}}).dump(),
                                  "application/json");
        REQUIRE(res);
        const auto j = json::parse(res->body);
        CHECK(j["id"] == 7);
        CHECK(payload_of(j["result"])["e_rhe"].get<double>() == doctest::Approx(-0.55));
        http.stop();
    }

    TEST_CASE("external adapters answer from stubs") {
        const auto reg = mcp::default_registry();
        const mcp::Server srv(reg);
        for (const auto& name : mcp::external_tool_names()) CHECK(reg.find(name) != nullptr);
        const auto r = rpc(srv, call_req(1, "web_search", {{"query", "vanadium sulfide"}}));
        CHECK(r.contains("result"));
    }
}

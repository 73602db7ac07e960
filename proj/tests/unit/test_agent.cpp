#include <doctest.h>

#include <filesystem>

#include "crysflow/agent.hpp"
#include "crysflow/entropy.hpp"
#include "crysflow/error.hpp"
#include "crysflow/kvconfig.hpp"
#include "crysflow/reward.hpp"
#include "crysflow/tags.hpp"
#include "fixtures.hpp"

using namespace crysflow;
using agent::RouteDecision;

namespace {

Trajectory run_fixture(const std::string& name, const std::optional<std::string>& out = std::nullopt,
                       const agent::AgentConfig& cfg = {}) {
    auto exec = agent::ScriptedBackend::load(fixture_path("agent/" + name));
    auto reason = agent::ScriptedBackend::load(fixture_path("agent/" + name));
    const auto tools = mcp::default_registry();
    return agent::run_agent("Convert -0.851 V vs SCE at pH 1 to RHE.", *exec, *reason, tools, cfg, out);
}

class FailingBackend final : public agent::Backend {
public:
    agent::Generation generate(agent::Node, const std::vector<agent::ChatMessage>&) override {
        throw Error(ErrorCode::BackendUnavailable, "connection refused");
    }
};

}  // namespace

TEST_SUITE("agent") {
    TEST_CASE("tag parsing") {
        const auto ok = parse_model_output(R"(<think>plan</think><tool_call>{"name": "x", "arguments": {}}</tool_call>)");
        CHECK(ok.violations.empty());
        REQUIRE(ok.segments.size() == 2);
        CHECK(ok.segments[0].kind == SegmentKind::Think);
        CHECK(ok.segments[0].text == "plan");
        CHECK(ok.segments[1].kind == SegmentKind::ToolCall);

        const auto flipped = parse_model_output("<tool_call>{}</tool_call><think>later</think>");
        REQUIRE(flipped.segments.size() == 2);
        CHECK(flipped.segments[0].kind == SegmentKind::ToolCall);
        CHECK(flipped.segments[1].kind == SegmentKind::Think);

        const auto unclosed = parse_model_output("<think>unclosed");
        REQUIRE(unclosed.segments.size() == 1);
        CHECK(unclosed.segments[0].kind == SegmentKind::Prose);
        CHECK(unclosed.violations.size() == 1);

        std::string err;
        CHECK_FALSE(parse_tool_call("{\"arguments\": {}}", &err));
        CHECK_FALSE(err.empty());
        const auto call = parse_tool_call(R"({"name": "nrr_to_rhe", "arguments": {"ph": 1}})");
        REQUIRE(call);
        CHECK(call->name == "nrr_to_rhe");
    }

    TEST_CASE("decision parsing") {
        const auto t = agent::parse_decision("<decision>terminate</decision><answer>42</answer>");
        CHECK(t.kind == RouteDecision::Kind::Terminate);
        CHECK(t.answer == "42");
        const auto i = agent::parse_decision("<decision>iterate</decision><instruction>check the hull</instruction>");
        CHECK(i.kind == RouteDecision::Kind::Iterate);
        CHECK(i.instruction == "check the hull");
        CHECK(i.violations.empty());
        const auto prose = agent::parse_decision("we are probably done");
        CHECK(prose.kind == RouteDecision::Kind::Iterate);
        CHECK(prose.instruction == agent::kFallbackInstruction);
        CHECK(prose.violations.size() == 1);
    }

    TEST_CASE("templates") {
        CHECK(agent::render_template("a {{x}} b {{ y }} {{z}}", {{"x", "1"}, {"y", "2"}}) == "a 1 b 2 {{z}}");
    }

    TEST_CASE("terminates after two iterations") {
        const auto t = run_fixture("terminate2.json");
        CHECK(t.status == RunStatus::Terminated);
        CHECK(t.iterations == 2);
        CHECK(t.answer == "-0.55 V vs RHE");
        const auto b = reward::score(t);
        CHECK(b.r_format == 1.0);
        CHECK(b.r_syntax == 1.0);
        CHECK(b.n == 2);
        // observation carries the tool payload
        bool saw = false;
        for (const auto& turn : t.turns)
            for (const auto& o : turn.observations) {
                CHECK_FALSE(o.is_error);
                saw = saw || o.content.dump().find("-0.55") != std::string::npos;
            }
        CHECK(saw);
    }

    TEST_CASE("always iterate ends forced at the cap") {
        const auto t = run_fixture("always_iterate.json");
        CHECK(t.status == RunStatus::Forced);
        CHECK(t.iterations == 6);
        REQUIRE_FALSE(t.turns.empty());
        CHECK(t.turns.back().decision == std::optional<std::string>("forced"));
        agent::AgentConfig small;
        small.max_iterations = 2;
        CHECK(run_fixture("always_iterate.json", std::nullopt, small).iterations == 2);
    }

    TEST_CASE("prose-only executor") {
        const auto t = run_fixture("prose_only.json");
        CHECK(t.status == RunStatus::Forced);
        for (const auto& turn : t.turns) {
            CHECK(turn.role != Role::Observation);
            if (turn.role == Role::Executor) CHECK_FALSE(turn.violations.empty());
        }
        CHECK(reward::score(t).n == 0);
    }

    TEST_CASE("unknown tool is observed as not found") {
        const auto t = run_fixture("unknown_tool.json");
        REQUIRE(t.turns.size() >= 2);
        const auto& exec = t.turns[0];
        REQUIRE(exec.calls.size() == 1);
        CHECK(exec.calls[0].parsed);
        CHECK_FALSE(exec.calls[0].registered);
        const auto& obs = t.turns[1];
        REQUIRE(obs.role == Role::Observation);
        REQUIRE(obs.observations.size() == 1);
        CHECK(obs.observations[0].is_error);
        CHECK(obs.observations[0].content.dump().find("not found") != std::string::npos);
        CHECK(t.status == RunStatus::Terminated);
    }

    TEST_CASE("structure match through the loop") {
        const auto t = run_fixture("match_identity.json");
        REQUIRE(t.turns.size() >= 2);
        CHECK(t.turns[1].observations.at(0).content.dump().find("\"match\":true") != std::string::npos);
    }

    TEST_CASE("malformed decision falls back to iterate") {
        const auto t = run_fixture("malformed_decision.json");
        CHECK(t.status == RunStatus::Terminated);
        CHECK(t.iterations == 2);
        const Turn* first_reasoner = nullptr;
        for (const auto& turn : t.turns)
            if (turn.role == Role::Reasoner) {
                first_reasoner = &turn;
                break;
            }
        REQUIRE(first_reasoner);
        CHECK_FALSE(first_reasoner->violations.empty());
    }

    TEST_CASE("trajectory files are byte-identical across runs") {
        const auto dir = std::filesystem::temp_directory_path();
        const auto a = (dir / "crysflow_traj_a.json").string();
        const auto b = (dir / "crysflow_traj_b.json").string();
        (void)run_fixture("terminate2.json", a);
        (void)run_fixture("terminate2.json", b);
        const auto ta = read_trajectory(a);
        CHECK(dump_stable(to_json(ta)) == dump_stable(to_json(read_trajectory(b))));
        CHECK(ta.status == RunStatus::Terminated);
        CHECK_FALSE(std::filesystem::exists(a + ".tmp"));
        std::filesystem::remove(a);
        std::filesystem::remove(b);
    }

    TEST_CASE("logprob capture feeds the entropy trace") {
        const auto t = run_fixture("logprobs.json");
        std::size_t generated = 0;
        for (const auto& turn : t.turns) generated += turn.tokens.size();
        const auto toks = entropy::tokens_from_trajectory(t);
        CHECK(toks.steps.size() == generated);
        CHECK(generated == 7);
        const auto tr = entropy::trace(toks.steps, toks.segments);
        CHECK(tr.entropies[1] == doctest::Approx(1.0));
        CHECK(tr.segment_tokens.at(SegmentKind::Think) >= 1);
    }

    TEST_CASE("backend failure ends the run") {
        FailingBackend fail;
        const auto tools = mcp::default_registry();
        const auto t = agent::run_agent("q", fail, fail, tools, {});
        CHECK(t.status == RunStatus::Forced);
        CHECK(t.answer.find("run stopped") == 0);
    }

    TEST_CASE("config") {
        const auto kv = KvConfig::parse_text("agent.max_iterations = 3\nagent.tool_timeout_ms = 500\n");
        const auto cfg = agent::AgentConfig::from_config(kv);
        CHECK(cfg.max_iterations == 3);
        CHECK(cfg.tool_timeout.count() == 500);
        const auto scripted =
            KvConfig::parse_text("agent.executor.backend = scripted:agent/terminate2.json\n");
        CHECK(agent::backend_from_config(scripted, "executor", CRYSFLOW_FIXTURES) != nullptr);
        const auto bad = KvConfig::parse_text("agent.executor.backend = carrier-pigeon\n");
        CHECK_THROWS_AS((void)agent::backend_from_config(bad, "executor"), Error);
    }
}

#include "crysflow/trajectory.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "crysflow/error.hpp"

namespace crysflow {

std::string_view to_string(SegmentKind k) noexcept {
    switch (k) {
        case SegmentKind::Think: return "think";
        case SegmentKind::ToolCall: return "tool_call";
        case SegmentKind::Observation: return "observation";
        case SegmentKind::Answer: return "answer";
        case SegmentKind::Prose: return "prose";
    }
    return "prose";
}

SegmentKind segment_kind_from(std::string_view s) {
    if (s == "think") return SegmentKind::Think;
    if (s == "tool_call") return SegmentKind::ToolCall;
    if (s == "observation") return SegmentKind::Observation;
    if (s == "answer") return SegmentKind::Answer;
    if (s == "prose") return SegmentKind::Prose;
    throw Error(ErrorCode::UnreadableTrajectory, "unknown segment kind '" + std::string(s) + "'");
}

std::string_view to_string(Role r) noexcept {
    switch (r) {
        case Role::Executor: return "executor";
        case Role::Reasoner: return "reasoner";
        case Role::Observation: return "observation";
    }
    return "executor";
}

Role role_from(std::string_view s) {
    if (s == "executor") return Role::Executor;
    if (s == "reasoner") return Role::Reasoner;
    if (s == "observation") return Role::Observation;
    throw Error(ErrorCode::UnreadableTrajectory, "unknown role '" + std::string(s) + "'");
}

std::string_view to_string(RunStatus s) noexcept {
    switch (s) {
        case RunStatus::Running: return "running";
        case RunStatus::Terminated: return "terminated";
        case RunStatus::Forced: return "forced";
    }
    return "running";
}

namespace {

RunStatus status_from(std::string_view s) {
    if (s == "running") return RunStatus::Running;
    if (s == "terminated") return RunStatus::Terminated;
    if (s == "forced") return RunStatus::Forced;
    throw Error(ErrorCode::UnreadableTrajectory, "unknown status '" + std::string(s) + "'");
}

json turn_to_json(const Turn& t) {
    json j;
    j["role"] = to_string(t.role);
    j["iteration"] = t.iteration;
    j["raw"] = t.raw;
    json segs = json::array();
    for (const auto& s : t.segments)
        segs.push_back({{"kind", to_string(s.kind)}, {"position", s.position}, {"begin", s.begin}, {"end", s.end}, {"text", s.text}});
    j["segments"] = std::move(segs);
    json calls = json::array();
    for (const auto& c : t.calls)
        calls.push_back({{"id", c.id},
                         {"name", c.name},
                         {"arguments", c.arguments},
                         {"parsed", c.parsed},
                         {"registered", c.registered},
                         {"schema_valid", c.schema_valid},
                         {"valid", c.valid()},
                         {"violations", c.violations}});
    j["tool_calls"] = std::move(calls);
    json obs = json::array();
    for (const auto& o : t.observations)
        obs.push_back({{"call_id", o.call_id},
                       {"is_error", o.is_error},
                       {"content", o.content},
                       {"stdout", o.stdout_text},
                       {"stderr", o.stderr_text}});
    j["observations"] = std::move(obs);
    j["violations"] = t.violations;
    if (t.decision) j["decision"] = *t.decision;
    if (!t.tokens.empty()) {
        json toks = json::array();
        for (const auto& tok : t.tokens) {
            json r{{"token", tok.token}};
            if (tok.logprob) r["logprob"] = *tok.logprob;
            json top = json::array();
            for (const auto& [tt, lp] : tok.top) top.push_back({{"token", tt}, {"logprob", lp}});
            r["top_logprobs"] = std::move(top);
            toks.push_back(std::move(r));
        }
        j["tokens"] = std::move(toks);
    }
    return j;
}

Turn turn_from_json(const json& j) {
    Turn t;
    t.role = role_from(j.at("role").get<std::string>());
    t.iteration = j.value("iteration", 0);
    t.raw = j.value("raw", std::string{});
    for (const auto& s : j.value("segments", json::array())) {
        TaggedSegment seg;
        seg.kind = segment_kind_from(s.at("kind").get<std::string>());
        seg.position = s.value("position", std::size_t{0});
        seg.begin = s.value("begin", std::size_t{0});
        seg.end = s.value("end", std::size_t{0});
        seg.text = s.value("text", std::string{});
        t.segments.push_back(std::move(seg));
    }
    for (const auto& c : j.value("tool_calls", json::array())) {
        ToolCallRecord r;
        r.id = c.value("id", std::string{});
        r.name = c.value("name", std::string{});
        r.arguments = c.value("arguments", json::object());
        r.parsed = c.value("parsed", false);
        r.registered = c.value("registered", false);
        r.schema_valid = c.value("schema_valid", false);
        r.violations = c.value("violations", std::vector<std::string>{});
        t.calls.push_back(std::move(r));
    }
    for (const auto& o : j.value("observations", json::array())) {
        ObservationRecord r;
        r.call_id = o.value("call_id", std::string{});
        r.is_error = o.value("is_error", false);
        r.content = o.value("content", json::array());
        r.stdout_text = o.value("stdout", std::string{});
        r.stderr_text = o.value("stderr", std::string{});
        t.observations.push_back(std::move(r));
    }
    t.violations = j.value("violations", std::vector<std::string>{});
    if (j.contains("decision")) t.decision = j.at("decision").get<std::string>();
    for (const auto& tok : j.value("tokens", json::array())) {
        TokenRecord r;
        r.token = tok.at("token").get<std::string>();
        if (tok.contains("logprob")) r.logprob = tok.at("logprob").get<double>();
        for (const auto& alt : tok.value("top_logprobs", json::array()))
            r.top.emplace_back(alt.at("token").get<std::string>(), alt.at("logprob").get<double>());
        t.tokens.push_back(std::move(r));
    }
    return t;
}

}  // namespace

json to_json(const Trajectory& t) {
    json j;
    j["format"] = "crysflow-trajectory/1";
    j["query"] = t.query;
    j["config_digest"] = t.config_digest;
    j["status"] = to_string(t.status);
    j["iterations"] = t.iterations;
    j["answer"] = t.answer;
    json turns = json::array();
    for (const auto& turn : t.turns) turns.push_back(turn_to_json(turn));
    j["turns"] = std::move(turns);
    return j;
}

Trajectory trajectory_from_json(const json& j) {
    try {
        Trajectory t;
        if (!j.is_object()) throw Error(ErrorCode::UnreadableTrajectory, "trajectory must be a JSON object");
        t.query = j.value("query", std::string{});
        t.config_digest = j.value("config_digest", std::string{});
        t.status = status_from(j.value("status", std::string{"running"}));
        t.iterations = j.value("iterations", 0);
        t.answer = j.value("answer", std::string{});
        for (const auto& turn : j.value("turns", json::array())) t.turns.push_back(turn_from_json(turn));
        return t;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::UnreadableTrajectory, e.what());
    }
}

Trajectory read_trajectory(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::UnreadableTrajectory, "cannot open " + path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::UnreadableTrajectory, path + " is not valid JSON");
    return trajectory_from_json(j);
}

std::string dump_stable(const json& j) { return j.dump(2, ' ', false, json::error_handler_t::replace) + "\n"; }

void write_trajectory_atomic(const Trajectory& t, const std::string& path) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp);
        out << dump_stable(to_json(t));
        if (!out) throw Error(ErrorCode::Io, "short write to " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw Error(ErrorCode::Io, "rename " + tmp + ": " + ec.message());
}

}  // namespace crysflow

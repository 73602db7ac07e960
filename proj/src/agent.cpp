#include "crysflow/agent.hpp"

#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "crysflow/error.hpp"
#include "crysflow/tags.hpp"

// Last: resolv.h (via httplib) defines _res, which Eigen uses as a name.
#include <httplib.h>

namespace crysflow::agent {

namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string resolve(const std::string& path, const std::string& base_dir) {
    fs::path p(path);
    if (p.is_relative()) p = fs::path(base_dir) / p;
    return p.string();
}

Generation generation_from(const json& entry) {
    Generation g;
    if (entry.is_string()) {
        g.text = entry.get<std::string>();
        return g;
    }
    if (!entry.is_object() || !entry.contains("text") || !entry["text"].is_string())
        throw Error(ErrorCode::BadConfig, "scripted entry needs a 'text' string");
    g.text = entry["text"].get<std::string>();
    if (entry.contains("tokens"))
        for (const auto& t : entry["tokens"]) {
            TokenRecord rec;
            rec.token = t.at("token").get<std::string>();
            if (t.contains("logprob") && !t["logprob"].is_null()) rec.logprob = t["logprob"].get<double>();
            if (t.contains("top"))
                for (const auto& alt : t["top"]) rec.top.emplace_back(alt.at(0).get<std::string>(), alt.at(1).get<double>());
            g.tokens.push_back(std::move(rec));
        }
    return g;
}

}  // namespace

ScriptedBackend::ScriptedBackend(const json& fixture) {
    try {
        for (const auto& e : fixture.at("executor")) executor_.push_back(generation_from(e));
        for (const auto& e : fixture.at("reasoner")) reasoner_.push_back(generation_from(e));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::BadConfig, std::string("scripted fixture: ") + e.what());
    }
    if (executor_.empty() || reasoner_.empty())
        throw Error(ErrorCode::BadConfig, "scripted fixture needs nonempty executor and reasoner lists");
}

std::unique_ptr<ScriptedBackend> ScriptedBackend::load(const std::string& path) {
    const std::string text = slurp(path);
    const json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::BadConfig, "scripted fixture is not JSON: " + path);
    return std::make_unique<ScriptedBackend>(j);
}

Generation ScriptedBackend::generate(Node node, const std::vector<ChatMessage>&) {
    auto& list = node == Node::Executor ? executor_ : reasoner_;
    auto& pos = node == Node::Executor ? executor_pos_ : reasoner_pos_;
    const Generation& g = list[std::min(pos, list.size() - 1)];
    ++pos;
    return g;
}

HttpBackend::HttpBackend(HttpProfile profile) : profile_(std::move(profile)) {
    if (profile_.endpoint.empty()) throw Error(ErrorCode::BadConfig, "http backend needs an endpoint");
}

Generation HttpBackend::generate(Node, const std::vector<ChatMessage>& messages) {
    json body;
    body["model"] = profile_.model;
    body["temperature"] = profile_.temperature;
    body["max_tokens"] = profile_.max_tokens;
    json msgs = json::array();
    for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
    body["messages"] = msgs;
    if (profile_.logprobs) {
        body["logprobs"] = true;
        body["top_logprobs"] = profile_.top_logprobs;
    }

    httplib::Headers headers;
    if (const char* key = std::getenv(kApiKeyEnv); key && *key) headers.emplace("Authorization", std::string("Bearer ") + key);

    std::string last_error;
    auto backoff = profile_.backoff;
    for (int attempt = 0; attempt <= profile_.retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
        httplib::Client cli(profile_.endpoint);
        cli.set_connection_timeout(std::chrono::seconds(10));
        cli.set_read_timeout(profile_.timeout);
        auto res = cli.Post("/v1/chat/completions", headers, body.dump(), "application/json");
        if (!res) {
            last_error = httplib::to_string(res.error());
            continue;
        }
        if (res->status == 429 || res->status >= 500) {
            last_error = fmt::format("HTTP {}", res->status);
            continue;
        }
        if (res->status != 200) throw Error(ErrorCode::BackendUnavailable, fmt::format("HTTP {}", res->status));
        const json reply = json::parse(res->body, nullptr, false);
        if (reply.is_discarded()) throw Error(ErrorCode::BackendUnavailable, "backend reply is not JSON");
        try {
            const auto& choice = reply.at("choices").at(0);
            Generation g;
            g.text = choice.at("message").at("content").get<std::string>();
            if (choice.contains("logprobs") && choice["logprobs"].is_object() && choice["logprobs"].contains("content"))
                for (const auto& t : choice["logprobs"]["content"]) {
                    TokenRecord rec;
                    rec.token = t.at("token").get<std::string>();
                    if (t.contains("logprob")) rec.logprob = t["logprob"].get<double>();
                    if (t.contains("top_logprobs"))
                        for (const auto& alt : t["top_logprobs"])
                            rec.top.emplace_back(alt.at("token").get<std::string>(), alt.at("logprob").get<double>());
                    g.tokens.push_back(std::move(rec));
                }
            return g;
        } catch (const json::exception& e) {
            throw Error(ErrorCode::BackendUnavailable, std::string("unexpected reply shape: ") + e.what());
        }
    }
    throw Error(ErrorCode::BackendUnavailable,
                fmt::format("{} unreachable after {} attempts: {}", profile_.endpoint, profile_.retries + 1, last_error));
}

Templates Templates::defaults() {
    Templates t;
    t.executor =
        "You are the executor of a materials-discovery agent. Work on the current instruction by calling tools.\n"
        "Reason first inside <think>...</think>, then emit each call as\n"
        "<tool_call>{\"name\": \"<tool>\", \"arguments\": {...}}</tool_call>.\n"
        "\nAvailable tools:\n{{tools}}\n"
        "\nQuery: {{query}}\n\nHistory:\n{{history}}\n\nCurrent instruction: {{instruction}}\n";
    t.reasoner =
        "You are the reasoner of a materials-discovery agent. You cannot call tools. Analyse the history and decide.\n"
        "Reason inside <think>...</think>. Then either\n"
        "<decision>iterate</decision><instruction>next step for the executor</instruction>\n"
        "or\n"
        "<decision>terminate</decision><answer>final answer</answer>\n"
        "\nQuery: {{query}}\n\nHistory:\n{{history}}\n";
    t.forced =
        "The iteration budget is spent. Give your best-effort answer from the evidence so far.\n"
        "Reason inside <think>...</think>, then give <answer>...</answer>.\n"
        "\nQuery: {{query}}\n\nHistory:\n{{history}}\n";
    return t;
}

AgentConfig AgentConfig::from_config(const KvConfig& cfg, const std::string& base_dir) {
    AgentConfig a;
    a.max_iterations = static_cast<int>(cfg.get_int("agent.max_iterations", a.max_iterations));
    if (a.max_iterations < 1) throw Error(ErrorCode::BadConfig, "agent.max_iterations must be >= 1");
    a.tool_timeout = std::chrono::milliseconds(cfg.get_int("agent.tool_timeout_ms", a.tool_timeout.count()));
    if (a.tool_timeout.count() <= 0) throw Error(ErrorCode::BadConfig, "agent.tool_timeout_ms must be positive");
    a.capture_logprobs = cfg.get_bool("agent.capture_logprobs", a.capture_logprobs);
    if (auto p = cfg.get("agent.template.executor")) a.templates.executor = slurp(resolve(*p, base_dir));
    if (auto p = cfg.get("agent.template.reasoner")) a.templates.reasoner = slurp(resolve(*p, base_dir));
    if (auto p = cfg.get("agent.template.forced")) a.templates.forced = slurp(resolve(*p, base_dir));
    a.digest_source = cfg.canonical();
    return a;
}

std::shared_ptr<Backend> backend_from_config(const KvConfig& cfg, const std::string& node, const std::string& base_dir) {
    const std::string prefix = "agent." + node + ".";
    const std::string kind = cfg.get_or(prefix + "backend", "");
    if (kind.rfind("scripted:", 0) == 0) return ScriptedBackend::load(resolve(kind.substr(9), base_dir));
    if (kind == "http") {
        HttpProfile p;
        p.endpoint = cfg.get_or(prefix + "endpoint", "");
        p.model = cfg.get_or(prefix + "model", "");
        p.temperature = cfg.get_double(prefix + "temperature", p.temperature);
        p.max_tokens = static_cast<int>(cfg.get_int(prefix + "max_tokens", p.max_tokens));
        p.logprobs = cfg.get_bool(prefix + "logprobs", p.logprobs);
        p.top_logprobs = static_cast<int>(cfg.get_int(prefix + "top_logprobs", p.top_logprobs));
        return std::make_shared<HttpBackend>(std::move(p));
    }
    throw Error(ErrorCode::BadConfig, fmt::format("{}backend must be scripted:<fixture> or http", prefix));
}

RouteDecision parse_decision(std::string_view text) {
    RouteDecision d;
    auto fallback = [&](std::string why) {
        d = RouteDecision{};
        d.instruction = kFallbackInstruction;
        d.violations.push_back(std::move(why));
        return d;
    };
    const auto decision = extract_tag(text, "decision");
    if (!decision) return fallback("malformed decision: no <decision> block");
    std::string kind;
    for (char c : *decision) kind += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (kind == "iterate") {
        const auto instr = extract_tag(text, "instruction");
        if (!instr || instr->empty()) return fallback("malformed decision: iterate without <instruction>");
        d.kind = RouteDecision::Kind::Iterate;
        d.instruction = *instr;
        return d;
    }
    if (kind == "terminate") {
        const auto answer = extract_tag(text, "answer");
        if (!answer) return fallback("malformed decision: terminate without <answer>");
        d.kind = RouteDecision::Kind::Terminate;
        d.answer = *answer;
        return d;
    }
    return fallback("malformed decision: unknown kind '" + kind + "'");
}

std::string render_template(std::string_view tmpl, const std::vector<std::pair<std::string, std::string>>& values) {
    std::string out;
    std::size_t pos = 0;
    while (pos < tmpl.size()) {
        const auto open = tmpl.find("{{", pos);
        if (open == std::string_view::npos) break;
        const auto close = tmpl.find("}}", open + 2);
        if (close == std::string_view::npos) break;
        const std::string key = trim(tmpl.substr(open + 2, close - open - 2));
        out.append(tmpl.substr(pos, open - pos));
        bool found = false;
        for (const auto& [k, v] : values)
            if (k == key) {
                out += v;
                found = true;
                break;
            }
        if (!found) out.append(tmpl.substr(open, close + 2 - open));
        pos = close + 2;
    }
    out.append(tmpl.substr(pos));
    return out;
}

namespace {

std::string render_history(const Trajectory& t) {
    std::string out;
    for (const auto& turn : t.turns) {
        out += fmt::format("[{} {}]\n", to_string(turn.role), turn.iteration);
        out += turn.raw;
        if (!out.empty() && out.back() != '\n') out += '\n';
    }
    return out.empty() ? "(none)\n" : out;
}

std::string render_tools(const mcp::Registry& tools) {
    std::string out;
    for (const auto& s : tools.list())
        out += fmt::format("- {}: {}\n  arguments: {}\n", s.name, s.description, s.parameters.dump());
    return out;
}

void persist(const Session& s) {
    if (s.out_path) write_trajectory_atomic(s.trajectory, *s.out_path);
}

void append(Session& s, Turn turn) {
    s.trajectory.turns.push_back(std::move(turn));
    persist(s);
}

Turn model_turn(Role role, int iteration, Generation g, bool capture) {
    Turn turn;
    turn.role = role;
    turn.iteration = iteration;
    auto parsed = parse_model_output(g.text);
    turn.segments = std::move(parsed.segments);
    turn.violations = std::move(parsed.violations);
    turn.raw = std::move(g.text);
    if (capture) turn.tokens = std::move(g.tokens);
    return turn;
}

ObservationRecord error_observation(const std::string& call_id, int code, const std::string& message, json data) {
    ObservationRecord obs;
    obs.call_id = call_id;
    obs.is_error = true;
    json item = {{"type", "error"}, {"code", code}, {"message", message}};
    if (!data.is_null()) item["data"] = std::move(data);
    obs.content = json::array({item});
    obs.stderr_text = message;
    return obs;
}

}  // namespace

void executor_step(Session& s, Backend& backend, const mcp::Registry& tools, const AgentConfig& cfg) {
    auto& t = s.trajectory;
    if (t.status != RunStatus::Running) throw Error(ErrorCode::BadConfig, "executor_step on a finished run");
    const std::string prompt = render_template(cfg.templates.executor, {{"query", t.query},
                                                                        {"history", render_history(t)},
                                                                        {"instruction", s.instruction},
                                                                        {"tools", render_tools(tools)}});
    Generation g = backend.generate(Node::Executor, {{"system", prompt}, {"user", s.instruction}});
    Turn turn = model_turn(Role::Executor, t.iterations, std::move(g), cfg.capture_logprobs);

    Turn observations;
    observations.role = Role::Observation;
    observations.iteration = t.iterations;
    std::size_t index = 0;
    for (const auto& seg : turn.segments) {
        if (seg.kind != SegmentKind::ToolCall) continue;
        ToolCallRecord rec;
        rec.id = fmt::format("call-{}-{}", t.iterations, ++index);
        std::string error;
        const auto parsed = parse_tool_call(seg.text, &error);
        ObservationRecord obs;
        if (!parsed) {
            rec.violations.push_back(error);
            obs = error_observation(rec.id, mcp::kParseError, "malformed tool call: " + error, nullptr);
        } else {
            rec.parsed = true;
            rec.name = parsed->name;
            rec.arguments = parsed->arguments;
            const auto* schema = tools.find(rec.name);
            rec.registered = schema != nullptr;
            if (!schema) {
                rec.violations.push_back("unregistered tool " + rec.name);
                obs = error_observation(rec.id, mcp::kMethodNotFound, "tool not found: " + rec.name, nullptr);
            } else if (auto v = mcp::validate_args(schema->parameters, rec.arguments); !v.empty()) {
                json list = json::array();
                for (const auto& x : v) {
                    rec.violations.push_back(fmt::format("{} {}: {}", x.path, x.rule, x.message));
                    list.push_back(mcp::to_json(x));
                }
                obs = error_observation(rec.id, mcp::kInvalidParams, "invalid params", {{"violations", list}});
            } else {
                rec.schema_valid = true;
                const auto out = tools.call({rec.id, rec.name, rec.arguments}, cfg.tool_timeout);
                if (out.error) {
                    obs = error_observation(rec.id, out.error->code, out.error->message, out.error->data);
                } else {
                    obs.call_id = rec.id;
                    obs.is_error = out.result->is_error;
                    obs.content = out.result->content;
                    obs.stdout_text = out.result->stdout_text;
                    obs.stderr_text = out.result->stderr_text;
                }
            }
        }
        observations.raw += fmt::format("<observation id=\"{}\">{}</observation>\n", rec.id,
                                        obs.content.dump(-1, ' ', false, json::error_handler_t::replace));
        observations.observations.push_back(std::move(obs));
        turn.calls.push_back(std::move(rec));
    }
    if (turn.calls.empty()) turn.violations.push_back("executor turn without a tool call");
    append(s, std::move(turn));
    if (!observations.observations.empty()) append(s, std::move(observations));
}

RouteDecision reasoner_step(Session& s, Backend& backend, const AgentConfig& cfg) {
    auto& t = s.trajectory;
    const std::string prompt =
        render_template(cfg.templates.reasoner, {{"query", t.query}, {"history", render_history(t)}});
    Generation g = backend.generate(Node::Reasoner, {{"system", prompt}, {"user", t.query}});
    const RouteDecision d = parse_decision(g.text);
    Turn turn = model_turn(Role::Reasoner, t.iterations, std::move(g), cfg.capture_logprobs);
    turn.decision = d.kind == RouteDecision::Kind::Terminate ? "terminate" : "iterate";
    for (const auto& v : d.violations) turn.violations.push_back(v);
    append(s, std::move(turn));
    return d;
}

namespace {

void forced_answer(Session& s, Backend& reasoner, const AgentConfig& cfg) {
    auto& t = s.trajectory;
    const std::string prompt = render_template(cfg.templates.forced, {{"query", t.query}, {"history", render_history(t)}});
    Generation g = reasoner.generate(Node::Reasoner, {{"system", prompt}, {"user", t.query}});
    Turn turn = model_turn(Role::Reasoner, t.iterations, std::move(g), cfg.capture_logprobs);
    turn.decision = "forced";
    const auto answer = extract_tag(turn.raw, "answer");
    if (!answer) turn.violations.push_back("forced answer without <answer>");
    t.answer = answer ? *answer : trim(turn.raw);
    t.status = RunStatus::Forced;
    s.trajectory.turns.push_back(std::move(turn));
}

std::string config_digest(const AgentConfig& cfg) {
    return fnv1a_hex(fmt::format("max_iterations={}\ntool_timeout_ms={}\ncapture_logprobs={}\n{}\n{}\n{}\n{}",
                                 cfg.max_iterations, cfg.tool_timeout.count(), cfg.capture_logprobs, cfg.digest_source,
                                 cfg.templates.executor, cfg.templates.reasoner, cfg.templates.forced));
}

}  // namespace

Trajectory run_agent(const std::string& query, Backend& executor, Backend& reasoner, const mcp::Registry& tools,
                     const AgentConfig& cfg, const std::optional<std::string>& out_path) {
    if (cfg.max_iterations < 1) throw Error(ErrorCode::BadConfig, "max_iterations must be >= 1");
    Session s;
    s.trajectory.query = query;
    s.trajectory.config_digest = config_digest(cfg);
    s.instruction = query;
    s.out_path = out_path;
    persist(s);

    auto& t = s.trajectory;
    try {
        for (;;) {
            ++t.iterations;
            executor_step(s, executor, tools, cfg);
            const RouteDecision d = reasoner_step(s, reasoner, cfg);
            if (d.kind == RouteDecision::Kind::Terminate) {
                t.status = RunStatus::Terminated;
                t.answer = d.answer;
                break;
            }
            if (t.iterations >= cfg.max_iterations) {
                forced_answer(s, reasoner, cfg);
                break;
            }
            s.instruction = d.instruction;
        }
    } catch (const Error& e) {
        if (e.code() != ErrorCode::BackendUnavailable) throw;
        t.status = RunStatus::Forced;
        t.answer = std::string("run stopped: ") + e.what();
    }
    persist(s);
    return t;
}

}  // namespace crysflow::agent

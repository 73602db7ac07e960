#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "crysflow/kvconfig.hpp"
#include "crysflow/mcp.hpp"
#include "crysflow/trajectory.hpp"

namespace crysflow::agent {

/// Environment variable holding the bearer token for HTTP backends.
inline constexpr const char* kApiKeyEnv = "CRYSFLOW_API_KEY";
inline constexpr const char* kFallbackInstruction = "continue the plan";

struct ChatMessage {
    std::string role;  // system, user, assistant
    std::string content;
};

struct Generation {
    std::string text;
    std::vector<TokenRecord> tokens;  // empty unless the backend reports logprobs
};

enum class Node { Executor, Reasoner };

class Backend {
public:
    virtual ~Backend() = default;
    /// Throws BackendUnavailable on transport failure.
    virtual Generation generate(Node node, const std::vector<ChatMessage>& messages) = 0;
};

/// Replays a JSON fixture:
///
///     {"executor": [entry, ...], "reasoner": [entry, ...]}
///
/// where an entry is a string or {"text": ..., "tokens": [{"token", "logprob",
/// "top": [[tok, logprob], ...]}]}. Each node walks its own list; once the
/// list is exhausted the last entry repeats.
class ScriptedBackend final : public Backend {
public:
    explicit ScriptedBackend(const json& fixture);
    static std::unique_ptr<ScriptedBackend> load(const std::string& path);
    Generation generate(Node node, const std::vector<ChatMessage>& messages) override;

private:
    std::vector<Generation> executor_;
    std::vector<Generation> reasoner_;
    std::size_t executor_pos_ = 0;
    std::size_t reasoner_pos_ = 0;
};

struct HttpProfile {
    std::string endpoint;  // scheme://host[:port], chat completions at /v1/chat/completions
    std::string model;
    double temperature = 0.0;
    int max_tokens = 2048;
    bool logprobs = false;
    int top_logprobs = 5;
    int retries = 2;
    std::chrono::milliseconds backoff{500};  // doubled per retry
    std::chrono::seconds timeout{120};
};

/// OpenAI-compatible chat-completions client.
class HttpBackend final : public Backend {
public:
    explicit HttpBackend(HttpProfile profile);
    Generation generate(Node node, const std::vector<ChatMessage>& messages) override;

private:
    HttpProfile profile_;
};

struct Templates {
    std::string executor;
    std::string reasoner;
    std::string forced;

    static Templates defaults();
};

struct AgentConfig {
    int max_iterations = 6;
    std::chrono::milliseconds tool_timeout = std::chrono::seconds(120);
    bool capture_logprobs = true;
    Templates templates = Templates::defaults();
    std::string digest_source;  // canonical config text hashed into the trajectory header

    /// Keys: agent.max_iterations, agent.tool_timeout_ms, agent.capture_logprobs,
    /// agent.template.executor / .reasoner / .forced (paths relative to base_dir).
    static AgentConfig from_config(const KvConfig& cfg, const std::string& base_dir = ".");
};

/// Backend for one node from config: agent.<node>.backend = scripted:<path> |
/// http, plus agent.<node>.endpoint, .model, .temperature, .max_tokens,
/// .logprobs, .top_logprobs.
std::shared_ptr<Backend> backend_from_config(const KvConfig& cfg, const std::string& node,
                                             const std::string& base_dir = ".");

struct RouteDecision {
    enum class Kind { Iterate, Terminate } kind = Kind::Iterate;
    std::string instruction;  // iterate only
    std::string answer;       // terminate only
    std::vector<std::string> violations;
};

/// Reads <decision>, <instruction> and <answer>. Anything malformed falls back
/// to iterate with the fallback instruction and a recorded violation.
RouteDecision parse_decision(std::string_view text);

std::string render_template(std::string_view tmpl, const std::vector<std::pair<std::string, std::string>>& values);

struct Session {
    Trajectory trajectory;
    std::string instruction;  // what the executor works on next
    std::optional<std::string> out_path;
};

/// One executor turn: generate, parse, verify each tool call and run the valid
/// ones in emission order. Appends the executor turn and, when any call was
/// emitted, one observation turn.
void executor_step(Session& s, Backend& backend, const mcp::Registry& tools, const AgentConfig& cfg);

RouteDecision reasoner_step(Session& s, Backend& backend, const AgentConfig& cfg);

/// Alternates executor and reasoner from the query. At max_iterations one
/// more reasoner call asks for a best-effort answer and the run ends forced.
/// Backend failures also end the run forced, with a diagnostic answer.
Trajectory run_agent(const std::string& query, Backend& executor, Backend& reasoner, const mcp::Registry& tools,
                     const AgentConfig& cfg, const std::optional<std::string>& out_path = std::nullopt);

}  // namespace crysflow::agent

#pragma once

#include <atomic>
#include <chrono>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "crysflow/trajectory.hpp"

namespace crysflow::mcp {

inline constexpr int kParseError = -32700;
inline constexpr int kInvalidRequest = -32600;
inline constexpr int kMethodNotFound = -32601;
inline constexpr int kInvalidParams = -32602;
inline constexpr int kInternalError = -32603;

inline constexpr const char* kProtocolVersion = "crysflow-mcp/1";

struct Violation {
    std::string path;  // "$", "$.cif", "$.entries[2].formula"
    std::string rule;  // required, type, enum, minimum, maximum, additionalProperties, format, schema
    std::string message;
};

json to_json(const Violation& v);

/// Checks a schema document against the supported vocabulary: type,
/// properties, required, enum, minimum, maximum, items, additionalProperties,
/// format, description, title, default.
std::vector<Violation> validate_schema(const json& schema);

/// Empty result means the arguments conform. Format "cif-document" requires a
/// string that parses as a CIF.
std::vector<Violation> validate_args(const json& schema, const json& args);

struct ToolSchema {
    std::string name;
    std::string description;
    json parameters = json::object();
    bool exclusive = false;  // calls are serialised by the server
};

/// Per-call context: captured diagnostic streams and a cancellation flag set
/// when the deadline passes.
struct ToolContext {
    std::ostringstream out;
    std::ostringstream err;
    std::shared_ptr<std::atomic<bool>> cancelled = std::make_shared<std::atomic<bool>>(false);
};

/// Returns the structured payload; domain failures are thrown.
using Handler = std::function<json(const json& args, ToolContext& ctx)>;

struct ToolCall {
    json id;
    std::string name;
    json arguments = json::object();
};

struct ToolResult {
    json id;
    json content = json::array();  // [{"type": "text", ...}, {"type": "json", ...}]
    bool is_error = false;
    std::string stdout_text;
    std::string stderr_text;
    std::optional<json> payload;  // handler return value, when it succeeded
};

struct ProtocolError {
    int code = kInternalError;
    std::string message;
    json data;  // null when absent
};

struct CallOutcome {
    std::optional<ToolResult> result;
    std::optional<ProtocolError> error;
};

class Registry {
public:
    /// Throws DuplicateName, or InvalidSchema when the parameter schema is
    /// outside the supported vocabulary.
    void register_tool(ToolSchema schema, Handler handler);

    [[nodiscard]] std::vector<ToolSchema> list() const;
    [[nodiscard]] const ToolSchema* find(const std::string& name) const;
    [[nodiscard]] std::size_t size() const noexcept { return tools_.size(); }

    /// Registry check, then parameter check, then the handler under a deadline.
    /// A handler that overruns yields an is_error result with a timeout
    /// diagnostic; it keeps running detached with its cancellation flag set.
    [[nodiscard]] CallOutcome call(const ToolCall& call,
                                   std::chrono::milliseconds timeout = std::chrono::seconds(120)) const;

private:
    struct Entry {
        ToolSchema schema;
        Handler handler;
        std::shared_ptr<std::mutex> lock;  // set for exclusive tools
    };
    std::map<std::string, Entry> tools_;
    std::vector<std::string> order_;
};

json to_json(const ToolSchema& s);
json to_json(const ToolResult& r);

struct ServerOptions {
    std::chrono::milliseconds timeout = std::chrono::seconds(120);
    unsigned workers = 0;  // 0: hardware concurrency
};

/// JSON-RPC 2.0 front end over a registry that is immutable once serving.
class Server {
public:
    explicit Server(const Registry& registry, ServerOptions opt = {});

    /// One request frame (object or batch array) in, response text out; empty
    /// for notifications. Never throws.
    [[nodiscard]] std::string handle_frame(std::string_view frame) const;
    [[nodiscard]] json handle_request(const json& request) const;

    [[nodiscard]] const Registry& registry() const noexcept { return registry_; }
    [[nodiscard]] const ServerOptions& options() const noexcept { return opt_; }

private:
    const Registry& registry_;
    ServerOptions opt_;
};

/// Newline-delimited frames. Requests run concurrently; responses are written
/// as they finish. Returns after EOF once every in-flight call has answered.
void serve_stdio(const Server& server, std::istream& in, std::ostream& out);

/// HTTP POST on a single path, one request per body.
class HttpServer {
public:
    /// Binds immediately; port 0 picks a free port. Throws BindFailure.
    HttpServer(const Server& server, const std::string& host, int port, std::string path = "/rpc");
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    [[nodiscard]] int port() const noexcept { return port_; }
    void start();  // background listener
    void run();    // blocks until stop()
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    int port_ = 0;
    std::thread thread_;
};

/// Built-in deterministic crystallography roster.
void register_builtin_tools(Registry& r);
std::size_t builtin_tool_count();

/// External tool clusters as adapter slots. A tool with an endpoint forwards
/// its arguments by HTTP POST; without one it answers from a deterministic stub.
void register_external_tools(Registry& r, const std::map<std::string, std::string>& endpoints = {});
std::vector<std::string> external_tool_names();

Registry default_registry(const std::map<std::string, std::string>& endpoints = {});

}  // namespace crysflow::mcp

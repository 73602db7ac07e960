#include "crysflow/mcp.hpp"

#include <condition_variable>
#include <deque>
#include <future>
#include <istream>
#include <ostream>
#include <set>

#include <fmt/format.h>

#include "crysflow/cif.hpp"
#include "crysflow/error.hpp"

// Last: resolv.h (via httplib) defines _res, which Eigen uses as a name.
#include <httplib.h>

namespace crysflow::mcp {

json to_json(const Violation& v) { return {{"path", v.path}, {"rule", v.rule}, {"message", v.message}}; }

namespace {

const std::set<std::string> kTypes = {"object", "array", "string", "number", "integer", "boolean", "null"};
const std::set<std::string> kKeywords = {"type",  "properties", "required", "enum",        "minimum", "maximum",
                                         "items", "additionalProperties",   "format",      "description",
                                         "title", "default"};

void check_schema(const json& s, const std::string& path, std::vector<Violation>& out) {
    if (!s.is_object()) {
        out.push_back({path, "schema", "schema must be an object"});
        return;
    }
    for (const auto& [key, value] : s.items()) {
        if (!kKeywords.count(key)) {
            out.push_back({path, "schema", fmt::format("unsupported keyword '{}'", key)});
            continue;
        }
        if (key == "type") {
            auto ok_type = [](const json& t) { return t.is_string() && kTypes.count(t.get<std::string>()); };
            bool ok = ok_type(value);
            if (value.is_array()) {
                ok = !value.empty();
                for (const auto& t : value) ok = ok && ok_type(t);
            }
            if (!ok) out.push_back({path, "schema", "bad 'type'"});
        } else if (key == "properties") {
            if (!value.is_object()) {
                out.push_back({path, "schema", "'properties' must be an object"});
                continue;
            }
            for (const auto& [name, sub] : value.items()) check_schema(sub, path + "." + name, out);
        } else if (key == "required") {
            bool ok = value.is_array();
            if (ok)
                for (const auto& r : value) ok = ok && r.is_string();
            if (!ok) out.push_back({path, "schema", "'required' must be an array of strings"});
        } else if (key == "enum") {
            if (!value.is_array() || value.empty()) out.push_back({path, "schema", "'enum' must be a nonempty array"});
        } else if (key == "minimum" || key == "maximum") {
            if (!value.is_number()) out.push_back({path, "schema", fmt::format("'{}' must be a number", key)});
        } else if (key == "items") {
            check_schema(value, path + "[]", out);
        } else if (key == "additionalProperties") {
            if (!value.is_boolean()) check_schema(value, path + ".*", out);
        } else if (key == "format" || key == "description" || key == "title") {
            if (!value.is_string()) out.push_back({path, "schema", fmt::format("'{}' must be a string", key)});
        }
    }
}

bool has_type(const json& v, const std::string& type) {
    if (type == "object") return v.is_object();
    if (type == "array") return v.is_array();
    if (type == "string") return v.is_string();
    if (type == "boolean") return v.is_boolean();
    if (type == "null") return v.is_null();
    if (type == "number") return v.is_number();
    if (type == "integer") {
        if (v.is_number_integer()) return true;
        if (v.is_number_float()) {
            const double d = v.get<double>();
            return std::isfinite(d) && d == std::floor(d);
        }
    }
    return false;
}

std::string type_name(const json& v) {
    if (v.is_number_integer()) return "integer";
    if (v.is_number()) return "number";
    return v.type_name();
}

void check_value(const json& s, const json& v, const std::string& path, std::vector<Violation>& out) {
    if (!s.is_object()) return;
    if (auto t = s.find("type"); t != s.end()) {
        bool ok = false;
        std::string want;
        if (t->is_string()) {
            ok = has_type(v, t->get<std::string>());
            want = t->get<std::string>();
        } else {
            for (const auto& alt : *t) {
                ok = ok || has_type(v, alt.get<std::string>());
                want += (want.empty() ? "" : "|") + alt.get<std::string>();
            }
        }
        if (!ok) {
            out.push_back({path, "type", fmt::format("expected {}, got {}", want, type_name(v))});
            return;
        }
    }
    if (auto e = s.find("enum"); e != s.end()) {
        bool found = false;
        for (const auto& option : *e) found = found || option == v;
        if (!found) out.push_back({path, "enum", "value not in enumeration"});
    }
    if (v.is_number()) {
        const double d = v.get<double>();
        if (auto m = s.find("minimum"); m != s.end() && d < m->get<double>())
            out.push_back({path, "minimum", fmt::format("{} < minimum {}", d, m->get<double>())});
        if (auto m = s.find("maximum"); m != s.end() && d > m->get<double>())
            out.push_back({path, "maximum", fmt::format("{} > maximum {}", d, m->get<double>())});
    }
    if (auto f = s.find("format"); f != s.end() && v.is_string() && f->get<std::string>() == "cif-document") {
        try {
            (void)parse_cif(v.get<std::string>());
        } catch (const Error& err) {
            out.push_back({path, "format", fmt::format("not a parseable CIF: {}", to_string(err.code()))});
        }
    }
    if (v.is_object()) {
        const auto props = s.find("properties");
        if (auto r = s.find("required"); r != s.end())
            for (const auto& name : *r)
                if (!v.contains(name.get<std::string>()))
                    out.push_back({path + "." + name.get<std::string>(), "required", "missing required field"});
        const auto extra = s.find("additionalProperties");
        for (const auto& [key, sub] : v.items()) {
            const std::string sub_path = path + "." + key;
            if (props != s.end() && props->contains(key)) {
                check_value((*props)[key], sub, sub_path, out);
            } else if (extra != s.end()) {
                if (extra->is_boolean()) {
                    if (!extra->get<bool>()) out.push_back({sub_path, "additionalProperties", "unexpected field"});
                } else {
                    check_value(*extra, sub, sub_path, out);
                }
            }
        }
    }
    if (v.is_array())
        if (auto items = s.find("items"); items != s.end())
            for (std::size_t i = 0; i < v.size(); ++i) check_value(*items, v[i], fmt::format("{}[{}]", path, i), out);
}

}  // namespace

std::vector<Violation> validate_schema(const json& schema) {
    std::vector<Violation> out;
    check_schema(schema, "$", out);
    return out;
}

std::vector<Violation> validate_args(const json& schema, const json& args) {
    std::vector<Violation> out;
    check_value(schema, args, "$", out);
    return out;
}

json to_json(const ToolSchema& s) {
    return {{"name", s.name}, {"description", s.description}, {"inputSchema", s.parameters}, {"exclusive", s.exclusive}};
}

json to_json(const ToolResult& r) {
    json j;
    j["content"] = r.content;
    j["isError"] = r.is_error;
    j["diagnostics"] = {{"stdout", r.stdout_text}, {"stderr", r.stderr_text}};
    return j;
}

void Registry::register_tool(ToolSchema schema, Handler handler) {
    if (schema.name.empty()) throw Error(ErrorCode::InvalidSchema, "tool name is empty");
    if (tools_.count(schema.name)) throw Error(ErrorCode::DuplicateName, "tool already registered: " + schema.name);
    if (const auto v = validate_schema(schema.parameters); !v.empty())
        throw Error(ErrorCode::InvalidSchema, fmt::format("{}: {} at {}", schema.name, v.front().message, v.front().path));
    if (!handler) throw Error(ErrorCode::InvalidSchema, schema.name + ": missing handler");
    Entry e{schema, std::move(handler), schema.exclusive ? std::make_shared<std::mutex>() : nullptr};
    order_.push_back(schema.name);
    tools_.emplace(schema.name, std::move(e));
}

std::vector<ToolSchema> Registry::list() const {
    std::vector<ToolSchema> out;
    for (const auto& name : order_) out.push_back(tools_.at(name).schema);
    return out;
}

const ToolSchema* Registry::find(const std::string& name) const {
    auto it = tools_.find(name);
    return it == tools_.end() ? nullptr : &it->second.schema;
}

namespace {

ToolResult make_result(const json& id, const json& payload, ToolContext& ctx) {
    ToolResult r;
    r.id = id;
    r.payload = payload;
    r.content = json::array({{{"type", "json"}, {"json", payload}},
                             {{"type", "text"}, {"text", payload.dump(-1, ' ', false, json::error_handler_t::replace)}}});
    r.stdout_text = ctx.out.str();
    r.stderr_text = ctx.err.str();
    return r;
}

ToolResult make_error_result(const json& id, const std::string& message, ToolContext* ctx) {
    ToolResult r;
    r.id = id;
    r.is_error = true;
    r.content = json::array({{{"type", "text"}, {"text", message}}});
    if (ctx) r.stdout_text = ctx->out.str();
    r.stderr_text = ctx ? ctx->err.str() : std::string{};
    if (!r.stderr_text.empty() && r.stderr_text.back() != '\n') r.stderr_text += '\n';
    r.stderr_text += message;
    return r;
}

}  // namespace

CallOutcome Registry::call(const ToolCall& call, std::chrono::milliseconds timeout) const {
    CallOutcome outcome;
    auto it = tools_.find(call.name);
    if (it == tools_.end()) {
        outcome.error = ProtocolError{kMethodNotFound, "tool not found: " + call.name, json(nullptr)};
        return outcome;
    }
    const Entry& entry = it->second;
    if (auto v = validate_args(entry.schema.parameters, call.arguments); !v.empty()) {
        json list = json::array();
        for (const auto& x : v) list.push_back(to_json(x));
        outcome.error = ProtocolError{kInvalidParams, "invalid params", {{"violations", list}}};
        return outcome;
    }

    struct State {
        std::promise<ToolResult> promise;
        ToolContext ctx;
    };
    auto state = std::make_shared<State>();
    auto future = state->promise.get_future();
    std::thread worker([state, handler = entry.handler, lock = entry.lock, args = call.arguments, id = call.id] {
        ToolResult result;
        try {
            std::unique_lock<std::mutex> guard;
            if (lock) guard = std::unique_lock<std::mutex>(*lock);
            const json payload = handler(args, state->ctx);
            result = make_result(id, payload, state->ctx);
        } catch (const Error& e) {
            result = make_error_result(id, e.what(), &state->ctx);
        } catch (const std::exception& e) {
            result = make_error_result(id, std::string("internal failure: ") + e.what(), &state->ctx);
        } catch (...) {
            result = make_error_result(id, "internal failure", &state->ctx);
        }
        state->promise.set_value(std::move(result));
    });
    if (future.wait_for(timeout) == std::future_status::ready) {
        worker.join();
        outcome.result = future.get();
    } else {
        state->ctx.cancelled->store(true);
        worker.detach();
        outcome.result = make_error_result(
            call.id, fmt::format("timeout: {} exceeded {} ms", call.name, timeout.count()), nullptr);
    }
    return outcome;
}

Server::Server(const Registry& registry, ServerOptions opt) : registry_(registry), opt_(opt) {}

namespace {

json rpc_error(const json& id, int code, const std::string& message, const json& data = nullptr) {
    json err = {{"code", code}, {"message", message}};
    if (!data.is_null()) err["data"] = data;
    return {{"jsonrpc", "2.0"}, {"id", id}, {"error", err}};
}

json rpc_result(const json& id, json result) { return {{"jsonrpc", "2.0"}, {"id", id}, {"result", std::move(result)}}; }

bool valid_id(const json& id) { return id.is_string() || id.is_number() || id.is_null(); }

std::string dump_safe(const json& j) { return j.dump(-1, ' ', false, json::error_handler_t::replace); }

}  // namespace

json Server::handle_request(const json& req) const {
    if (!req.is_object()) return rpc_error(nullptr, kInvalidRequest, "request must be an object");
    const bool notification = !req.contains("id");
    const json id = notification ? json(nullptr) : req["id"];
    if (!valid_id(id)) return rpc_error(nullptr, kInvalidRequest, "id must be a string, number or null");
    if (!req.contains("jsonrpc") || req["jsonrpc"] != "2.0")
        return rpc_error(id, kInvalidRequest, "jsonrpc must be \"2.0\"");
    if (!req.contains("method") || !req["method"].is_string())
        return rpc_error(id, kInvalidRequest, "method must be a string");
    const std::string method = req["method"].get<std::string>();
    const json params = req.contains("params") ? req["params"] : json::object();
    if (!params.is_object() && !params.is_array()) return rpc_error(id, kInvalidRequest, "params must be structured");

    json response;
    if (method == "initialize") {
        response = rpc_result(id, {{"protocolVersion", kProtocolVersion},
                                   {"serverInfo", {{"name", "crysflow"}, {"version", "0.1.0"}}},
                                   {"capabilities", {{"tools", json::object()}}}});
    } else if (method == "tools/list") {
        json tools = json::array();
        for (const auto& s : registry_.list()) tools.push_back(to_json(s));
        response = rpc_result(id, {{"tools", tools}});
    } else if (method == "tools/call") {
        if (!params.is_object() || !params.contains("name") || !params["name"].is_string()) {
            response = rpc_error(id, kInvalidParams, "tools/call needs a string 'name'",
                                 {{"violations", json::array({to_json(Violation{"$.name", "required", "missing tool name"})})}});
        } else {
            ToolCall call{id, params["name"].get<std::string>(), params.value("arguments", json::object())};
            const auto out = registry_.call(call, opt_.timeout);
            if (out.error)
                response = rpc_error(id, out.error->code, out.error->message, out.error->data);
            else
                response = rpc_result(id, to_json(*out.result));
        }
    } else {
        response = rpc_error(id, kMethodNotFound, "method not found: " + method);
    }
    if (notification) return nullptr;
    return response;
}

std::string Server::handle_frame(std::string_view frame) const {
    try {
        json req;
        try {
            req = json::parse(frame);
        } catch (const json::exception&) {
            return dump_safe(rpc_error(nullptr, kParseError, "parse error"));
        }
        if (req.is_array()) {
            if (req.empty()) return dump_safe(rpc_error(nullptr, kInvalidRequest, "empty batch"));
            json responses = json::array();
            for (const auto& r : req) {
                json resp = handle_request(r);
                if (!resp.is_null()) responses.push_back(std::move(resp));
            }
            return responses.empty() ? std::string{} : dump_safe(responses);
        }
        const json resp = handle_request(req);
        return resp.is_null() ? std::string{} : dump_safe(resp);
    } catch (const std::exception& e) {
        return dump_safe(rpc_error(nullptr, kInternalError, "internal error"));
    }
}

namespace {

class WorkerPool {
public:
    explicit WorkerPool(unsigned n) {
        if (n == 0) n = std::max(2u, std::thread::hardware_concurrency());
        for (unsigned i = 0; i < n; ++i) threads_.emplace_back([this] { loop(); });
    }
    ~WorkerPool() { drain(); }

    void submit(std::function<void()> job) {
        {
            std::lock_guard lk(mu_);
            jobs_.push_back(std::move(job));
        }
        cv_.notify_one();
    }

    void drain() {
        {
            std::lock_guard lk(mu_);
            if (stopping_) return;
            stopping_ = true;
        }
        cv_.notify_all();
        for (auto& t : threads_) t.join();
    }

private:
    void loop() {
        for (;;) {
            std::function<void()> job;
            {
                std::unique_lock lk(mu_);
                cv_.wait(lk, [this] { return stopping_ || !jobs_.empty(); });
                if (jobs_.empty()) return;
                job = std::move(jobs_.front());
                jobs_.pop_front();
            }
            job();
        }
    }

    std::mutex mu_;
    std::condition_variable cv_;
    std::deque<std::function<void()>> jobs_;
    std::vector<std::thread> threads_;
    bool stopping_ = false;
};

}  // namespace

void serve_stdio(const Server& server, std::istream& in, std::ostream& out) {
    std::mutex out_mu;
    WorkerPool pool(server.options().workers);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        pool.submit([&server, &out, &out_mu, frame = std::move(line)] {
            const std::string resp = server.handle_frame(frame);
            if (resp.empty()) return;
            std::lock_guard lk(out_mu);
            out << resp << '\n';
            out.flush();
        });
        line.clear();
    }
    pool.drain();
}

struct HttpServer::Impl {
    httplib::Server http;
};

HttpServer::HttpServer(const Server& server, const std::string& host, int port, std::string path)
    : impl_(std::make_unique<Impl>()) {
    impl_->http.Post(path, [&server](const httplib::Request& req, httplib::Response& res) {
        const std::string body = server.handle_frame(req.body);
        if (body.empty()) {
            res.status = 204;
            return;
        }
        res.set_content(body, "application/json");
    });
    if (port == 0) {
        port_ = impl_->http.bind_to_any_port(host);
    } else {
        port_ = impl_->http.bind_to_port(host, port) ? port : -1;
    }
    if (port_ <= 0) throw Error(ErrorCode::BindFailure, fmt::format("cannot bind {}:{}", host, port));
}

HttpServer::~HttpServer() { stop(); }

void HttpServer::start() {
    thread_ = std::thread([this] { impl_->http.listen_after_bind(); });
    impl_->http.wait_until_ready();
}

void HttpServer::run() { impl_->http.listen_after_bind(); }

void HttpServer::stop() {
    impl_->http.stop();
    if (thread_.joinable()) thread_.join();
}

}  // namespace crysflow::mcp

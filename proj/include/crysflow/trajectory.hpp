#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

namespace crysflow {

using json = nlohmann::ordered_json;

enum class SegmentKind { Think, ToolCall, Observation, Answer, Prose };

std::string_view to_string(SegmentKind k) noexcept;
SegmentKind segment_kind_from(std::string_view s);

struct TaggedSegment {
    SegmentKind kind = SegmentKind::Prose;
    std::string text;        // body without the tags
    std::size_t position = 0;  // index within the turn
    std::size_t begin = 0;   // byte span in the raw text, tags included
    std::size_t end = 0;
};

/// One tool invocation as emitted by the executor, with the outcome of each
/// verification layer. A call is valid only if all three layers pass.
struct ToolCallRecord {
    std::string id;
    std::string name;
    json arguments = json::object();
    bool parsed = false;
    bool registered = false;
    bool schema_valid = false;
    std::vector<std::string> violations;

    [[nodiscard]] bool valid() const noexcept { return parsed && registered && schema_valid; }
};

struct ObservationRecord {
    std::string call_id;
    bool is_error = false;
    json content = json::array();
    std::string stdout_text;
    std::string stderr_text;
};

struct TokenRecord {
    std::string token;
    std::optional<double> logprob;
    std::vector<std::pair<std::string, double>> top;  // (token, logprob)
};

enum class Role { Executor, Reasoner, Observation };

std::string_view to_string(Role r) noexcept;
Role role_from(std::string_view s);

struct Turn {
    Role role = Role::Executor;
    int iteration = 0;
    std::string raw;
    std::vector<TaggedSegment> segments;
    std::vector<ToolCallRecord> calls;
    std::vector<ObservationRecord> observations;
    std::vector<std::string> violations;
    std::vector<TokenRecord> tokens;
    std::optional<std::string> decision;  // reasoner turns only
};

enum class RunStatus { Running, Terminated, Forced };

std::string_view to_string(RunStatus s) noexcept;

struct Trajectory {
    std::string query;
    std::string config_digest;
    std::vector<Turn> turns;
    RunStatus status = RunStatus::Running;
    std::string answer;
    int iterations = 0;
};

json to_json(const Trajectory& t);

/// Throws UnreadableTrajectory on any structural problem.
Trajectory trajectory_from_json(const json& j);
Trajectory read_trajectory(const std::string& path);

/// Serialises, writes to path + ".tmp", then renames over `path`.
void write_trajectory_atomic(const Trajectory& t, const std::string& path);

std::string dump_stable(const json& j);

}  // namespace crysflow

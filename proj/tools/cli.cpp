#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "crysflow/agent.hpp"
#include "crysflow/cif.hpp"
#include "crysflow/entropy.hpp"
#include "crysflow/error.hpp"
#include "crysflow/funnel.hpp"
#include "crysflow/hull.hpp"
#include "crysflow/lab.hpp"
#include "crysflow/match.hpp"
#include "crysflow/mcp.hpp"
#include "crysflow/reward.hpp"

namespace crysflow::cli {

namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spill(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
    out << text;
    if (!out) throw Error(ErrorCode::Io, "write failed: " + path);
}

std::string base_dir_of(const std::string& path) {
    const auto parent = fs::path(path).parent_path();
    return parent.empty() ? "." : parent.string();
}

std::string num(double v) { return fmt::format("{:.10g}", v); }

CrystalStructure load_cif(const std::string& path) {
    try {
        return parse_cif(slurp(path));
    } catch (const Error& e) {
        if (e.code() == ErrorCode::Io) throw;
        throw Error(e.code(), path + ": " + e.what());
    }
}

struct Context {
    std::istream& in;
    std::ostream& out;
    std::string format = "text";

    [[nodiscard]] bool json_out() const { return format == "json"; }
    void emit(const json& j) const { out << dump_stable(j); }
};

}  // namespace

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
    CLI::App app{"crysflow: crystal screening toolchain and tool-using agent runtime", "crysflow"};
    app.require_subcommand(1);
    Context ctx{in, out};
    app.add_option("--format", ctx.format, "Output format")->check(CLI::IsMember({"text", "json"}));

    std::function<void()> action;

    // cif
    auto* cif = app.add_subcommand("cif", "Parse, validate and rewrite CIF files");
    cif->require_subcommand(1);
    std::string cif_path;
    double min_dist = kDefaultMinDist;
    auto* cif_validate = cif->add_subcommand("validate", "Parse a CIF and check interatomic distances");
    cif_validate->add_option("file", cif_path, "CIF file")->required();
    cif_validate->add_option("--min-dist", min_dist, "Minimum distance in Å");
    cif_validate->callback([&] {
        action = [&] {
            const auto s = load_cif(cif_path);
            const auto rep = validate_geometry(s, min_dist);
            const auto comp = composition_of(s);
            json bad = json::array();
            for (const auto& p : rep.offending) bad.push_back({{"i", p.i}, {"j", p.j}, {"distance", p.distance}});
            if (ctx.json_out()) {
                ctx.emit({{"valid", rep.valid},
                          {"formula", comp.formula()},
                          {"reduced_formula", comp.reduced_formula()},
                          {"sites", s.size()},
                          {"volume", s.lattice().volume()},
                          {"offending", bad}});
            } else {
                out << "valid=" << (rep.valid ? "true" : "false") << "\n"
                    << "formula=" << comp.reduced_formula() << "\n"
                    << "sites=" << s.size() << "\n"
                    << "volume=" << num(s.lattice().volume()) << "\n";
                for (const auto& p : rep.offending)
                    out << fmt::format("overlap {} {} {:.6f}\n", p.i, p.j, p.distance);
            }
            if (!rep.valid)
                throw Error(ErrorCode::InvalidStructure,
                            fmt::format("{} site pair(s) closer than {} Å", rep.offending.size(), min_dist));
        };
    });
    std::string convert_out;
    auto* cif_convert = cif->add_subcommand("convert", "Rewrite a CIF in canonical form");
    cif_convert->add_option("file", cif_path, "CIF file")->required();
    cif_convert->add_option("--out", convert_out, "Output path (default stdout)");
    cif_convert->callback([&] {
        action = [&] {
            const std::string text = write_cif(load_cif(cif_path));
            if (convert_out.empty())
                out << text;
            else
                spill(convert_out, text);
        };
    });

    // match
    auto* match = app.add_subcommand("match", "Decide whether two structures are equivalent");
    std::string match_a, match_b;
    MatchTolerances tol;
    match->add_option("a", match_a, "First CIF")->required();
    match->add_option("b", match_b, "Second CIF")->required();
    match->add_option("--stol", tol.site_tol, "Site tolerance (fraction of (V/n)^(1/3))");
    match->add_option("--ltol", tol.lattice_tol, "Fractional lattice-length tolerance");
    match->add_option("--atol", tol.angle_tol, "Angle tolerance in degrees");
    match->callback([&] {
        action = [&] {
            const auto r = structures_match(load_cif(match_a), load_cif(match_b), tol);
            if (ctx.json_out()) {
                json mapping = json::array();
                for (const auto& [i, j] : r.mapping) mapping.push_back({i, j});
                ctx.emit({{"match", r.matched}, {"mapping", mapping}});
            } else {
                out << "match=" << (r.matched ? "true" : "false") << "\n";
            }
        };
    });

    // hull
    auto* hull = app.add_subcommand("hull", "Phase diagrams from an entry list");
    hull->require_subcommand(1);
    std::string entries_path, target;
    std::optional<double> target_energy;
    auto* hull_build = hull->add_subcommand("build", "List elements and stable entries");
    hull_build->add_option("--entries", entries_path, "Entry file: id formula energy_per_atom")->required();
    hull_build->callback([&] {
        action = [&] {
            const PhaseDiagram pd(read_entries_file(entries_path));
            if (ctx.json_out()) {
                json e = json::array();
                for (const auto& x : pd.entries())
                    e.push_back({{"id", x.id},
                                 {"formula", x.composition.reduced_formula()},
                                 {"energy_per_atom", x.energy_per_atom},
                                 {"energy_above_hull", pd.energy_above_hull(x)},
                                 {"stable", pd.is_stable(x.id)}});
                ctx.emit({{"elements", pd.elements()}, {"stable", pd.stable_ids()}, {"entries", e}});
            } else {
                out << "elements=" << fmt::format("{}", fmt::join(pd.elements(), ",")) << "\n";
                for (const auto& x : pd.entries())
                    out << fmt::format("{} {} {} {}\n", x.id, x.composition.reduced_formula(),
                                       num(pd.energy_above_hull(x)), pd.is_stable(x.id) ? "stable" : "unstable");
            }
        };
    });
    auto add_target = [&](CLI::App* sub) {
        sub->add_option("--entries", entries_path, "Entry file: id formula energy_per_atom")->required();
        sub->add_option("--target", target, "Entry id or formula")->required();
        sub->add_option("--energy", target_energy, "Energy per atom of a new query point at the target formula");
    };
    auto* hull_ehull = hull->add_subcommand("ehull", "Energy above hull in eV/atom");
    add_target(hull_ehull);
    hull_ehull->callback([&] {
        action = [&] {
            const auto entries = read_entries_file(entries_path);
            const PhaseDiagram pd(entries);
            const auto q = resolve_target(entries, target, target_energy);
            const double e = pd.energy_above_hull(q);
            if (ctx.json_out())
                ctx.emit({{"target", q.id}, {"energy_above_hull", e}});
            else
                out << num(e) << "\n";
        };
    });
    auto* hull_decompose = hull->add_subcommand("decompose", "Hull phases and atom fractions at the target");
    add_target(hull_decompose);
    hull_decompose->callback([&] {
        action = [&] {
            const auto entries = read_entries_file(entries_path);
            const PhaseDiagram pd(entries);
            const auto q = resolve_target(entries, target, target_energy);
            const auto phases = pd.decomposition(q);
            if (ctx.json_out()) {
                json p = json::array();
                for (const auto& [idx, frac] : phases) p.push_back({{"id", pd.entries()[idx].id}, {"fraction", frac}});
                ctx.emit({{"target", q.id}, {"phases", p}});
            } else {
                for (const auto& [idx, frac] : phases) out << pd.entries()[idx].id << " " << num(frac) << "\n";
            }
        };
    });

    // screen
    auto* screen = app.add_subcommand("screen", "Run the seven-stage screening funnel");
    std::string screen_config, screen_in, screen_refs, screen_out, novelty_db;
    bool screen_serial = false;
    screen->add_option("--config", screen_config, "Key-value config file");
    screen->add_option("--in", screen_in, "Directory of CIF files with optional .meta sidecars")->required();
    screen->add_option("--refs", screen_refs, "Reference entry file for the stability hull")->required();
    screen->add_option("--out", screen_out, "Report file (default stdout)");
    screen->add_option("--novelty-db", novelty_db, "Directory of known structures (overrides screen.reference_db)");
    screen->add_flag("--serial", screen_serial, "Use the serial reference kernels");
    screen->callback([&] {
        action = [&] {
            screen::FunnelConfig cfg;
            if (!screen_config.empty())
                cfg = screen::FunnelConfig::from_config(KvConfig::load(screen_config), base_dir_of(screen_config));
            if (!novelty_db.empty()) cfg.reference_db = screen::load_structures(novelty_db);
            const auto corpus = screen::load_corpus(screen_in);
            const auto refs = read_entries_file(screen_refs);
            const auto report = screen_serial ? screen::run_funnel_serial(corpus, refs, cfg)
                                              : screen::run_funnel(corpus, refs, cfg);
            std::string text;
            if (ctx.json_out() || !screen_out.empty()) {
                text = dump_stable(screen::to_json(report));
            } else {
                for (const auto& s : report.stages) {
                    text += fmt::format("stage {} {:<12} in={} out={}", s.stage, s.name, s.in, s.out);
                    for (const auto& [why, n] : s.reasons) text += fmt::format(" {}={}", why, n);
                    text += "\n";
                }
                text += fmt::format("survivors={}\n", report.survivors.size());
                for (const auto& id : report.survivors) text += id + "\n";
            }
            if (screen_out.empty())
                out << text;
            else
                spill(screen_out, text);
        };
    });

    // nrr
    auto* nrr = app.add_subcommand("nrr", "Electrochemical NH3 metrics");
    nrr->require_subcommand(1);
    lab::ElectrolysisRun run_args;
    auto* nrr_yield = nrr->add_subcommand("yield", "NH3 yield in µg h^-1 mg^-1");
    nrr_yield->add_option("--c", run_args.c_nh3, "NH3 concentration, µg/mL")->required();
    nrr_yield->add_option("--volume", run_args.volume, "Catholyte volume, mL")->required();
    nrr_yield->add_option("--mass", run_args.mass_cat, "Catalyst mass, mg")->required();
    nrr_yield->add_option("--duration", run_args.duration, "Electrolysis time, h")->required();
    nrr_yield->callback([&] {
        action = [&] {
            const double y = lab::nh3_yield(run_args);
            if (ctx.json_out())
                ctx.emit({{"yield", y}, {"unit", "ug h^-1 mg^-1"}});
            else
                out << num(y) << "\n";
        };
    });
    auto* nrr_fe = nrr->add_subcommand("fe", "Faradaic efficiency (text output in percent)");
    nrr_fe->add_option("--c", run_args.c_nh3, "NH3 concentration, µg/mL")->required();
    nrr_fe->add_option("--volume", run_args.volume, "Catholyte volume, mL")->required();
    nrr_fe->add_option("--charge", run_args.charge, "Passed charge, C")->required();
    nrr_fe->callback([&] {
        action = [&] {
            const double fe = lab::faradaic_efficiency(run_args);
            if (ctx.json_out())
                ctx.emit({{"faradaic_efficiency", fe}});
            else
                out << num(fe * 100.0) << "%\n";
        };
    });
    double e_sce = 0.0, ph = 0.0;
    auto* nrr_rhe = nrr->add_subcommand("rhe", "Convert a potential from SCE to RHE");
    nrr_rhe->add_option("--e-sce", e_sce, "Potential vs SCE, V")->required()->allow_extra_args(false);
    nrr_rhe->add_option("--ph", ph, "Electrolyte pH")->required();
    nrr_rhe->callback([&] {
        action = [&] {
            const double v = lab::to_rhe(e_sce, ph);
            if (ctx.json_out())
                ctx.emit({{"e_rhe", v}});
            else
                out << num(v) << "\n";
        };
    });

    // mcp
    auto* mcp_cmd = app.add_subcommand("mcp", "Tool server");
    mcp_cmd->require_subcommand(1);
    auto* serve = mcp_cmd->add_subcommand("serve", "Serve the tool registry over stdio or HTTP");
    std::string http_addr, mcp_config;
    serve->add_option("--http", http_addr, "host:port for HTTP POST on /rpc (default: stdio)");
    serve->add_option("--config", mcp_config, "Key-value config (mcp.timeout_ms, mcp.workers, mcp.endpoint.<tool>)");
    serve->callback([&] {
        action = [&] {
            mcp::ServerOptions opt;
            std::map<std::string, std::string> endpoints;
            if (!mcp_config.empty()) {
                const auto cfg = KvConfig::load(mcp_config);
                opt.timeout = std::chrono::milliseconds(cfg.get_int("mcp.timeout_ms", opt.timeout.count()));
                opt.workers = static_cast<unsigned>(cfg.get_int("mcp.workers", 0));
                endpoints = cfg.with_prefix("mcp.endpoint.");
            }
            const auto registry = mcp::default_registry(endpoints);
            const mcp::Server server(registry, opt);
            if (http_addr.empty()) {
                mcp::serve_stdio(server, in, out);
                return;
            }
            const auto colon = http_addr.rfind(':');
            if (colon == std::string::npos) throw Error(ErrorCode::BadConfig, "--http expects host:port");
            int port = 0;
            try {
                port = std::stoi(http_addr.substr(colon + 1));
            } catch (const std::exception&) {
                throw Error(ErrorCode::BadConfig, "--http expects host:port");
            }
            mcp::HttpServer http(server, http_addr.substr(0, colon), port);
            std::cerr << "listening on " << http_addr.substr(0, colon) << ":" << http.port() << "/rpc\n";
            http.run();
        };
    });

    // agent
    auto* agent_cmd = app.add_subcommand("agent", "Executor/reasoner agent loop");
    agent_cmd->require_subcommand(1);
    auto* agent_run = agent_cmd->add_subcommand("run", "Run one query to completion");
    std::string query, agent_config, backend_spec, agent_out;
    agent_run->add_option("--query", query, "User query")->required();
    agent_run->add_option("--config", agent_config, "Key-value config file");
    agent_run->add_option("--backend", backend_spec, "scripted:<fixture> for both nodes (overrides config)");
    agent_run->add_option("--out", agent_out, "Trajectory file")->required();
    agent_run->callback([&] {
        action = [&] {
            KvConfig cfg;
            std::string base = ".";
            if (!agent_config.empty()) {
                cfg = KvConfig::load(agent_config);
                base = base_dir_of(agent_config);
            }
            auto acfg = agent::AgentConfig::from_config(cfg, base);
            std::shared_ptr<agent::Backend> executor, reasoner;
            if (!backend_spec.empty()) {
                if (backend_spec.rfind("scripted:", 0) != 0)
                    throw Error(ErrorCode::BadConfig, "--backend expects scripted:<fixture>");
                std::shared_ptr<agent::Backend> b = agent::ScriptedBackend::load(backend_spec.substr(9));
                executor = reasoner = b;
                acfg.digest_source += "backend = " + backend_spec + "\n";
            } else {
                executor = agent::backend_from_config(cfg, "executor", base);
                reasoner = agent::backend_from_config(cfg, "reasoner", base);
            }
            const auto registry = mcp::default_registry(cfg.with_prefix("mcp.endpoint."));
            const auto t = agent::run_agent(query, *executor, *reasoner, registry, acfg, agent_out);
            if (ctx.json_out())
                ctx.emit({{"status", to_string(t.status)}, {"iterations", t.iterations}, {"answer", t.answer},
                          {"trajectory", agent_out}});
            else
                out << "status=" << to_string(t.status) << "\niterations=" << t.iterations << "\nanswer=" << t.answer
                    << "\n";
        };
    });

    // reward
    auto* reward_cmd = app.add_subcommand("reward", "Trajectory reward");
    reward_cmd->require_subcommand(1);
    auto* score = reward_cmd->add_subcommand("score", "Score a persisted trajectory");
    std::string traj_path, reward_config, reward_out;
    score->add_option("--trajectory", traj_path, "Trajectory file")->required();
    score->add_option("--config", reward_config, "Key-value config file");
    score->add_option("--out", reward_out, "Breakdown file (default stdout)");
    score->callback([&] {
        action = [&] {
            reward::RewardConfig rc;
            if (!reward_config.empty()) rc = reward::RewardConfig::from_config(KvConfig::load(reward_config));
            const auto b = reward::score(read_trajectory(traj_path), rc);
            const auto j = reward::to_json(b, rc);
            if (!reward_out.empty()) spill(reward_out, dump_stable(j));
            if (ctx.json_out()) {
                if (reward_out.empty()) ctx.emit(j);
            } else {
                out << fmt::format("total={:.6f}\nr_turns={:.6f}\nr_think={:.6f}\nr_format={:.6f}\nr_syntax={:.6f}\n",
                                   b.total, b.r_turns, b.r_think, b.r_format, b.r_syntax);
            }
        };
    });

    // entropy
    auto* entropy_cmd = app.add_subcommand("entropy", "Token-entropy analytics");
    entropy_cmd->require_subcommand(1);
    auto* analyze = entropy_cmd->add_subcommand("analyze", "Entropy trace of a trajectory or token-record stream");
    std::string entropy_in, kde_out;
    std::optional<double> bandwidth;
    analyze->add_option("--in", entropy_in, "Trajectory file or one-record-per-line token stream")->required();
    analyze->add_option("--kde", kde_out, "Write the entropy KDE as a two-column table");
    analyze->add_option("--bandwidth", bandwidth, "KDE bandwidth (default Silverman)");
    analyze->callback([&] {
        action = [&] {
            const std::string text = slurp(entropy_in);
            std::vector<entropy::TokenStep> steps;
            std::vector<entropy::SegmentSpan> spans;
            std::string truncation = "explicit";
            const json whole = json::parse(text, nullptr, false);
            if (!whole.is_discarded() && whole.is_object() && whole.contains("turns")) {
                const auto tok = entropy::tokens_from_trajectory(trajectory_from_json(whole));
                steps = tok.steps;
                spans = tok.segments;
                truncation = "top-k with tail bucket";
            } else {
                std::istringstream lines(text);
                steps = entropy::read_token_stream(lines);
            }
            const auto tr = entropy::trace(steps, spans);
            if (!kde_out.empty()) {
                entropy::KdeOptions opt;
                opt.bandwidth = bandwidth;
                spill(kde_out, entropy::kde_table(entropy::kde(tr.entropies, opt)));
            }
            if (ctx.json_out()) {
                ctx.emit(entropy::to_json(tr, truncation));
            } else {
                out << fmt::format("tokens={}\nmean={:.6f}\n", tr.entropies.size(), tr.mean);
                for (const auto& [kind, m] : tr.segment_means) out << fmt::format("{}_mean={:.6f}\n", to_string(kind), m);
            }
        };
    });

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::Success&) {
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        const CLI::App* failing = &app;
        for (auto* sub = app.get_subcommands().empty() ? nullptr : app.get_subcommands().front(); sub;
             sub = sub->get_subcommands().empty() ? nullptr : sub->get_subcommands().front())
            failing = sub;
        err << failing->help();
        return kExitUsage;
    }

    try {
        if (action) action();
        return kExitOk;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitDomain;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitDomain;
    }
}

}  // namespace crysflow::cli


#include <fmt/format.h>

#include "crysflow/cif.hpp"
#include "crysflow/error.hpp"
#include "crysflow/funnel.hpp"
#include "crysflow/hull.hpp"
#include "crysflow/lab.hpp"
#include "crysflow/match.hpp"
#include "crysflow/mcp.hpp"

// Last: resolv.h (via httplib) defines _res, which Eigen uses as a name.
#include <httplib.h>

namespace crysflow::mcp {

namespace {

json obj(std::initializer_list<std::pair<const std::string, json>> props, std::vector<std::string> required) {
    json p = json::object();
    for (const auto& [k, v] : props) p[k] = v;
    return {{"type", "object"}, {"properties", p}, {"required", required}, {"additionalProperties", false}};
}

const json kCif = {{"type", "string"}, {"format", "cif-document"}};
const json kPositive = {{"type", "number"}, {"minimum", 0}};
const json kNumber = {{"type", "number"}};
const json kEntries = {{"type", "array"},
                       {"items",
                        {{"type", "object"},
                         {"properties", {{"id", {{"type", "string"}}}, {"formula", {{"type", "string"}}}, {"energy_per_atom", {{"type", "number"}}}}},
                         {"required", {"formula", "energy_per_atom"}},
                         {"additionalProperties", false}}}};
const json kTolerances = {{"site_tol", kPositive}, {"lattice_tol", kPositive}, {"angle_tol", kPositive}};

MatchTolerances tolerances(const json& a) {
    MatchTolerances t;
    t.site_tol = a.value("site_tol", t.site_tol);
    t.lattice_tol = a.value("lattice_tol", t.lattice_tol);
    t.angle_tol = a.value("angle_tol", t.angle_tol);
    t.validate();
    return t;
}

json lattice_json(const Lattice& l) {
    return {{"a", l.a}, {"b", l.b}, {"c", l.c}, {"alpha", l.alpha}, {"beta", l.beta}, {"gamma", l.gamma}};
}

std::vector<HullEntry> entries_from(const json& arr) {
    std::vector<HullEntry> out;
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const auto& e = arr[i];
        const auto formula = e.at("formula").get<std::string>();
        out.push_back({e.value("id", formula), Composition::parse(formula), e.at("energy_per_atom").get<double>()});
    }
    return out;
}

HullEntry target_from(const std::vector<HullEntry>& entries, const json& a) {
    std::optional<double> energy;
    if (a.contains("energy_per_atom")) energy = a["energy_per_atom"].get<double>();
    return resolve_target(entries, a.at("target").get<std::string>(), energy);
}

json parse_tool(const json& a, ToolContext&) {
    const auto s = parse_cif(a.at("cif").get<std::string>());
    json sites = json::array();
    for (const auto& site : s.sites())
        sites.push_back({{"species", site.species},
                         {"frac", {site.frac.x(), site.frac.y(), site.frac.z()}},
                         {"occupancy", site.occupancy}});
    const auto comp = composition_of(s);
    return {{"formula", comp.formula()},
            {"reduced_formula", comp.reduced_formula()},
            {"lattice", lattice_json(s.lattice())},
            {"volume", s.lattice().volume()},
            {"space_group", s.space_group ? json(*s.space_group) : json(nullptr)},
            {"sites", sites}};
}

json geometry_tool(const json& a, ToolContext&) {
    const auto s = parse_cif(a.at("cif").get<std::string>());
    const auto rep = validate_geometry(s, a.value("min_dist", kDefaultMinDist));
    json bad = json::array();
    for (const auto& p : rep.offending) bad.push_back({{"i", p.i}, {"j", p.j}, {"distance", p.distance}});
    return {{"valid", rep.valid}, {"offending", bad}};
}

json match_tool(const json& a, ToolContext&) {
    const auto x = parse_cif(a.at("cif_a").get<std::string>());
    const auto y = parse_cif(a.at("cif_b").get<std::string>());
    const auto r = structures_match(x, y, tolerances(a));
    json mapping = json::array();
    for (const auto& [i, j] : r.mapping) mapping.push_back({i, j});
    return {{"match", r.matched}, {"mapping", mapping}};
}

json dedupe_tool(const json& a, ToolContext&) {
    std::vector<CrystalStructure> pool;
    for (const auto& c : a.at("cifs")) pool.push_back(parse_cif(c.get<std::string>()));
    if (pool.empty()) throw Error(ErrorCode::EmptyInput, "dedupe needs at least one structure");
    const auto d = dedupe(pool, tolerances(a));
    return {{"groups", d.groups}, {"representatives", d.representatives}};
}

json build_tool(const json& a, ToolContext&) {
    const PhaseDiagram pd(entries_from(a.at("entries")));
    return {{"elements", pd.elements()}, {"stable", pd.stable_ids()}};
}

json ehull_tool(const json& a, ToolContext&) {
    const auto entries = entries_from(a.at("entries"));
    const PhaseDiagram pd(entries);
    const auto target = target_from(entries, a);
    return {{"target", target.id}, {"energy_above_hull", pd.energy_above_hull(target)}};
}

json decomposition_tool(const json& a, ToolContext&) {
    const auto entries = entries_from(a.at("entries"));
    const PhaseDiagram pd(entries);
    const auto target = target_from(entries, a);
    json phases = json::array();
    for (const auto& [idx, frac] : pd.decomposition(target)) {
        const auto& e = pd.entries()[idx];
        phases.push_back({{"id", e.id}, {"formula", e.composition.reduced_formula()}, {"fraction", frac}});
    }
    return {{"target", target.id}, {"phases", phases}};
}

json vegard_tool(const json& a, ToolContext&) {
    std::vector<std::pair<Lattice, double>> members;
    for (const auto& m : a.at("end_members")) {
        const auto& l = m.at("lattice");
        members.emplace_back(Lattice{l.at("a").get<double>(), l.at("b").get<double>(), l.at("c").get<double>(),
                                     l.at("alpha").get<double>(), l.at("beta").get<double>(), l.at("gamma").get<double>()},
                             m.at("fraction").get<double>());
    }
    return {{"lattice", lattice_json(vegard_lattice(members))}};
}

screen::Candidate candidate_from(const json& c, std::size_t index) {
    screen::Candidate cand{c.value("id", fmt::format("candidate-{}", index)), parse_cif(c.at("cif").get<std::string>()),
                           std::nullopt, std::nullopt};
    if (c.contains("energy_per_atom")) cand.energy_per_atom = c["energy_per_atom"].get<double>();
    if (c.contains("bandgap")) cand.bandgap = c["bandgap"].get<double>();
    return cand;
}

json screen_filters_tool(const json& a, ToolContext&) {
    const screen::FunnelConfig cfg;
    const auto c = candidate_from(a, 0);
    json stages = json::array();
    auto add = [&](int stage, const char* name, const screen::Verdict& v) {
        stages.push_back({{"stage", stage}, {"name", name}, {"pass", v.pass}, {"reason", v.reason}});
    };
    add(1, "composition", screen::stage1_composition(c, cfg));
    add(2, "valence", screen::stage2_valence(c, cfg));
    add(4, "geometry", screen::stage4_geometry(c, cfg));
    if (c.bandgap) add(6, "bandgap", screen::stage6_bandgap(c, cfg));
    return {{"stages", stages}};
}

json funnel_tool(const json& a, ToolContext&) {
    screen::FunnelConfig cfg;
    if (a.contains("reference_cifs"))
        for (const auto& c : a["reference_cifs"]) cfg.reference_db.push_back(parse_cif(c.get<std::string>()));
    std::vector<screen::Candidate> corpus;
    const auto& cands = a.at("candidates");
    for (std::size_t i = 0; i < cands.size(); ++i) corpus.push_back(candidate_from(cands[i], i));
    const auto refs = entries_from(a.at("references"));
    return screen::to_json(screen::run_funnel(corpus, refs, cfg));
}

json yield_tool(const json& a, ToolContext&) {
    lab::ElectrolysisRun r;
    r.c_nh3 = a.at("c_nh3").get<double>();
    r.volume = a.at("volume").get<double>();
    r.mass_cat = a.at("mass_cat").get<double>();
    r.duration = a.at("duration").get<double>();
    return {{"yield", lab::nh3_yield(r)}, {"unit", "ug h^-1 mg^-1"}};
}

json fe_tool(const json& a, ToolContext&) {
    lab::ElectrolysisRun r;
    r.c_nh3 = a.at("c_nh3").get<double>();
    r.volume = a.at("volume").get<double>();
    r.charge = a.at("charge").get<double>();
    return {{"faradaic_efficiency", lab::faradaic_efficiency(r)}};
}

json rhe_tool(const json& a, ToolContext&) {
    return {{"e_rhe", lab::to_rhe(a.at("e_sce").get<double>(), a.at("ph").get<double>())}};
}

}  // namespace

void register_builtin_tools(Registry& r) {
    const json cif_only = obj({{"cif", kCif}}, {"cif"});
    r.register_tool({"parse_cif", "Parse a CIF document and report lattice, sites and composition.", cif_only}, parse_tool);
    r.register_tool({"check_geometry", "Flag site pairs closer than min_dist under periodic images.",
                     obj({{"cif", kCif}, {"min_dist", kPositive}}, {"cif"})},
                    geometry_tool);
    {
        json props = {{"cif_a", kCif}, {"cif_b", kCif}};
        props.update(kTolerances);
        json schema = {{"type", "object"}, {"properties", props}, {"required", {"cif_a", "cif_b"}}, {"additionalProperties", false}};
        r.register_tool({"structures_match", "Decide whether two structures are equivalent within tolerances.", schema},
                        match_tool);
    }
    {
        json props = {{"cifs", {{"type", "array"}, {"items", kCif}}}};
        props.update(kTolerances);
        json schema = {{"type", "object"}, {"properties", props}, {"required", {"cifs"}}, {"additionalProperties", false}};
        r.register_tool({"dedupe", "Group structures by equivalence, first occurrence leading each group.", schema},
                        dedupe_tool);
    }
    r.register_tool({"build_diagram", "Build a phase diagram and list its stable entries.",
                     obj({{"entries", kEntries}}, {"entries"})},
                    build_tool);
    const json target_schema =
        obj({{"entries", kEntries}, {"target", {{"type", "string"}}}, {"energy_per_atom", kNumber}}, {"entries", "target"});
    r.register_tool({"energy_above_hull", "Energy above the lower hull in eV/atom for an entry id or formula.", target_schema},
                    ehull_tool);
    r.register_tool({"decomposition", "Hull phases and atom fractions at the target composition.", target_schema},
                    decomposition_tool);
    {
        const json lat = obj({{"a", kPositive}, {"b", kPositive}, {"c", kPositive}, {"alpha", kPositive},
                              {"beta", kPositive}, {"gamma", kPositive}},
                             {"a", "b", "c", "alpha", "beta", "gamma"});
        const json member = obj({{"lattice", lat}, {"fraction", {{"type", "number"}, {"minimum", 0}, {"maximum", 1}}}},
                                {"lattice", "fraction"});
        r.register_tool({"vegard_lattice", "Fraction-weighted lattice parameters of a solid solution.",
                         obj({{"end_members", {{"type", "array"}, {"items", member}}}}, {"end_members"})},
                        vegard_tool);
    }
    r.register_tool({"screen_filters", "Per-candidate screening filters: composition, valence, geometry and bandgap.",
                     obj({{"cif", kCif}, {"id", {{"type", "string"}}}, {"energy_per_atom", kNumber}, {"bandgap", kNumber}},
                         {"cif"})},
                    screen_filters_tool);
    {
        const json cand = obj({{"id", {{"type", "string"}}}, {"cif", kCif}, {"energy_per_atom", kNumber}, {"bandgap", kNumber}},
                              {"cif"});
        r.register_tool({"run_funnel", "Run the seven-stage screening funnel over inline candidates.",
                         obj({{"candidates", {{"type", "array"}, {"items", cand}}},
                              {"references", kEntries},
                              {"reference_cifs", {{"type", "array"}, {"items", kCif}}}},
                             {"candidates", "references"})},
                        funnel_tool);
    }
    r.register_tool({"nrr_yield", "NH3 yield in ug h^-1 mg_cat^-1.",
                     obj({{"c_nh3", kPositive}, {"volume", kPositive}, {"mass_cat", kPositive}, {"duration", kPositive}},
                         {"c_nh3", "volume", "mass_cat", "duration"})},
                    yield_tool);
    r.register_tool({"nrr_faradaic_efficiency", "Faradaic efficiency of NH3 formation as a fraction.",
                     obj({{"c_nh3", kPositive}, {"volume", kPositive}, {"charge", kPositive}}, {"c_nh3", "volume", "charge"})},
                    fe_tool);
    r.register_tool({"nrr_to_rhe", "Convert a potential from the SCE to the RHE scale.",
                     obj({{"e_sce", kNumber}, {"ph", kNumber}}, {"e_sce", "ph"})},
                    rhe_tool);
}

std::size_t builtin_tool_count() {
    Registry r;
    register_builtin_tools(r);
    return r.size();
}

namespace {

struct ExternalSpec {
    const char* name;
    const char* description;
    json schema;
};

std::vector<ExternalSpec> external_specs() {
    const json query = obj({{"query", {{"type", "string"}}}, {"limit", {{"type", "integer"}, {"minimum", 1}, {"maximum", 100}}}},
                           {"query"});
    const json cif_only = obj({{"cif", kCif}}, {"cif"});
    return {
        {"web_search", "Adapter slot: web search.", query},
        {"literature_search", "Adapter slot: literature mining.", query},
        {"materials_database", "Adapter slot: materials database lookup by formula.",
         obj({{"formula", {{"type", "string"}}}}, {"formula"})},
        {"generate_structures", "Adapter slot: generative structure model.",
         obj({{"elements", {{"type", "array"}, {"items", {{"type", "string"}}}}},
              {"count", {{"type", "integer"}, {"minimum", 1}, {"maximum", 100000}}}},
             {"elements"})},
        {"predict_properties", "Adapter slot: machine-learned energy and bandgap predictor.", cif_only},
        {"first_principles", "Adapter slot: first-principles calculation.", cif_only},
    };
}

}  // namespace

std::vector<std::string> external_tool_names() {
    std::vector<std::string> out;
    for (const auto& s : external_specs()) out.emplace_back(s.name);
    return out;
}

void register_external_tools(Registry& r, const std::map<std::string, std::string>& endpoints) {
    for (auto& spec : external_specs()) {
        const std::string name = spec.name;
        const auto ep = endpoints.find(name);
        Handler h;
        if (ep == endpoints.end()) {
            h = [name](const json& args, ToolContext& ctx) -> json {
                ctx.err << name << ": no endpoint configured, stub response\n";
                return {{"tool", name}, {"stub", true}, {"arguments", args}, {"results", json::array()}};
            };
        } else {
            const std::string url = ep->second;
            h = [name, url](const json& args, ToolContext& ctx) -> json {
                // url is scheme://host[:port]/path
                const auto scheme_end = url.find("://");
                const auto path_start = url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
                const std::string base = path_start == std::string::npos ? url : url.substr(0, path_start);
                const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);
                httplib::Client cli(base);
                cli.set_read_timeout(std::chrono::seconds(110));
                auto res = cli.Post(path, args.dump(), "application/json");
                if (!res) throw Error(ErrorCode::BackendUnavailable, fmt::format("{}: {} unreachable", name, base));
                if (res->status / 100 != 2)
                    throw Error(ErrorCode::BackendUnavailable, fmt::format("{}: HTTP {}", name, res->status));
                ctx.out << res->body.size() << " bytes from " << base << '\n';
                try {
                    return json::parse(res->body);
                } catch (const json::exception&) {
                    return {{"text", res->body}};
                }
            };
        }
        r.register_tool({name, spec.description, spec.schema}, std::move(h));
    }
}

Registry default_registry(const std::map<std::string, std::string>& endpoints) {
    Registry r;
    register_builtin_tools(r);
    register_external_tools(r, endpoints);
    return r;
}

}  // namespace crysflow::mcp

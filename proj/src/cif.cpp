#include "crysflow/cif.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <map>
#include <optional>
#include <vector>

#include <fmt/format.h>

#include "crysflow/elements.hpp"
#include "crysflow/error.hpp"

namespace crysflow {

namespace {

enum class TokKind { Data, Loop, Tag, Value };

struct Token {
    TokKind kind;
    std::string text;
};

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::vector<Token> tokenize(std::string_view text) {
    std::vector<Token> out;
    std::size_t i = 0;
    bool line_start = true;
    const std::size_t n = text.size();
    while (i < n) {
        const char ch = text[i];
        if (ch == '\n') {
            line_start = true;
            ++i;
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(ch))) {
            ++i;
            continue;
        }
        if (ch == '#') {
            while (i < n && text[i] != '\n') ++i;
            continue;
        }
        if (ch == ';' && line_start) {
            // Semicolon text field runs until a line starting with ';'.
            std::size_t end = text.find("\n;", i);
            std::size_t body_start = i + 1;
            if (end == std::string_view::npos) end = n;
            std::string body(text.substr(body_start, end - body_start));
            while (!body.empty() && (body.front() == '\n' || body.front() == '\r')) body.erase(body.begin());
            while (!body.empty() && (body.back() == '\n' || body.back() == '\r')) body.pop_back();
            out.push_back({TokKind::Value, body});
            i = end == n ? n : end + 2;
            line_start = false;
            continue;
        }
        line_start = false;
        if (ch == '\'' || ch == '"') {
            // Quote closes only when followed by whitespace or end.
            std::size_t j = i + 1;
            while (j < n) {
                if (text[j] == ch && (j + 1 == n || std::isspace(static_cast<unsigned char>(text[j + 1])))) break;
                if (text[j] == '\n') break;
                ++j;
            }
            out.push_back({TokKind::Value, std::string(text.substr(i + 1, j - i - 1))});
            i = (j < n && text[j] == ch) ? j + 1 : j;
            continue;
        }
        std::size_t j = i;
        while (j < n && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
        std::string word(text.substr(i, j - i));
        i = j;
        const std::string low = lower(word);
        if (low.rfind("data_", 0) == 0)
            out.push_back({TokKind::Data, word.substr(5)});
        else if (low == "loop_")
            out.push_back({TokKind::Loop, word});
        else if (word.front() == '_')
            out.push_back({TokKind::Tag, low});
        else
            out.push_back({TokKind::Value, word});
    }
    return out;
}

struct Block {
    std::string name;
    std::vector<std::pair<std::string, std::string>> items;  // tag -> value, file order
    std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>> loops;
};

Block read_first_block(const std::vector<Token>& toks) {
    Block block;
    std::size_t i = 0;
    while (i < toks.size() && toks[i].kind != TokKind::Data) ++i;
    if (i == toks.size()) throw Error(ErrorCode::MissingBlock, "no data_ block");
    block.name = toks[i].text;
    ++i;
    while (i < toks.size() && toks[i].kind != TokKind::Data) {
        const Token& t = toks[i];
        if (t.kind == TokKind::Tag) {
            if (i + 1 >= toks.size() || toks[i + 1].kind != TokKind::Value)
                throw Error(ErrorCode::MissingBlock, "tag " + t.text + " has no value");
            block.items.emplace_back(t.text, toks[i + 1].text);
            i += 2;
        } else if (t.kind == TokKind::Loop) {
            ++i;
            std::vector<std::string> tags;
            while (i < toks.size() && toks[i].kind == TokKind::Tag) tags.push_back(toks[i++].text);
            std::vector<std::string> values;
            while (i < toks.size() && toks[i].kind == TokKind::Value) values.push_back(toks[i++].text);
            if (tags.empty()) throw Error(ErrorCode::MissingBlock, "loop_ without tags");
            if (values.size() % tags.size() != 0)
                throw Error(ErrorCode::MissingBlock, fmt::format("loop starting {} has ragged rows", tags.front()));
            block.loops.emplace_back(std::move(tags), std::move(values));
        } else {
            ++i;  // stray value; ignore
        }
    }
    return block;
}

std::optional<std::string> find_item(const Block& b, std::initializer_list<std::string_view> names) {
    for (auto name : names)
        for (const auto& [tag, value] : b.items)
            if (tag == name) return value;
    return std::nullopt;
}

bool is_missing(std::string_view v) { return v == "." || v == "?"; }

constexpr std::string_view kCellTags[] = {"_cell_length_a", "_cell_length_b", "_cell_length_c",
                                          "_cell_angle_alpha", "_cell_angle_beta", "_cell_angle_gamma"};

bool is_space_group_tag(std::string_view tag) {
    return tag == "_symmetry_space_group_name_h-m" || tag == "_space_group_name_h-m_alt";
}

bool is_cell_tag(std::string_view tag) {
    return std::find(std::begin(kCellTags), std::end(kCellTags), tag) != std::end(kCellTags);
}

std::string quote_value(const std::string& v) {
    if (v.find('\n') != std::string::npos) return "\n;\n" + v + "\n;";
    if (v.empty()) return "''";
    const bool needs = std::any_of(v.begin(), v.end(), [](unsigned char c) { return std::isspace(c); }) ||
                       v.front() == '_' || v.front() == '\'' || v.front() == '"' || v.front() == '#' ||
                       v.front() == ';' || v.front() == '$' || v.front() == '[';
    if (!needs) return v;
    if (v.find('\'') == std::string::npos) return "'" + v + "'";
    return "\"" + v + "\"";
}

}  // namespace

double parse_cif_number(std::string_view field, std::string_view tag) {
    std::string_view body = field;
    if (auto paren = body.find('('); paren != std::string_view::npos) {
        if (body.back() != ')') throw Error(ErrorCode::BadNumber, fmt::format("{}: '{}'", tag, field));
        body = body.substr(0, paren);
    }
    double value = 0.0;
    if (!body.empty() && body.front() == '+') body.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(body.data(), body.data() + body.size(), value);
    if (body.empty() || ec != std::errc() || ptr != body.data() + body.size())
        throw Error(ErrorCode::BadNumber, fmt::format("{}: '{}'", tag, field));
    return value;
}

CrystalStructure parse_cif(std::string_view text) {
    const Block block = read_first_block(tokenize(text));

    std::array<double, 6> cell{};
    for (std::size_t k = 0; k < 6; ++k) {
        auto v = find_item(block, {kCellTags[k]});
        if (!v) throw Error(ErrorCode::MissingBlock, std::string("missing ") + std::string(kCellTags[k]));
        cell[k] = parse_cif_number(*v, kCellTags[k]);
    }
    Lattice lattice{cell[0], cell[1], cell[2], cell[3], cell[4], cell[5]};

    const std::vector<std::string>* tags = nullptr;
    const std::vector<std::string>* values = nullptr;
    for (const auto& [ltags, lvalues] : block.loops) {
        if (std::find(ltags.begin(), ltags.end(), "_atom_site_fract_x") != ltags.end()) {
            tags = &ltags;
            values = &lvalues;
            break;
        }
    }
    if (!tags) throw Error(ErrorCode::MissingBlock, "no atom-site loop with fractional coordinates");

    auto column = [&](std::string_view name) -> std::optional<std::size_t> {
        auto it = std::find(tags->begin(), tags->end(), name);
        if (it == tags->end()) return std::nullopt;
        return static_cast<std::size_t>(it - tags->begin());
    };
    const auto cx = column("_atom_site_fract_x");
    const auto cy = column("_atom_site_fract_y");
    const auto cz = column("_atom_site_fract_z");
    if (!cx || !cy || !cz) throw Error(ErrorCode::MissingBlock, "atom-site loop lacks fract_y or fract_z");
    const auto ctype = column("_atom_site_type_symbol");
    const auto clabel = column("_atom_site_label");
    const auto cocc = column("_atom_site_occupancy");
    if (!ctype && !clabel) throw Error(ErrorCode::MissingBlock, "atom-site loop has neither label nor type symbol");

    std::vector<Site> sites;
    const std::size_t width = tags->size();
    for (std::size_t row = 0; row * width < values->size(); ++row) {
        auto cell_at = [&](std::size_t col) -> const std::string& { return (*values)[row * width + col]; };
        const std::string& raw = ctype && !is_missing(cell_at(*ctype)) ? cell_at(*ctype) : cell_at(*clabel);
        auto species = element_from_label(raw);
        if (!species) throw Error(ErrorCode::BadElement, "cannot read an element from '" + raw + "'");
        // A type symbol must be an element up to its charge suffix.
        if (ctype && !is_missing(cell_at(*ctype))) {
            const std::string& ts = cell_at(*ctype);
            std::string_view rest = std::string_view(ts).substr(species->size());
            const bool ok = rest.empty() ||
                            std::all_of(rest.begin(), rest.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)) || c == '+' || c == '-'; });
            if (!ok) throw Error(ErrorCode::BadElement, "unknown type symbol '" + ts + "'");
        }
        Site site;
        site.species = *species;
        site.frac = Vec3(parse_cif_number(cell_at(*cx), "_atom_site_fract_x"),
                         parse_cif_number(cell_at(*cy), "_atom_site_fract_y"),
                         parse_cif_number(cell_at(*cz), "_atom_site_fract_z"));
        if (cocc && !is_missing(cell_at(*cocc))) site.occupancy = parse_cif_number(cell_at(*cocc), "_atom_site_occupancy");
        sites.push_back(std::move(site));
    }
    if (sites.empty()) throw Error(ErrorCode::MissingBlock, "atom-site loop is empty");

    CrystalStructure s(lattice, std::move(sites), block.name.empty() ? std::nullopt : std::optional(block.name));
    for (const auto& [tag, value] : block.items) {
        if (is_cell_tag(tag)) continue;
        if (is_space_group_tag(tag)) {
            if (!s.space_group) s.space_group = value;
            continue;
        }
        s.extra_tags.emplace_back(tag, value);
    }
    return s;
}

std::string write_cif(const CrystalStructure& s) {
    std::string out = fmt::format("data_{}\n", s.label().value_or("crysflow"));
    out += fmt::format("_symmetry_space_group_name_H-M   {}\n", quote_value(s.space_group.value_or("P 1")));
    const auto& l = s.lattice();
    out += fmt::format("_cell_length_a   {:.10f}\n", l.a);
    out += fmt::format("_cell_length_b   {:.10f}\n", l.b);
    out += fmt::format("_cell_length_c   {:.10f}\n", l.c);
    out += fmt::format("_cell_angle_alpha   {:.10f}\n", l.alpha);
    out += fmt::format("_cell_angle_beta   {:.10f}\n", l.beta);
    out += fmt::format("_cell_angle_gamma   {:.10f}\n", l.gamma);
    for (const auto& [tag, value] : s.extra_tags) out += fmt::format("{}   {}\n", tag, quote_value(value));

    const bool partial = std::any_of(s.sites().begin(), s.sites().end(), [](const Site& x) { return x.occupancy < 1.0; });
    out += "loop_\n_atom_site_label\n_atom_site_type_symbol\n_atom_site_fract_x\n_atom_site_fract_y\n_atom_site_fract_z\n";
    if (partial) out += "_atom_site_occupancy\n";
    std::map<std::string, int> counters;
    for (const auto& site : s.sites()) {
        const int idx = ++counters[site.species];
        out += fmt::format("{}{} {} {:.10f} {:.10f} {:.10f}", site.species, idx, site.species, site.frac[0], site.frac[1],
                           site.frac[2]);
        if (partial) out += fmt::format(" {:.10f}", site.occupancy);
        out += '\n';
    }
    return out;
}

}  // namespace crysflow

#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "crysflow/cif.hpp"
#include "crysflow/error.hpp"
#include "crysflow/funnel.hpp"
#include "crysflow/kvconfig.hpp"
#include "fixtures.hpp"
#include "generators.hpp"
#include "oracles.hpp"

using namespace crysflow;
using screen::Candidate;
using screen::FunnelConfig;

namespace {

Candidate make(const std::string& id, CrystalStructure s, std::optional<double> e = -1.0,
               std::optional<double> gap = 1.37) {
    return {id, std::move(s), e, gap};
}

CrystalStructure from_counts(const testing::Counts& counts, std::uint64_t seed = 1) {
    testing::Rng rng(seed);
    return testing::random_structure(rng, counts, {0, 1});
}

std::map<std::string, long> counts_of(const std::string& formula) {
    std::map<std::string, long> out;
    for (const auto& [el, n] : Composition::parse(formula).amounts()) out[el] = std::lround(n);
    return out;
}

}  // namespace

TEST_SUITE("funnel") {
    TEST_CASE("stage 1 composition rules") {
        const FunnelConfig cfg;
        const auto cov = make("a", parse_cif(read_fixture("cif/cov4s8.cif")));
        CHECK(screen::stage1_composition(cov, cfg).pass);
        const auto two = make("b", from_counts({{"Fe", 1}, {"Co", 1}, {"V", 2}, {"S", 4}}));
        CHECK(screen::stage1_composition(two, cfg).reason == "extra-element");
        const auto oxide = make("c", from_counts({{"Fe", 1}, {"V", 2}, {"O", 4}}));
        CHECK(screen::stage1_composition(oxide, cfg).reason == "missing-required");
        const auto none = make("d", from_counts({{"V", 1}, {"S", 2}}));
        CHECK(screen::stage1_composition(none, cfg).reason == "missing-choice");
    }

    TEST_CASE("valence examples") {
        const auto table = screen::default_oxidation_table();
        CHECK_FALSE(screen::valence_feasible(counts_of("V2Fe6S4"), table));
        CHECK(screen::valence_feasible(counts_of("CoV4S8"), table));
        CHECK(screen::valence_feasible(counts_of("FeV2S4"), table));
        CHECK_FALSE(testing::valence_exhaustive(counts_of("V2Fe6S4"), table));
        CHECK(testing::valence_exhaustive(counts_of("CoV4S8"), table));
    }

    TEST_CASE("valence DP agrees with exhaustive search on small formulas") {
        const auto table = screen::default_oxidation_table();
        for (const std::string m : {"Fe", "Co", "Ni"})
            for (long a = 1; a <= 6; ++a)
                for (long v = 1; v <= 6; ++v)
                    for (long s = 1; s <= 8; ++s) {
                        const std::map<std::string, long> c{{m, a}, {"V", v}, {"S", s}};
                        CHECK(screen::valence_feasible(c, table) == testing::valence_exhaustive(c, table));
                    }
    }

    TEST_CASE("integer counts") {
        const auto c = screen::integer_counts(Composition::parse("Fe2V4S8"));
        CHECK(c.at("Fe") == 1);
        CHECK(c.at("V") == 2);
        CHECK(c.at("S") == 4);
        const auto half = screen::integer_counts(Composition({{"Fe", 0.5}, {"V", 1}, {"S", 2}}));
        CHECK(half.at("Fe") == 1);
        CHECK(half.at("S") == 4);
        try {
            (void)screen::integer_counts(Composition({{"Fe", std::sqrt(2.0) - 1.0}, {"V", 1}, {"S", 2}}));
            FAIL("expected NonIntegerComposition");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::NonIntegerComposition);
        }
    }

    TEST_CASE("stage 2 verdicts") {
        const FunnelConfig cfg;
        CHECK(screen::stage2_valence(make("a", parse_cif(read_fixture("cif/cov4s8.cif"))), cfg).pass);
        CHECK(screen::stage2_valence(make("b", from_counts({{"Fe", 6}, {"V", 2}, {"S", 4}})), cfg).reason ==
              "charge-imbalance");
        auto s = from_counts({{"Fe", 1}, {"V", 2}, {"S", 4}});
        auto sites = s.sites();
        sites[0].occupancy = std::sqrt(2.0) - 1.0;
        CHECK(screen::stage2_valence(make("c", CrystalStructure(s.lattice(), sites)), cfg).reason == "indeterminate");
    }

    TEST_CASE("stage 5 threshold is inclusive") {
        const auto es = read_entries_file(fixture_path("lizrcl.entries"));
        const PhaseDiagram pd(es);
        const auto s = from_counts({{"Li", 2}, {"Zr", 1}, {"Cl", 6}});
        FunnelConfig cfg;
        CHECK(screen::stage5_stability(make("gap28", s, -1.912), pd, cfg).reason == "above-hull");
        CHECK(screen::stage5_stability(make("gap25", s, -1.915), pd, cfg).pass);
        CHECK(screen::stage5_stability(make("on", s, -1.94), pd, cfg).pass);
        CHECK(screen::stage5_stability(make("none", s, std::nullopt), pd, cfg).reason == "missing-energy");
        const auto fvs = make("fvs", from_counts({{"Fe", 1}, {"V", 2}, {"S", 4}}));
        CHECK(screen::stage5_stability(fvs, pd, cfg).reason == "missing-reference");
    }

    TEST_CASE("stage 6 window is strict") {
        const FunnelConfig cfg;
        const auto s = from_counts({{"Fe", 1}, {"V", 2}, {"S", 4}});
        CHECK(screen::stage6_bandgap(make("a", s, -1, 1.37), cfg).pass);
        CHECK(screen::stage6_bandgap(make("b", s, -1, 0.0), cfg).reason == "out-of-window");
        CHECK(screen::stage6_bandgap(make("c", s, -1, 2.0), cfg).reason == "out-of-window");
        CHECK(screen::stage6_bandgap(make("d", s, -1, std::nullopt), cfg).reason == "missing-bandgap");
    }

    TEST_CASE("single passing candidate") {
        const FunnelConfig cfg;
        const auto refs = testing::fvs_references();
        auto s = from_counts({{"Fe", 1}, {"V", 2}, {"S", 4}});
        const double hull = testing::brute_force_hull_energy(refs, composition_of(s));
        const std::vector<Candidate> corpus{make("only", s, hull, 1.37)};
        const auto rep = screen::run_funnel(corpus, refs, cfg);
        REQUIRE(rep.stages.size() == 7);
        for (const auto& st : rep.stages) {
            CHECK(st.in == 1);
            CHECK(st.out == 1);
        }
        CHECK(rep.survivors == std::vector<std::string>{"only"});
    }

    TEST_CASE("novelty stage") {
        const auto refs = testing::fvs_references();
        auto s = from_counts({{"Fe", 1}, {"V", 2}, {"S", 4}});
        const double hull = testing::brute_force_hull_energy(refs, composition_of(s));
        const std::vector<Candidate> corpus{make("c", s, hull, 1.0)};
        FunnelConfig cfg;
        cfg.reference_db.push_back(s);
        CHECK(screen::run_funnel(corpus, refs, cfg).rejections.at("c") == "7:known");
    }

    TEST_CASE("empty corpus and duplicate ids") {
        const FunnelConfig cfg;
        const auto refs = testing::fvs_references();
        try {
            (void)screen::run_funnel(std::vector<Candidate>{}, refs, cfg);
            FAIL("expected EmptyInput");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::EmptyInput);
        }
        const auto s = from_counts({{"Fe", 1}, {"V", 2}, {"S", 4}});
        const std::vector<Candidate> dup{make("x", s), make("x", s)};
        try {
            (void)screen::run_funnel(dup, refs, cfg);
            FAIL("expected DuplicateName");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::DuplicateName);
        }
    }

    TEST_CASE("small generated corpus follows its bookkeeping") {
        testing::FunnelPlan plan{100, 10, 20, 2, 15, 9, 23, 1, 15, 1, 1, 3};
        const auto corpus = testing::funnel_corpus(99, plan);
        FunnelConfig cfg;
        cfg.reference_db = corpus.known;
        const auto rep = screen::run_funnel(corpus.candidates, corpus.references, cfg);
        const auto ser = screen::run_funnel_serial(corpus.candidates, corpus.references, cfg);
        CHECK(dump_stable(screen::to_json(rep)) == dump_stable(screen::to_json(ser)));
        for (std::size_t i = 0; i < 7; ++i) {
            CHECK(rep.stages[i].in == corpus.expected_in[i]);
            CHECK(rep.stages[i].out == corpus.expected_out[i]);
        }
        CHECK(rep.rejections == corpus.expected_rejection);
        CHECK(rep.survivors == corpus.expected_survivors);
    }

    TEST_CASE("config and directory loading") {
        const auto kv = KvConfig::load(fixture_path("lizrcl.conf"));
        const auto cfg = FunnelConfig::from_config(kv, CRYSFLOW_FIXTURES);
        CHECK(cfg.required_elements == std::set<std::string>{"Zr", "Cl"});
        CHECK(cfg.choice_elements == std::set<std::string>{"Li"});
        CHECK(cfg.oxidation.at("Zr") == std::vector<int>{4});

        const auto dir = std::filesystem::temp_directory_path() / "crysflow_corpus_test";
        std::filesystem::remove_all(dir);
        std::filesystem::create_directories(dir);
        std::filesystem::copy_file(fixture_path("cif/cov4s8.cif"), dir / "b.cif");
        std::filesystem::copy_file(fixture_path("cif/po.cif"), dir / "a.cif");
        std::ofstream(dir / "b.meta") << "id = cov\nenergy_per_atom = -0.4\nbandgap = 1.37\n";
        const auto cands = screen::load_corpus(dir.string());
        REQUIRE(cands.size() == 2);
        CHECK(cands[0].id == "a");
        CHECK_FALSE(cands[0].energy_per_atom);
        CHECK(cands[1].id == "cov");
        CHECK(*cands[1].bandgap == doctest::Approx(1.37));
        std::filesystem::remove_all(dir);
    }
}

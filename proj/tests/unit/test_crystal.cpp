#include <doctest.h>

#include <cmath>

#include "crysflow/cif.hpp"
#include "crysflow/crystal.hpp"
#include "crysflow/error.hpp"
#include "fixtures.hpp"
#include "generators.hpp"

using namespace crysflow;

namespace {

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("no error thrown");
    return ErrorCode::Io;
}

// Brute-force minimum image distance over {-2..2}^3 translations.
double image_oracle(const CrystalStructure& s, std::size_t i, std::size_t j) {
    const Mat3 m = s.lattice().matrix();
    double best = 1e300;
    for (int a = -2; a <= 2; ++a)
        for (int b = -2; b <= 2; ++b)
            for (int c = -2; c <= 2; ++c) {
                if (i == j && a == 0 && b == 0 && c == 0) continue;
                const Vec3 d = m * (s.sites()[j].frac + Vec3(a, b, c) - s.sites()[i].frac);
                best = std::min(best, d.norm());
            }
    return best;
}

}  // namespace

TEST_SUITE("crystal") {
    TEST_CASE("minimal cubic CIF parses") {
        const auto s = parse_cif(read_fixture("cif/po.cif"));
        CHECK(s.size() == 1);
        CHECK(s.lattice().volume() == doctest::Approx(3.35 * 3.35 * 3.35).epsilon(1e-12));
        CHECK(s.lattice().volume() == doctest::Approx(37.595).epsilon(1e-4));
        REQUIRE(s.space_group);
        CHECK(*s.space_group == "P m -3 m");
    }

    TEST_CASE("shared anion site keeps three species records") {
        const auto s = parse_cif(read_fixture("cif/halide_mixed.cif"));
        double occ = 0.0;
        int shared = 0;
        for (const auto& site : s.sites())
            if ((site.frac - Vec3(0.5, 0, 0)).norm() < 1e-9) {
                ++shared;
                occ += site.occupancy;
            }
        CHECK(shared == 3);
        CHECK(occ == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(validate_geometry(s).valid);
        const auto comp = composition_of(s);
        CHECK(comp.amount("Br") == doctest::Approx(0.4));
    }

    TEST_CASE("missing atom loop is a MissingBlock") {
        CHECK(code_of([] { (void)parse_cif(read_fixture("cif/no_atoms.cif")); }) == ErrorCode::MissingBlock);
    }

    TEST_CASE("uncertainty suffix is stripped") {
        CHECK(parse_cif_number("3.35(2)", "_cell_length_a") == doctest::Approx(3.35));
        CHECK(code_of([] { (void)parse_cif_number("abc", "_cell_length_a"); }) == ErrorCode::BadNumber);
    }

    TEST_CASE("unknown element is rejected") {
        std::string text = read_fixture("cif/po.cif");
        text.replace(text.find("Po1 Po"), 6, "Xx1 Xx");
        CHECK(code_of([&] { (void)parse_cif(text); }) == ErrorCode::BadElement);
    }

    TEST_CASE("write then parse round-trips") {
        testing::Rng rng(7);
        for (int k = 0; k < 10; ++k) {
            auto s = testing::perturb(testing::random_structure(rng, {{"Fe", 1}, {"V", 2}, {"S", 4}}, {k % 3, 2}), rng);
            const auto back = parse_cif(write_cif(s));
            REQUIRE(back.size() == s.size());
            const auto p0 = s.lattice().params();
            const auto p1 = back.lattice().params();
            for (int i = 0; i < 6; ++i) CHECK(p1[i] == doctest::Approx(p0[i]).epsilon(1e-6));
            for (std::size_t i = 0; i < s.size(); ++i) {
                CHECK(back.sites()[i].species == s.sites()[i].species);
                CHECK((back.sites()[i].frac - s.sites()[i].frac).norm() < 1e-6);
                CHECK(back.sites()[i].occupancy == doctest::Approx(s.sites()[i].occupancy));
            }
        }
    }

    TEST_CASE("partial occupancy is written out") {
        const auto s = CrystalStructure(Lattice::cubic(4.0), {{"Fe", {0, 0, 0}, 0.4}, {"S", {0.5, 0.5, 0.5}, 1.0}});
        CHECK(write_cif(s).find("_atom_site_occupancy") != std::string::npos);
    }

    TEST_CASE("minimum image distance") {
        const CrystalStructure a(Lattice::cubic(4.0), {{"Fe", {0, 0, 0}, 1.0}, {"Fe", {0.5, 0, 0}, 1.0}});
        CHECK(min_image_distance(a, 0, 1) == doctest::Approx(2.0));
        const CrystalStructure b(Lattice::cubic(4.0), {{"Fe", {0, 0, 0}, 1.0}, {"Fe", {0.9, 0, 0}, 1.0}});
        CHECK(min_image_distance(b, 0, 1) == doctest::Approx(0.4));

        testing::Rng rng(11);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int k = 0; k < 50; ++k) {
            const Lattice lat{4.0 + u(rng), 4.5 + u(rng), 5.0 + u(rng), 80.0 + 20 * u(rng), 80.0 + 20 * u(rng),
                              80.0 + 20 * u(rng)};
            const CrystalStructure s(lat, {{"Fe", {u(rng), u(rng), u(rng)}, 1.0}, {"S", {u(rng), u(rng), u(rng)}, 1.0}});
            CHECK(min_image_distance(s, 0, 1) == doctest::Approx(image_oracle(s, 0, 1)).epsilon(1e-10));
            CHECK(min_image_distance(s, 0, 0) == doctest::Approx(image_oracle(s, 0, 0)).epsilon(1e-10));
        }
    }

    TEST_CASE("geometry validation") {
        const CrystalStructure ok(Lattice::cubic(4.0), {{"Fe", {0, 0, 0}, 1.0}, {"Fe", {0.5, 0, 0}, 1.0}});
        CHECK(validate_geometry(ok, 0.5).valid);
        const CrystalStructure bad(Lattice::cubic(4.0), {{"Fe", {0, 0, 0}, 1.0}, {"Fe", {0.025, 0, 0}, 1.0}});
        const auto rep = validate_geometry(bad, 0.5);
        CHECK_FALSE(rep.valid);
        REQUIRE(rep.offending.size() == 1);
        CHECK(rep.offending[0].distance == doctest::Approx(0.1));

        testing::Rng rng(3);
        std::vector<bool> corrupted(100, false);
        for (int i = 0; i < 17; ++i) corrupted[static_cast<std::size_t>(i * 5 + 2)] = true;
        int flagged = 0;
        for (std::size_t i = 0; i < 100; ++i) {
            auto s = testing::random_structure(rng, {{"Co", 1}, {"V", 2}, {"S", 4}}, {1, 1});
            if (corrupted[i]) s = testing::with_overlap(s, rng);
            const bool invalid = !validate_geometry(s).valid;
            CHECK(invalid == corrupted[i]);
            flagged += invalid;
        }
        CHECK(flagged == 17);
    }

    TEST_CASE("vegard interpolation") {
        const Lattice one = Lattice::cubic(5.0);
        const std::vector<std::pair<Lattice, double>> single{{one, 1.0}};
        CHECK(vegard_lattice(single).a == doctest::Approx(5.0));
        const std::vector<std::pair<Lattice, double>> two{{Lattice::cubic(5.0), 0.5}, {Lattice::cubic(6.0), 0.5}};
        const auto mid = vegard_lattice(two);
        CHECK(mid.a == doctest::Approx(5.5));
        CHECK(mid.gamma == doctest::Approx(90.0));
        const std::vector<std::pair<Lattice, double>> halides{{Lattice{5.6, 5.6, 5.6, 90, 90, 90}, 0.2},
                                                              {Lattice{5.9, 5.9, 5.8, 90, 90, 90}, 0.4},
                                                              {Lattice{6.3, 6.2, 6.3, 90, 91, 90}, 0.4}};
        const auto v = vegard_lattice(halides);
        CHECK(v.a == doctest::Approx(0.2 * 5.6 + 0.4 * 5.9 + 0.4 * 6.3));
        CHECK(v.b == doctest::Approx(0.2 * 5.6 + 0.4 * 5.9 + 0.4 * 6.2));
        CHECK(v.c == doctest::Approx(0.2 * 5.6 + 0.4 * 5.8 + 0.4 * 6.3));
        CHECK(v.beta == doctest::Approx(0.2 * 90 + 0.4 * 90 + 0.4 * 91));
        const std::vector<std::pair<Lattice, double>> wrong{{one, 0.3}, {one, 0.3}};
        CHECK(code_of([&] { (void)vegard_lattice(wrong); }) == ErrorCode::BadWeights);
    }

    TEST_CASE("composition counting and reduction") {
        const auto s = parse_cif(read_fixture("cif/cov4s8.cif"));
        const auto comp = composition_of(s);
        CHECK(comp.amount("Co") == 1);
        CHECK(comp.amount("V") == 4);
        CHECK(comp.amount("S") == 8);
        CHECK(comp.reduced_formula() == "CoS8V4");
        const CrystalStructure half(Lattice::cubic(4.0), {{"Fe", {0, 0, 0}, 0.5}});
        CHECK(composition_of(half).amount("Fe") == doctest::Approx(0.5));
        const auto fvs = Composition::parse("Fe2V2S4");
        CHECK(fvs.reduced().at("Fe") == doctest::Approx(1));
        CHECK(fvs.reduced().at("S") == doctest::Approx(2));
        CHECK(fvs.same_reduced(Composition::parse("FeVS2")));
        CHECK(code_of([] { (void)Composition::parse("Fe-2"); }) == ErrorCode::BadFormula);
    }

    TEST_CASE("invalid structures are refused") {
        CHECK(code_of([] { CrystalStructure(Lattice{4, 4, 4, 90, 90, 200}, {{"Fe", {0, 0, 0}, 1.0}}); }) ==
              ErrorCode::InvalidStructure);
        CHECK(code_of([] { CrystalStructure(Lattice::cubic(4), {{"Fe", {0, 0, 0}, 1.5}}); }) ==
              ErrorCode::InvalidStructure);
    }
}

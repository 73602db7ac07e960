#include <doctest.h>

#include "crysflow/error.hpp"
#include "crysflow/lab.hpp"

using namespace crysflow;

TEST_SUITE("lab") {
    TEST_CASE("yield") {
        lab::ElectrolysisRun r{0.0, 30.0, 0.1, 2.0, 0.0, 0.0, 0.0};
        CHECK(lab::nh3_yield(r) == 0.0);
        r.c_nh3 = 0.23067;
        CHECK(lab::nh3_yield(r) == doctest::Approx(34.6).epsilon(1e-3));
        // µg = c * V, per hour per mg
        CHECK(lab::nh3_yield(r) == doctest::Approx(0.23067 * 30.0 / 2.0 / 0.1).epsilon(1e-12));
        r.mass_cat = 0.0;
        CHECK_THROWS_AS((void)lab::nh3_yield(r), Error);
    }

    TEST_CASE("faradaic efficiency") {
        lab::ElectrolysisRun r{};
        r.c_nh3 = 0.0;
        r.volume = 30.0;
        r.charge = 10.0;
        CHECK(lab::faradaic_efficiency(r) == 0.0);

        // Q equal to 3 F n(NH3) gives unit efficiency.
        r.c_nh3 = 0.2;
        const double mol = 0.2 * 30.0 * 1e-6 / lab::kNh3MolarMass;
        r.charge = 3.0 * lab::kFaraday * mol;
        CHECK(lab::faradaic_efficiency(r) == doctest::Approx(1.0).epsilon(1e-12));

        r.charge = 100.0;
        CHECK(lab::faradaic_efficiency(r) == doctest::Approx(3 * 96485.0 * 6e-6 / (17.0 * 100.0)).epsilon(1e-12));
        r.charge = 0.0;
        CHECK_THROWS_AS((void)lab::faradaic_efficiency(r), Error);
    }

    TEST_CASE("RHE conversion") {
        CHECK(lab::to_rhe(0.0, 0.0) == doctest::Approx(0.242));
        CHECK(lab::to_rhe(-0.851, 1.0) == doctest::Approx(-0.55).epsilon(1e-12));
        for (double x : {-1.2, -0.3, 0.0, 0.7})
            for (double ph : {0.0, 1.0, 7.0, 13.5}) CHECK(lab::from_rhe(lab::to_rhe(x, ph), ph) == doctest::Approx(x));
    }
}

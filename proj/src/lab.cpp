#include "crysflow/lab.hpp"

#include <cmath>
#include <string>

#include "crysflow/error.hpp"

namespace crysflow::lab {

namespace {

void require_nonnegative(double v, const char* name) {
    if (!(v >= 0.0) || !std::isfinite(v))
        throw Error(ErrorCode::BadNumber, std::string(name) + " must be a nonnegative number");
}

}  // namespace

double nh3_yield(const ElectrolysisRun& r) {
    require_nonnegative(r.c_nh3, "c_nh3");
    require_nonnegative(r.volume, "volume");
    require_nonnegative(r.mass_cat, "mass_cat");
    require_nonnegative(r.duration, "duration");
    if (r.mass_cat == 0.0 || r.duration == 0.0)
        throw Error(ErrorCode::DivisionDomain, "yield needs positive catalyst mass and duration");
    return r.c_nh3 * r.volume / (r.mass_cat * r.duration);
}

double faradaic_efficiency(const ElectrolysisRun& r) {
    require_nonnegative(r.c_nh3, "c_nh3");
    require_nonnegative(r.volume, "volume");
    require_nonnegative(r.charge, "charge");
    if (r.charge == 0.0) throw Error(ErrorCode::DivisionDomain, "Faradaic efficiency needs positive charge");
    const double grams = r.c_nh3 * r.volume * 1e-6;
    return kNh3Electrons * kFaraday * grams / (kNh3MolarMass * r.charge);
}

double to_rhe(double e_sce, double ph) noexcept { return e_sce + kNernstSlope * ph + kSceOffset; }

double from_rhe(double e_rhe, double ph) noexcept { return e_rhe - kNernstSlope * ph - kSceOffset; }

}  // namespace crysflow::lab

#pragma once

namespace crysflow::lab {

inline constexpr double kFaraday = 96485.0;       // C/mol
inline constexpr double kNh3MolarMass = 17.0;     // g/mol
inline constexpr double kNh3Electrons = 3.0;
inline constexpr double kSceOffset = 0.242;       // V
inline constexpr double kNernstSlope = 0.059;     // V per pH unit

/// Units are fixed: µg/mL, mL, mg, h, C, V.
struct ElectrolysisRun {
    double c_nh3 = 0.0;
    double volume = 0.0;
    double mass_cat = 0.0;
    double duration = 0.0;
    double charge = 0.0;
    double e_sce = 0.0;
    double ph = 0.0;
};

/// µg h^-1 mg_cat^-1. Throws DivisionDomain for zero mass or duration.
double nh3_yield(const ElectrolysisRun& r);

/// Fraction (not percent) of the passed charge that went into NH3.
double faradaic_efficiency(const ElectrolysisRun& r);

double to_rhe(double e_sce, double ph) noexcept;
double from_rhe(double e_rhe, double ph) noexcept;

}  // namespace crysflow::lab

#pragma once

#include <numbers>

namespace wavefarm {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Fluid and site constants. Defaults are the study site values.
struct Environment {
    double rho = 1025.0;   // kg/m^3
    double g = 9.81;       // m/s^2
    double depth = 50.0;   // m
};

/// Power conversion chain, operational availability, transmission.
struct Efficiencies {
    double pcc = 0.8;
    double oa = 0.95;
    double t = 0.98;

    double product() const { return pcc * oa * t; }
};

/// Maintenance clearance between devices, s_d = (R / 5) * 50 m.
inline double safe_distance(double radius) { return radius / 5.0 * 50.0; }

/// Minimum admissible center distance between two devices of radius R.
inline double min_spacing(double radius) { return 2.0 * radius + safe_distance(radius); }

}  // namespace wavefarm

#pragma once

#include <stdexcept>
#include <string>

namespace qrelax {

// 2018 CODATA value, J s.
inline constexpr double hbar_si = 1.054571817e-34;

enum class UnitMode { dimensionless, physical };

// Static problem definition for the square well quench: a particle of mass
// `mass` in a well of width `width`, expanded instantaneously by `expansion`.
//
// All internal computation uses the dimensionless convention: energies in
// units of the characteristic energy eps = hbar^2 / (2 mu L^2) and times in
// units of 1/(sigma^2 eps^2). Physical units only enter at I/O boundaries
// through the conversion helpers below.
struct WellModel {
    double mass = 1.0;        // mu
    double width = 1.0;       // L, pre-expansion
    double expansion = 2.5;   // alpha >= 1
    int truncation = 50;      // retained eigenstates, >= 2
    UnitMode units = UnitMode::dimensionless;

    void validate() const {
        if (!(mass > 0.0)) throw std::invalid_argument("WellModel: mass must be > 0");
        if (!(width > 0.0)) throw std::invalid_argument("WellModel: width must be > 0");
        if (!(expansion >= 1.0)) throw std::invalid_argument("WellModel: expansion must be >= 1");
        if (truncation < 2) throw std::invalid_argument("WellModel: truncation must be >= 2");
    }

    // eps = hbar^2 / (2 mu L^2); 1 in dimensionless mode.
    double characteristic_energy() const {
        if (units == UnitMode::dimensionless) return 1.0;
        return hbar_si * hbar_si / (2.0 * mass * width * width);
    }

    // 1/(sigma^2 eps^2) with sigma in the same unit system.
    double characteristic_time(double sigma) const {
        if (!(sigma > 0.0)) throw std::invalid_argument("WellModel: sigma must be > 0");
        double eps = characteristic_energy();
        return 1.0 / (sigma * sigma * eps * eps);
    }

    double to_physical_energy(double e_dimensionless) const {
        return e_dimensionless * characteristic_energy();
    }
    double from_physical_energy(double e_physical) const {
        return e_physical / characteristic_energy();
    }
    double to_physical_time(double t_dimensionless, double sigma) const {
        return t_dimensionless * characteristic_time(sigma);
    }
    double from_physical_time(double t_physical, double sigma) const {
        return t_physical / characteristic_time(sigma);
    }
};

} // namespace qrelax

#pragma once

// Stochastic relaxation of a particle in a suddenly expanded square well:
// closed-form spectral data, the exact filtering solution of the energy-based
// stochastic dynamics, a direct numerical integrator for cross-checks,
// relaxation-timescale analytics, slowly-driven (adiabatic) dynamics and a
// Monte Carlo ensemble harness.

#include "qrelax/adiabatic.hpp"
#include "qrelax/config.hpp"
#include "qrelax/csv.hpp"
#include "qrelax/ensemble.hpp"
#include "qrelax/filtering.hpp"
#include "qrelax/numerics.hpp"
#include "qrelax/relaxation.hpp"
#include "qrelax/rng.hpp"
#include "qrelax/sde.hpp"
#include "qrelax/spectrum.hpp"
#include "qrelax/units.hpp"
#include "qrelax/version.hpp"

#pragma once

// Numerical laboratory for the harmonic map heat flow into non-positively
// curved targets: discrete maps, tension and energy, explicit flow
// integration, Jacobi operator spectra, and convergence-rate verification.

#include "heatflow/artifacts.hpp"
#include "heatflow/convergence_lab.hpp"
#include "heatflow/domain_grid.hpp"
#include "heatflow/errors.hpp"
#include "heatflow/flow_engine.hpp"
#include "heatflow/jacobi_spectral.hpp"
#include "heatflow/map_calculus.hpp"
#include "heatflow/rng.hpp"
#include "heatflow/scenario.hpp"
#include "heatflow/target_geometry.hpp"

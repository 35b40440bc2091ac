#pragma once

// Pseudo-spectral simulator and verification harness for the modified
// Patlak-Keller-Segel equations on a large periodic box.

#include "mpks/config.hpp"
#include "mpks/diagnostics.hpp"
#include "mpks/drift.hpp"
#include "mpks/evolution.hpp"
#include "mpks/field.hpp"
#include "mpks/grid.hpp"
#include "mpks/heat.hpp"
#include "mpks/io.hpp"
#include "mpks/norms.hpp"
#include "mpks/poly.hpp"
#include "mpks/runner.hpp"
#include "mpks/shapes.hpp"

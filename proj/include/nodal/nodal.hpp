#pragma once

// Everything at once.

#include "nodal/errors.hpp"
#include "nodal/workers.hpp"
#include "nodal/grid.hpp"
#include "nodal/field_io.hpp"
#include "nodal/oracles.hpp"
#include "nodal/elliptic.hpp"
#include "nodal/geometry.hpp"
#include "nodal/frequency.hpp"
#include "nodal/harnack.hpp"
#include "nodal/boundary_harnack.hpp"
#include "nodal/harmonic_measure.hpp"
#include "nodal/scenarios.hpp"

#pragma once

#include "common.hpp"
#include "geometry.hpp"
#include "triangulation.hpp"
#include "fem.hpp"
#include "prox.hpp"
#include "hull.hpp"
#include "regularizer.hpp"
#include "dataterm.hpp"
#include "solver.hpp"
#include "unlift.hpp"
#include "io.hpp"
#include "synth.hpp"

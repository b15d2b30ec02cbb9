#pragma once

#include "carnot/charts.hpp"
#include "carnot/convergence.hpp"
#include "carnot/error.hpp"
#include "carnot/expr.hpp"
#include "carnot/frames.hpp"
#include "carnot/gallery.hpp"
#include "carnot/geometry.hpp"
#include "carnot/io.hpp"
#include "carnot/nilpotent.hpp"
#include "carnot/parallel.hpp"
#include "carnot/quadrature.hpp"
#include "carnot/quasimetric.hpp"
#include "carnot/sampling.hpp"
#include "carnot/transition.hpp"

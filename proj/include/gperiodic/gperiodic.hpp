#pragma once

#include "gperiodic/error.hpp"
#include "gperiodic/sparse.hpp"
#include "gperiodic/dense.hpp"
#include "gperiodic/eigensolver.hpp"
#include "gperiodic/graph.hpp"
#include "gperiodic/tube.hpp"
#include "gperiodic/cell.hpp"
#include "gperiodic/assembly.hpp"
#include "gperiodic/bounds.hpp"
#include "gperiodic/config.hpp"

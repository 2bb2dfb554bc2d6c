#pragma once

#include "kaczlab/errors.hpp"
#include "kaczlab/linalg.hpp"
#include "kaczlab/permutation.hpp"
#include "kaczlab/solver.hpp"
#include "kaczlab/analysis.hpp"
#include "kaczlab/io.hpp"

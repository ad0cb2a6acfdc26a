#pragma once

// Convenience header pulling in the whole library.

#include "fdc/ale.hpp"
#include "fdc/cart.hpp"
#include "fdc/csv.hpp"
#include "fdc/dataset.hpp"
#include "fdc/error.hpp"
#include "fdc/expression.hpp"
#include "fdc/http.hpp"
#include "fdc/linear.hpp"
#include "fdc/measures.hpp"
#include "fdc/model.hpp"
#include "fdc/pareto.hpp"
#include "fdc/predictor.hpp"
#include "fdc/rng.hpp"
#include "fdc/segmented.hpp"
#include "fdc/sweep.hpp"

#pragma once

#include "commrate/errors.hpp"
#include "commrate/specfn.hpp"
#include "commrate/typedist.hpp"
#include "commrate/preference.hpp"
#include "commrate/quadrature.hpp"
#include "commrate/market.hpp"
#include "commrate/optimize.hpp"
#include "commrate/solve.hpp"
#include "commrate/experiments.hpp"

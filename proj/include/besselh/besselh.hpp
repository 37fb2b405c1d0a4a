#pragma once

// Everything at once.

#include "besselh/bessel.hpp"
#include "besselh/conditions.hpp"
#include "besselh/error.hpp"
#include "besselh/grid.hpp"
#include "besselh/hardy.hpp"
#include "besselh/kernel.hpp"
#include "besselh/measure.hpp"
#include "besselh/quadrature.hpp"
#include "besselh/section.hpp"
#include "besselh/semigroup.hpp"

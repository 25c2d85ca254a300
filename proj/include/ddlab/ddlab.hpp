#pragma once

// Convenience umbrella: pulls in the whole library.

#include "errors.hpp"
#include "numerics.hpp"
#include "model.hpp"
#include "brownian.hpp"
#include "bessel3.hpp"
#include "numeigen.hpp"
#include "expression.hpp"
#include "passage.hpp"
#include "occupation.hpp"
#include "inversion.hpp"
#include "pricing.hpp"
#include "simulation.hpp"

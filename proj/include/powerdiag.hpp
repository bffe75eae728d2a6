#pragma once

#include "powerdiag/diagnostics.hpp"
#include "powerdiag/error.hpp"
#include "powerdiag/moments.hpp"
#include "powerdiag/pairs_csv.hpp"
#include "powerdiag/rng.hpp"
#include "powerdiag/safezone_map.hpp"
#include "powerdiag/scaling.hpp"
#include "powerdiag/text.hpp"
#include "powerdiag/zoo.hpp"

#pragma once

// Conformal test of covariate shift: everything in one include.

#include "cshift/classifiers.hpp"
#include "cshift/conformal.hpp"
#include "cshift/dataset.hpp"
#include "cshift/error.hpp"
#include "cshift/models.hpp"
#include "cshift/normal.hpp"
#include "cshift/ratio.hpp"
#include "cshift/rng.hpp"
#include "cshift/simulation.hpp"

namespace cshift {

inline constexpr const char* version() {
#ifdef CSHIFT_VERSION
    return CSHIFT_VERSION;
#else
    return "unknown";
#endif
}

}  // namespace cshift

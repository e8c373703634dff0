#pragma once

#include "cshift/models.hpp"
#include "cshift/simulation/experiment.hpp"
#include "cshift/simulation/generate.hpp"
#include "cshift/simulation/lambda_scan.hpp"
#include "cshift/simulation/metrics.hpp"
#include "cshift/simulation/resample.hpp"

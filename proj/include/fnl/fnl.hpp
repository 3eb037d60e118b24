#pragma once

// Forward-Nash laboratory: umbrella header.

#include "fnl/version.hpp"
#include "fnl/errors.hpp"
#include "fnl/log.hpp"
#include "fnl/rng.hpp"
#include "fnl/stats.hpp"
#include "fnl/measure.hpp"
#include "fnl/functionals.hpp"
#include "fnl/fields.hpp"
#include "fnl/coeffs.hpp"
#include "fnl/weights.hpp"
#include "fnl/corrections.hpp"
#include "fnl/strategy.hpp"
#include "fnl/noise.hpp"
#include "fnl/system.hpp"
#include "fnl/engine.hpp"
#include "fnl/verify.hpp"
#include "fnl/meanfield.hpp"
#include "fnl/config.hpp"
#include "fnl/report.hpp"
#include "fnl/parallel.hpp"

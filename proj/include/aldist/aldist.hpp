#pragma once

// Convenience umbrella: pulls in the whole library.

#include "aldist/distortion.hpp"
#include "aldist/instances.hpp"
#include "aldist/io.hpp"
#include "aldist/math.hpp"
#include "aldist/mle.hpp"
#include "aldist/model.hpp"
#include "aldist/policy_opt.hpp"
#include "aldist/rng.hpp"
#include "aldist/rules.hpp"
#include "aldist/verify.hpp"
#include "aldist/zero_sum.hpp"

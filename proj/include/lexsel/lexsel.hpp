#pragma once

#include "lexsel/agreement.hpp"
#include "lexsel/bleach.hpp"
#include "lexsel/common.hpp"
#include "lexsel/data.hpp"
#include "lexsel/eval.hpp"
#include "lexsel/factor.hpp"
#include "lexsel/freq.hpp"
#include "lexsel/mathx.hpp"
#include "lexsel/ordinal.hpp"
#include "lexsel/pipeline.hpp"
#include "lexsel/rng.hpp"
#include "lexsel/stats.hpp"

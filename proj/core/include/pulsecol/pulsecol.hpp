// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "pulsecol/attention.hpp"
#include "pulsecol/baselines.hpp"
#include "pulsecol/colsparse_kernel.hpp"
#include "pulsecol/dllm_sim.hpp"
#include "pulsecol/error.hpp"
#include "pulsecol/matrix.hpp"
#include "pulsecol/pattern_estimator.hpp"
#include "pulsecol/recall.hpp"
#include "pulsecol/refresh_schedule.hpp"

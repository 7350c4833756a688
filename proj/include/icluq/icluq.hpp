// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "icluq/answer.hpp"
#include "icluq/baselines.hpp"
#include "icluq/error.hpp"
#include "icluq/eval.hpp"
#include "icluq/format.hpp"
#include "icluq/gateway.hpp"
#include "icluq/metrics.hpp"
#include "icluq/prompting.hpp"
#include "icluq/rng.hpp"
#include "icluq/simulator.hpp"
#include "icluq/types.hpp"
#include "icluq/uq.hpp"

#pragma once

#include <grmf/baselines.hpp>
#include <grmf/core.hpp>
#include <grmf/error.hpp>
#include <grmf/factorizer.hpp>
#include <grmf/random.hpp>
#include <grmf/subproblem.hpp>
#include <grmf/harness/corruption.hpp>
#include <grmf/harness/io.hpp>
#include <grmf/harness/metrics.hpp>
#include <grmf/harness/synth.hpp>
#include <grmf/harness/sweep.hpp>

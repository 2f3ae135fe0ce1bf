#pragma once

#include "mol/core.hpp"
#include "mol/envs.hpp"
#include "mol/density.hpp"
#include "mol/sampling.hpp"
#include "mol/importance.hpp"
#include "mol/shaping.hpp"
#include "mol/agent.hpp"
#include "mol/harness/config.hpp"
#include "mol/harness/experiment.hpp"
#include "mol/harness/compare.hpp"
#include "mol/harness/report.hpp"

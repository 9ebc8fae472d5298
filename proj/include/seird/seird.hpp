#pragma once

#include "seird/common.hpp"
#include "seird/compartments.hpp"
#include "seird/estimation.hpp"
#include "seird/io.hpp"
#include "seird/kernel.hpp"
#include "seird/params.hpp"
#include "seird/pipeline.hpp"
#include "seird/policy.hpp"
#include "seird/rng.hpp"
#include "seird/sensitivity.hpp"

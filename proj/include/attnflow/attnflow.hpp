#pragma once

#include "attnflow/common.hpp"
#include "attnflow/fcam.hpp"
#include "attnflow/gradients.hpp"
#include "attnflow/io.hpp"
#include "attnflow/losses.hpp"
#include "attnflow/metrics.hpp"
#include "attnflow/numeric.hpp"
#include "attnflow/ode_flow.hpp"
#include "attnflow/rk4.hpp"
#include "attnflow/rng.hpp"
#include "attnflow/sdc_data.hpp"
#include "attnflow/trainer.hpp"

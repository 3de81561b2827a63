/**
 * @file pgnn.hpp
 * @brief Umbrella header.
 */

#pragma once

#include "pgnn/config_io.hpp"
#include "pgnn/dataset_io.hpp"
#include "pgnn/error.hpp"
#include "pgnn/eval.hpp"
#include "pgnn/experiment.hpp"
#include "pgnn/features.hpp"
#include "pgnn/lakegen.hpp"
#include "pgnn/net.hpp"
#include "pgnn/optim.hpp"
#include "pgnn/physics.hpp"

#pragma once

#include "biometric.hpp"
#include "core_model.hpp"
#include "error.hpp"
#include "experiment.hpp"
#include "metrics.hpp"
#include "parallel.hpp"
#include "privacy.hpp"
#include "rng.hpp"
#include "signal_features.hpp"
#include "synthgen.hpp"

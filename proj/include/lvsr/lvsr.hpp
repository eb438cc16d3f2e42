#pragma once

#include "lvsr/baselines.hpp"
#include "lvsr/bouchard.hpp"
#include "lvsr/data.hpp"
#include "lvsr/encoder.hpp"
#include "lvsr/error.hpp"
#include "lvsr/metrics.hpp"
#include "lvsr/model.hpp"
#include "lvsr/predictor.hpp"
#include "lvsr/random.hpp"
#include "lvsr/simulator.hpp"
#include "lvsr/trainer.hpp"

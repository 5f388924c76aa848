#pragma once

// Umbrella header for the CFR patch-attack library.

#include "cfr/attack.hpp"
#include "cfr/dataset.hpp"
#include "cfr/errors.hpp"
#include "cfr/grad_check.hpp"
#include "cfr/image_io.hpp"
#include "cfr/metrics.hpp"
#include "cfr/model.hpp"
#include "cfr/region.hpp"
#include "cfr/report.hpp"
#include "cfr/rng.hpp"
#include "cfr/tensor.hpp"
#include "cfr/train.hpp"

#pragma once

// Convenience umbrella for the whole library.

#include "rodeo/common.hpp"
#include "rodeo/rng.hpp"
#include "rodeo/dataset.hpp"
#include "rodeo/kernels.hpp"
#include "rodeo/loclin.hpp"
#include "rodeo/sigma.hpp"
#include "rodeo/rodeo.hpp"
#include "rodeo/variants.hpp"
#include "rodeo/harness.hpp"

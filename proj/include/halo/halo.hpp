#pragma once

#include "halo/editing.hpp"
#include "halo/error.hpp"
#include "halo/harness.hpp"
#include "halo/io.hpp"
#include "halo/matrix.hpp"
#include "halo/metrics.hpp"
#include "halo/mock.hpp"
#include "halo/pipeline.hpp"
#include "halo/rng.hpp"
#include "halo/text.hpp"
#include "halo/types.hpp"

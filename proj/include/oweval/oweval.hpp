#pragma once

// Umbrella header for the whole library.

#include "oweval/config.hpp"
#include "oweval/dataset.hpp"
#include "oweval/errors.hpp"
#include "oweval/geometry.hpp"
#include "oweval/io.hpp"
#include "oweval/matching.hpp"
#include "oweval/metrics.hpp"
#include "oweval/pipeline.hpp"
#include "oweval/pr.hpp"
#include "oweval/providers.hpp"
#include "oweval/types.hpp"
#include "oweval/vocab_merge.hpp"

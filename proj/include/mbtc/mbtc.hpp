#pragma once

// Umbrella header.

#include "ruleset.hpp"
#include "bitops.hpp"
#include "dtree.hpp"
#include "ebmap.hpp"
#include "mbtrie.hpp"
#include "rlopt.hpp"
#include "serialize.hpp"
#include "bench.hpp"

#pragma once

#include "clra/errors.hpp"
#include "clra/subspace.hpp"
#include "clra/online_sketch.hpp"
#include "clra/consistent.hpp"
#include "clra/frequent_directions.hpp"
#include "clra/streams.hpp"
#include "clra/oracle.hpp"
#include "clra/bench.hpp"

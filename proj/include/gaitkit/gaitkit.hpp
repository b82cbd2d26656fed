#pragma once

#include "gaitkit/augment.hpp"
#include "gaitkit/checkpoint.hpp"
#include "gaitkit/error.hpp"
#include "gaitkit/graph.hpp"
#include "gaitkit/io.hpp"
#include "gaitkit/model.hpp"
#include "gaitkit/quality.hpp"
#include "gaitkit/retrieval.hpp"
#include "gaitkit/rng.hpp"
#include "gaitkit/skeleton.hpp"
#include "gaitkit/stats.hpp"
#include "gaitkit/supcon.hpp"
#include "gaitkit/synth.hpp"
#include "gaitkit/tracking.hpp"
#include "gaitkit/train.hpp"

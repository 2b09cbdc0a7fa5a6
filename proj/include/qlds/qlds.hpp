#pragma once

#include "qlds/bench.hpp"
#include "qlds/data.hpp"
#include "qlds/error.hpp"
#include "qlds/json_io.hpp"
#include "qlds/loss_lab.hpp"
#include "qlds/numerics.hpp"
#include "qlds/parallel.hpp"
#include "qlds/rng.hpp"
#include "qlds/selection.hpp"
#include "qlds/self_training.hpp"
#include "qlds/solver.hpp"
#include "qlds/stats.hpp"
#include "qlds/theory.hpp"

#pragma once

#include "offmmd/checkpoint.hpp"
#include "offmmd/common.hpp"
#include "offmmd/dataset.hpp"
#include "offmmd/environment.hpp"
#include "offmmd/exact_solver.hpp"
#include "offmmd/experiment.hpp"
#include "offmmd/game.hpp"
#include "offmmd/grid.hpp"
#include "offmmd/mis.hpp"
#include "offmmd/mlp_q.hpp"
#include "offmmd/munchausen.hpp"
#include "offmmd/offline.hpp"
#include "offmmd/online.hpp"
#include "offmmd/policy.hpp"
#include "offmmd/q_function.hpp"
#include "offmmd/replay_buffer.hpp"
#include "offmmd/tabular_q.hpp"

#pragma once

#include "mcpar/bar.hpp"
#include "mcpar/config.hpp"
#include "mcpar/cost.hpp"
#include "mcpar/engine.hpp"
#include "mcpar/errors.hpp"
#include "mcpar/io.hpp"
#include "mcpar/random.hpp"
#include "mcpar/stats.hpp"
#include "mcpar/studies.hpp"
#include "mcpar/task_queue.hpp"
#include "mcpar/toy.hpp"
#include "mcpar/tridiagonal.hpp"

#pragma once

#include "errors.hpp"
#include "rng.hpp"
#include "parallel.hpp"
#include "events.hpp"
#include "efp.hpp"
#include "encoding.hpp"
#include "qubo.hpp"
#include "anneal.hpp"
#include "pimc.hpp"
#include "regress.hpp"
#include "experiment.hpp"

#pragma once

#include "casep/errors.hpp"
#include "casep/lattice.hpp"
#include "casep/rng.hpp"
#include "casep/rate_model.hpp"
#include "casep/clock.hpp"
#include "casep/coupled.hpp"
#include "casep/io.hpp"
#include "casep/profile.hpp"
#include "casep/initdata.hpp"
#include "casep/stats.hpp"
#include "casep/scaling.hpp"
#include "casep/diagnostics.hpp"
#include "casep/harness.hpp"

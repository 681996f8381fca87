#pragma once

#include "tdg/community.hpp"
#include "tdg/distribution.hpp"
#include "tdg/events.hpp"
#include "tdg/ledger.hpp"
#include "tdg/metrics.hpp"
#include "tdg/random.hpp"
#include "tdg/runner.hpp"
#include "tdg/scenario.hpp"
#include "tdg/trust.hpp"
#include "tdg/types.hpp"
#include "tdg/world.hpp"

#pragma once

#include "statefarm/adaptivity.hpp"
#include "statefarm/bench.hpp"
#include "statefarm/channel.hpp"
#include "statefarm/config.hpp"
#include "statefarm/farm.hpp"
#include "statefarm/farm_handle.hpp"
#include "statefarm/partition_map.hpp"
#include "statefarm/patterns.hpp"
#include "statefarm/perfmodel.hpp"
#include "statefarm/scheduling.hpp"
#include "statefarm/workload.hpp"

/*
 * Copyright 2026 The simpool Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License"); you
 * may not use this file except in compliance with the License.  You may
 * obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Umbrella header: the whole simulator.

#include "simpool/central_manager.hpp"
#include "simpool/config.hpp"
#include "simpool/errors.hpp"
#include "simpool/kernel.hpp"
#include "simpool/library.hpp"
#include "simpool/metrics.hpp"
#include "simpool/pool_model.hpp"
#include "simpool/provisioning.hpp"
#include "simpool/random.hpp"
#include "simpool/scenarios.hpp"
#include "simpool/sim_time.hpp"
#include "simpool/simulation.hpp"
#include "simpool/workload.hpp"

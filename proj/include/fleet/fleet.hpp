// Copyright 2026 The fleetwatch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "fleet/analytics.hpp"
#include "fleet/config.hpp"
#include "fleet/geo.hpp"
#include "fleet/link.hpp"
#include "fleet/node.hpp"
#include "fleet/scenario.hpp"
#include "fleet/service.hpp"
#include "fleet/simulation.hpp"
#include "fleet/store.hpp"
#include "fleet/telemetry.hpp"

/*
 * SPDX-FileCopyrightText: Copyright (c) 2026 the aalsim authors. All rights reserved.
 * SPDX-License-Identifier: Apache-2.0
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <string>

#include "aalsim/sim.hpp"

namespace aalsim {

// Fixed per-slot CSV columns; the compare variant prefixes a mode column.
inline constexpr const char* kReportCsvHeader =
    "slot,host_device_transfers,host_device_bytes,slot_latency_us,deadline_missed,failed";
inline constexpr const char* kCompareCsvHeader =
    "mode,slot,host_device_transfers,host_device_bytes,slot_latency_us,deadline_missed,failed";

std::string report_to_json(const MetricsReport& report);
std::string report_to_csv(const MetricsReport& report);

std::string compare_to_json(const CompareOutcome& outcome);
std::string compare_to_csv(const CompareOutcome& outcome);

}  // namespace aalsim

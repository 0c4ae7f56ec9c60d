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

#include "aalsim/report.hpp"

#include <json.hpp>

#include "aalsim/trace.hpp"

namespace aalsim {

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json report_json(const MetricsReport& r) {
    ordered_json j;
    j["schema_version"] = r.schema_version;
    j["direction"] = r.direction;
    j["mode"] = r.mode;
    j["reorder_strategy"] = r.reorder_strategy;
    j["num_slots"] = r.num_slots;
    j["seed"] = r.seed;
    j["slot_duration_us"] = r.slot_duration_us;
    j["slots"] = ordered_json::array();
    for (const SlotMetrics& m : r.slots) {
        ordered_json s;
        s["slot"] = m.slot;
        s["host_device_transfers"] = m.host_device_transfers;
        s["host_device_bytes"] = m.host_device_bytes;
        s["dl_transfers"] = m.dl_transfers;
        s["ul_transfers"] = m.ul_transfers;
        s["slot_latency_us"] = m.slot_latency_us;
        s["deadline_missed"] = m.deadline_missed;
        s["failed"] = m.failed;
        j["slots"].push_back(std::move(s));
    }
    ordered_json a;
    a["host_device_transfers"] = r.aggregate.host_device_transfers;
    a["host_device_bytes"] = r.aggregate.host_device_bytes;
    a["max_slot_latency_us"] = r.aggregate.max_slot_latency_us;
    a["mean_slot_latency_us"] = r.aggregate.mean_slot_latency_us;
    a["deadline_misses"] = r.aggregate.deadline_misses;
    a["slots_failed"] = r.aggregate.slots_failed;
    a["functional_hash"] = r.aggregate.functional_hash;
    j["aggregate"] = std::move(a);
    return j;
}

void append_csv_rows(std::string& out, const MetricsReport& r, const std::string& mode_prefix) {
    for (const SlotMetrics& m : r.slots) {
        if (!mode_prefix.empty()) out += mode_prefix + ",";
        out += std::to_string(m.slot);
        out += "," + std::to_string(m.host_device_transfers);
        out += "," + std::to_string(m.host_device_bytes);
        out += "," + fmt_double(m.slot_latency_us);
        out += m.deadline_missed ? ",true" : ",false";
        out += m.failed ? ",true" : ",false";
        out += "\n";
    }
}

}  // namespace

std::string report_to_json(const MetricsReport& report) {
    return report_json(report).dump(2) + "\n";
}

std::string report_to_csv(const MetricsReport& report) {
    std::string out = kReportCsvHeader;
    out += "\n";
    append_csv_rows(out, report, "");
    return out;
}

std::string compare_to_json(const CompareOutcome& outcome) {
    ordered_json j;
    j["schema_version"] = 1;
    j["inline"] = report_json(outcome.inline_run.report);
    j["lookaside"] = report_json(outcome.lookaside_run.report);
    j["transfer_ratio"] = outcome.transfer_ratio;
    j["outputs_match"] = outcome.outputs_match;
    return j.dump(2) + "\n";
}

std::string compare_to_csv(const CompareOutcome& outcome) {
    std::string out = kCompareCsvHeader;
    out += "\n";
    append_csv_rows(out, outcome.inline_run.report, "inline");
    append_csv_rows(out, outcome.lookaside_run.report, "lookaside");
    return out;
}

}  // namespace aalsim

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

#include "aalsim/mgmt.hpp"

#include <algorithm>
#include <cstdio>

#include "aalsim/errors.hpp"

namespace aalsim {

const char* partition_name(PartitionKind k) { return k == PartitionKind::Hard ? "hard" : "soft"; }

const char* profile_name(Profile p) {
    return p == Profile::FecLookaside ? "fec_lookaside" : "high_phy_inline";
}

const char* device_state_name(DeviceState s) {
    switch (s) {
        case DeviceState::Discovered: return "discovered";
        case DeviceState::Initialized: return "initialized";
        case DeviceState::Running: return "running";
        case DeviceState::Stopped: return "stopped";
        case DeviceState::Faulted: return "faulted";
    }
    return "?";
}

std::string FirmwareVersion::to_string() const {
    return std::to_string(major) + "." + std::to_string(minor) + "." + std::to_string(patch);
}

FirmwareVersion FirmwareVersion::parse(const std::string& s) {
    FirmwareVersion v;
    if (std::sscanf(s.c_str(), "%d.%d.%d", &v.major, &v.minor, &v.patch) != 3)
        fail(Errc::invalid_argument, "firmware version must be major.minor.patch: " + s);
    return v;
}

const std::set<std::string>& DeviceRegistry::known_config_keys() {
    static const std::set<std::string> keys = {"max_queue_depth", "capacity_units",
                                               "poll_batch_size"};
    return keys;
}

int DeviceRegistry::register_device(const HwaDescriptor& desc) {
    if (desc.num_lpus < 1) fail(Errc::invalid_argument, "device needs num_lpus >= 1");
    if (desc.supported_profiles.empty())
        fail(Errc::invalid_argument, "device needs at least one supported profile");
    std::lock_guard lk(mu_);
    if (devices_.contains(desc.device_id))
        fail(Errc::invalid_argument, "device " + std::to_string(desc.device_id) + " already registered");
    Device d;
    d.desc = desc;
    d.lpu_configs.resize(static_cast<std::size_t>(desc.num_lpus));
    devices_.emplace(desc.device_id, std::move(d));
    trace_.append("mgmt", "mgmt.register",
                  {{"device", std::to_string(desc.device_id)},
                   {"partition", partition_name(desc.partition_kind)},
                   {"lpus", std::to_string(desc.num_lpus)}});
    return desc.device_id;
}

std::vector<HwaDescriptor> DeviceRegistry::discover() const {
    std::lock_guard lk(mu_);
    std::vector<HwaDescriptor> out;
    out.reserve(devices_.size());
    for (const auto& [_, d] : devices_) out.push_back(d.desc);  // map keeps id order
    return out;
}

DeviceRegistry::Device& DeviceRegistry::dev(int device_id) {
    auto it = devices_.find(device_id);
    if (it == devices_.end())
        fail(Errc::invalid_argument, "no such device " + std::to_string(device_id));
    return it->second;
}

const DeviceRegistry::Device& DeviceRegistry::dev(int device_id) const {
    auto it = devices_.find(device_id);
    if (it == devices_.end())
        fail(Errc::invalid_argument, "no such device " + std::to_string(device_id));
    return it->second;
}

DeviceState DeviceRegistry::state(int device_id) const {
    std::lock_guard lk(mu_);
    return dev(device_id).state;
}

DeviceState DeviceRegistry::lifecycle(int device_id, LifecycleOp op,
                                      std::optional<FirmwareVersion> version) {
    std::lock_guard lk(mu_);
    Device& d = dev(device_id);
    DeviceState from = d.state;
    DeviceState to = from;
    bool legal = false;
    switch (op) {
        case LifecycleOp::Init:
            legal = from == DeviceState::Discovered;
            to = DeviceState::Initialized;
            break;
        case LifecycleOp::Start:
            legal = from == DeviceState::Initialized || from == DeviceState::Stopped;
            to = DeviceState::Running;
            break;
        case LifecycleOp::Stop:
            legal = from == DeviceState::Running;
            to = DeviceState::Stopped;
            break;
        case LifecycleOp::Reset:
            legal = from == DeviceState::Faulted;
            to = DeviceState::Initialized;  // counters survive, see reset_counters
            break;
        case LifecycleOp::Upgrade:
            legal = from == DeviceState::Stopped && version.has_value();
            to = DeviceState::Stopped;
            break;
    }
    if (!legal)
        fail(Errc::illegal_transition, std::string(device_state_name(from)) + " does not allow " +
                                           (op == LifecycleOp::Upgrade ? "upgrade" : "that operation"));
    d.state = to;
    if (op == LifecycleOp::Upgrade) {
        d.desc.firmware_version = *version;
        trace_.append("mgmt", "mgmt.upgrade",
                      {{"device", std::to_string(device_id)}, {"version", version->to_string()}});
    } else {
        trace_.append("mgmt", "mgmt.lifecycle",
                      {{"device", std::to_string(device_id)},
                       {"from", device_state_name(from)},
                       {"to", device_state_name(to)}});
    }
    return d.state;
}

void DeviceRegistry::inject_fault(int device_id, const std::string& detail) {
    std::vector<std::pair<ErrorSink, MgmtErrorEvent>> pending;
    {
        std::lock_guard lk(mu_);
        Device& d = dev(device_id);
        DeviceState from = d.state;
        d.state = DeviceState::Faulted;
        trace_.append("mgmt", "mgmt.lifecycle",
                      {{"device", std::to_string(device_id)},
                       {"from", device_state_name(from)},
                       {"to", "faulted"}});
        dispatch_error_locked(d, "fault", detail, pending);
    }
    for (auto& [sink, ev] : pending) sink(ev);
}

LpuConfig DeviceRegistry::configure_lpu(int device_id, int lpu_index, const LpuConfig& config) {
    std::lock_guard lk(mu_);
    Device& d = dev(device_id);
    if (lpu_index < 0 || lpu_index >= d.desc.num_lpus)
        fail(Errc::invalid_argument, "lpu index out of range");
    if (d.state == DeviceState::Running)
        fail(Errc::device_busy, "device is running; stop it before configuring");
    if (d.state != DeviceState::Initialized && d.state != DeviceState::Stopped)
        fail(Errc::illegal_transition,
             std::string("configuration requires initialized or stopped, device is ") +
                 device_state_name(d.state));
    // Whole-map accept/reject; a single unknown key changes nothing.
    for (const auto& [key, _] : config) {
        if (!known_config_keys().contains(key)) fail(Errc::unknown_key, "unknown config key " + key);
    }
    LpuConfig& stored = d.lpu_configs[static_cast<std::size_t>(lpu_index)];
    for (const auto& [key, value] : config) stored[key] = value;
    std::string keys;
    for (const auto& [key, _] : config) keys += (keys.empty() ? "" : ",") + key;
    trace_.append("mgmt", "mgmt.config",
                  {{"device", std::to_string(device_id)},
                   {"lpu", std::to_string(lpu_index)},
                   {"keys", keys.empty() ? "-" : keys}});
    return stored;
}

LpuConfig DeviceRegistry::lpu_config(int device_id, int lpu_index) const {
    std::lock_guard lk(mu_);
    const Device& d = dev(device_id);
    if (lpu_index < 0 || lpu_index >= d.desc.num_lpus)
        fail(Errc::invalid_argument, "lpu index out of range");
    return d.lpu_configs[static_cast<std::size_t>(lpu_index)];
}

PerfCounters DeviceRegistry::perf_counters(int device_id) const {
    std::lock_guard lk(mu_);
    return dev(device_id).counters;
}

void DeviceRegistry::reset_counters(int device_id) {
    std::lock_guard lk(mu_);
    dev(device_id).counters = PerfCounters{};
    trace_.append("mgmt", "mgmt.counters_reset", {{"device", std::to_string(device_id)}});
}

std::uint64_t DeviceRegistry::subscribe_errors(int device_id, ErrorSink sink) {
    std::lock_guard lk(mu_);
    Device& d = dev(device_id);
    std::uint64_t id = next_subscription_++;
    d.sinks.emplace(id, std::move(sink));
    return id;
}

void DeviceRegistry::unsubscribe_errors(int device_id, std::uint64_t subscription) {
    std::lock_guard lk(mu_);
    dev(device_id).sinks.erase(subscription);
}

void DeviceRegistry::note_job_enqueued(int device_id) {
    std::lock_guard lk(mu_);
    Device& d = dev(device_id);
    d.pending_jobs += 1;
    d.counters.queue_occupancy_high_watermark =
        std::max(d.counters.queue_occupancy_high_watermark, d.pending_jobs);
    trace_.append("mgmt", "mgmt.job_enqueued",
                  {{"device", std::to_string(device_id)},
                   {"occupancy", std::to_string(d.pending_jobs)}});
}

void DeviceRegistry::note_job_done(int device_id, bool ok, std::uint64_t bytes_in,
                                   std::uint64_t bytes_out, const std::string& fail_detail) {
    std::vector<std::pair<ErrorSink, MgmtErrorEvent>> pending;
    {
        std::lock_guard lk(mu_);
        Device& d = dev(device_id);
        if (d.pending_jobs > 0) d.pending_jobs -= 1;
        if (ok)
            d.counters.jobs_completed += 1;
        else
            d.counters.jobs_failed += 1;
        d.counters.bytes_in += bytes_in;
        d.counters.bytes_out += bytes_out;
        trace_.append("mgmt", "mgmt.job_done",
                      {{"device", std::to_string(device_id)},
                       {"ok", ok ? "1" : "0"},
                       {"bytes_in", std::to_string(bytes_in)},
                       {"bytes_out", std::to_string(bytes_out)}});
        if (!ok) dispatch_error_locked(d, "job_failure", fail_detail, pending);
    }
    for (auto& [sink, ev] : pending) sink(ev);
}

void DeviceRegistry::dispatch_error_locked(Device& d, const std::string& kind,
                                           const std::string& detail,
                                           std::vector<std::pair<ErrorSink, MgmtErrorEvent>>& out) {
    MgmtErrorEvent ev;
    ev.device_id = d.desc.device_id;
    ev.kind = kind;
    ev.detail = detail;
    ev.trace_seq = trace_.append("mgmt", "mgmt.error",
                                 {{"device", std::to_string(d.desc.device_id)},
                                  {"error_kind", kind},
                                  {"detail", detail.empty() ? "-" : detail}});
    // Delivery order follows subscription order; each subscriber sees each
    // event exactly once.
    for (const auto& [_, sink] : d.sinks) out.emplace_back(sink, ev);
}

}  // namespace aalsim

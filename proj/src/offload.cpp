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

#include "aalsim/offload.hpp"

#include <algorithm>

#include "aalsim/errors.hpp"

namespace aalsim {

Profile payload_profile(const JobPayload& payload) {
    return std::holds_alternative<FecJob>(payload) ? Profile::FecLookaside
                                                   : Profile::HighPhyInline;
}

std::uint64_t payload_bytes(const JobPayload& payload) {
    if (const auto* fec = std::get_if<FecJob>(&payload)) return (fec->bits.size() + 7) / 8;
    const auto& hp = std::get<HighPhyJob>(payload);
    if (hp.dir == HighPhyJob::Dir::Downlink) return hp.tb.size();
    return hp.iq.size() * phy::kIqSampleBytes;
}

std::uint64_t output_bytes(const JobOutput& output) {
    if (const auto* fec = std::get_if<FecJobOutput>(&output)) return (fec->bits.size() + 7) / 8;
    if (const auto* hp = std::get_if<HighPhyJobOutput>(&output)) {
        if (!hp->iq.empty()) return hp->iq.size() * phy::kIqSampleBytes;
        return hp->tb.size();
    }
    return 0;
}

AalLpu::AalLpu(DeviceRegistry& registry, int device_id, int lpu_index, int capacity_units,
               EventTrace& trace)
    : registry_(registry),
      trace_(trace),
      device_id_(device_id),
      lpu_index_(lpu_index),
      capacity_units_(capacity_units) {
    auto devices = registry.discover();
    auto it = std::find_if(devices.begin(), devices.end(),
                           [&](const HwaDescriptor& d) { return d.device_id == device_id; });
    if (it == devices.end())
        fail(Errc::invalid_argument, "LPU refers to unregistered device " + std::to_string(device_id));
    if (lpu_index < 0 || lpu_index >= it->num_lpus)
        fail(Errc::invalid_argument, "LPU index out of range for device");
}

PartitionKind AalLpu::partition_kind() const {
    for (const auto& d : registry_.discover())
        if (d.device_id == device_id_) return d.partition_kind;
    fail(Errc::invalid_argument, "device disappeared from registry");
}

ProfileInstance& AalLpu::create_profile_instance(Profile profile) {
    for (const auto& d : registry_.discover()) {
        if (d.device_id != device_id_) continue;
        if (!d.supported_profiles.contains(profile))
            fail(Errc::unsupported_profile, std::string(profile_name(profile)) +
                                                " not supported by device " +
                                                std::to_string(device_id_));
        instances_.push_back(std::make_unique<ProfileInstance>(registry_, trace_, device_id_,
                                                               next_instance_++, profile));
        return *instances_.back();
    }
    fail(Errc::invalid_argument, "device disappeared from registry");
}

ProfileInstance::ProfileInstance(DeviceRegistry& registry, EventTrace& trace, int device_id,
                                 std::uint32_t instance_id, Profile profile)
    : registry_(registry),
      trace_(trace),
      device_id_(device_id),
      instance_id_(instance_id),
      profile_(profile) {}

QueueId ProfileInstance::create_queue(int priority, std::size_t depth) {
    if (depth < 1) fail(Errc::invalid_argument, "queue depth must be >= 1");
    std::lock_guard lk(mu_);
    QueueId id = next_queue_++;
    queues_.emplace(id, QueueState{priority, depth, {}});
    trace_.append("offload", "queue.create",
                  {{"instance", std::to_string(instance_id_)},
                   {"queue", std::to_string(id)},
                   {"priority", std::to_string(priority)},
                   {"depth", std::to_string(depth)}});
    return id;
}

JobId ProfileInstance::enqueue_job(QueueId queue, JobPayload payload) {
    JobId id = 0;
    {
        std::lock_guard lk(mu_);
        auto it = queues_.find(queue);
        if (it == queues_.end()) fail(Errc::invalid_argument, "no such queue " + std::to_string(queue));
        if (payload_profile(payload) != profile_)
            fail(Errc::profile_mismatch, std::string(profile_name(payload_profile(payload))) +
                                             " job submitted to " + profile_name(profile_) +
                                             " instance");
        QueueState& q = it->second;
        if (q.pending.size() >= q.depth)
            fail(Errc::queue_full, "queue " + std::to_string(queue) + " is at depth " +
                                       std::to_string(q.depth));
        id = next_job_++;
        JobState js;
        js.id = id;
        js.queue = queue;
        js.payload = std::move(payload);
        js.submit_time_us = trace_.time();
        jobs_.emplace(id, std::move(js));
        q.pending.push_back(id);
        trace_.append("offload", "job.enqueue",
                      {{"instance", std::to_string(instance_id_)},
                       {"queue", std::to_string(queue)},
                       {"job", std::to_string(id)},
                       {"profile", profile_name(profile_)}});
    }
    registry_.note_job_enqueued(device_id_);
    return id;
}

std::optional<ProfileInstance::SelectedJob> ProfileInstance::scheduler_step() {
    std::lock_guard lk(mu_);
    if (in_flight_) return std::nullopt;  // jobs are not preemptible
    const QueueState* best = nullptr;
    QueueId best_id = 0;
    for (const auto& [id, q] : queues_) {
        if (q.pending.empty()) continue;
        if (!best || q.priority < best->priority || (q.priority == best->priority && id < best_id)) {
            best = &q;
            best_id = id;
        }
    }
    if (!best) return std::nullopt;
    JobId job = queues_[best_id].pending.front();
    queues_[best_id].pending.pop_front();
    in_flight_ = job;
    trace_.append("offload", "job.select",
                  {{"instance", std::to_string(instance_id_)},
                   {"queue", std::to_string(best_id)},
                   {"job", std::to_string(job)}});
    SelectedJob out;
    out.job = job;
    out.queue = best_id;
    out.payload = jobs_.at(job).payload;
    return out;
}

JobOutput ProfileInstance::execute(const JobPayload& payload) {
    if (const auto* fec = std::get_if<FecJob>(&payload)) {
        // A job may carry any whole number of blocks.
        FecJobOutput out;
        const int block = fec->op == FecJob::Op::Encode ? fec->code.k : fec->code.n;
        if (fec->bits.size() % static_cast<std::size_t>(block) != 0)
            fail(Errc::length_mismatch, "FEC job payload does not divide into blocks of " +
                                            std::to_string(block) + " bits");
        Bits seg(static_cast<std::size_t>(block));
        for (std::size_t off = 0; off < fec->bits.size(); off += static_cast<std::size_t>(block)) {
            std::copy_n(fec->bits.begin() + static_cast<std::ptrdiff_t>(off), block, seg.begin());
            if (fec->op == FecJob::Op::Encode) {
                Bits cw = phy::fec_encode(seg, fec->code);
                out.bits.insert(out.bits.end(), cw.begin(), cw.end());
            } else {
                phy::DecodeResult d = phy::fec_decode(seg, fec->code);
                out.bits.insert(out.bits.end(), d.msg.begin(), d.msg.end());
                out.converged = out.converged && d.converged;
            }
        }
        return out;
    }
    const auto& hp = std::get<HighPhyJob>(payload);
    HighPhyJobOutput out;
    if (hp.dir == HighPhyJob::Dir::Downlink) {
        out.iq = phy::dl_pipeline(hp.tb, hp.cfg);
    } else {
        phy::UlResult r = phy::ul_pipeline(hp.iq, hp.cfg);
        out.tb = std::move(r.tb);
        out.crc_ok = r.crc_ok;
    }
    return out;
}

void ProfileInstance::complete_job(JobId job, bool success, JobOutput output,
                                   const std::string& failure_reason) {
    Completion c;
    CompletionCallback cb;
    std::uint64_t in_bytes = 0;
    std::uint64_t out_bytes = 0;
    {
        std::lock_guard lk(mu_);
        if (!in_flight_ || *in_flight_ != job)
            fail(Errc::invalid_argument, "job " + std::to_string(job) + " is not in flight");
        auto it = jobs_.find(job);
        c.job = job;
        c.queue = it->second.queue;
        c.success = success;
        c.failure_reason = failure_reason;
        c.output = std::move(output);
        c.submit_time_us = it->second.submit_time_us;
        c.complete_time_us = trace_.time();
        in_bytes = payload_bytes(it->second.payload);
        out_bytes = output_bytes(c.output);
        jobs_.erase(it);
        in_flight_.reset();
        trace_.append("offload", "job.complete",
                      {{"instance", std::to_string(instance_id_)},
                       {"queue", std::to_string(c.queue)},
                       {"job", std::to_string(job)},
                       {"ok", success ? "1" : "0"}});
        if (interrupt_) {
            cb = interrupt_;
            trace_.append("offload", "completion.deliver",
                          {{"job", std::to_string(job)}, {"via", "interrupt"}});
        } else {
            completed_.push_back(c);
        }
    }
    registry_.note_job_done(device_id_, success, in_bytes, out_bytes, failure_reason);
    if (cb) cb(c);
}

std::vector<Completion> ProfileInstance::poll_completions(std::size_t max_n) {
    if (max_n < 1) fail(Errc::invalid_argument, "poll_completions needs max_n >= 1");
    std::lock_guard lk(mu_);
    std::vector<Completion> out;
    while (!completed_.empty() && out.size() < max_n) {
        trace_.append("offload", "completion.deliver",
                      {{"job", std::to_string(completed_.front().job)}, {"via", "poll"}});
        out.push_back(std::move(completed_.front()));
        completed_.pop_front();
    }
    return out;
}

std::uint64_t ProfileInstance::register_interrupt(CompletionCallback callback) {
    std::lock_guard lk(mu_);
    if (interrupt_)
        fail(Errc::registration_conflict, "instance already has an interrupt consumer");
    interrupt_ = std::move(callback);
    return ++interrupt_id_;
}

void ProfileInstance::unregister_interrupt(std::uint64_t registration) {
    std::lock_guard lk(mu_);
    if (registration != interrupt_id_ || !interrupt_)
        fail(Errc::invalid_argument, "no such interrupt registration");
    interrupt_ = nullptr;
}

std::size_t ProfileInstance::run_until_idle() {
    std::size_t n = 0;
    while (auto sel = scheduler_step()) {
        JobOutput out = execute(sel->payload);
        complete_job(sel->job, true, std::move(out));
        ++n;
    }
    return n;
}

std::size_t ProfileInstance::pending_jobs() const {
    std::lock_guard lk(mu_);
    std::size_t n = in_flight_ ? 1 : 0;
    for (const auto& [_, q] : queues_) n += q.pending.size();
    return n;
}

}  // namespace aalsim

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

#include <doctest.h>

#include <atomic>
#include <functional>
#include <mutex>
#include <set>
#include <thread>

#include "aalsim/errors.hpp"
#include "aalsim/offload.hpp"
#include "aalsim/rng.hpp"
#include "aalsim/sim.hpp"

using namespace aalsim;

namespace {

struct Rig {
    EventTrace trace;
    DeviceRegistry registry{trace};
    std::unique_ptr<AalLpu> lpu;

    explicit Rig(PartitionKind kind = PartitionKind::Soft,
                 std::set<Profile> profiles = {Profile::FecLookaside, Profile::HighPhyInline}) {
        HwaDescriptor d;
        d.device_id = 0;
        d.vendor_tag = "mock";
        d.partition_kind = kind;
        d.num_lpus = 1;
        d.supported_profiles = std::move(profiles);
        d.firmware_version = {1, 0, 0};
        registry.register_device(d);
        lpu = std::make_unique<AalLpu>(registry, 0, 0, 1, trace);
    }
};

FecJob encode_job(const Bits& bits) {
    FecJob j;
    j.op = FecJob::Op::Encode;
    j.code = phy::CodeSpec::hamming74();
    j.bits = bits;
    return j;
}

Errc code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an Error");
    return Errc::invalid_argument;
}

}  // namespace

TEST_CASE("profile instances require device support") {
    Rig rig(PartitionKind::Soft, {Profile::FecLookaside});
    ProfileInstance& fec = rig.lpu->create_profile_instance(Profile::FecLookaside);
    CHECK(fec.profile() == Profile::FecLookaside);
    CHECK(code_of([&] { rig.lpu->create_profile_instance(Profile::HighPhyInline); }) ==
          Errc::unsupported_profile);
}

TEST_CASE("two instances on one lpu keep isolated queues") {
    Rig rig;
    ProfileInstance& a = rig.lpu->create_profile_instance(Profile::FecLookaside);
    ProfileInstance& b = rig.lpu->create_profile_instance(Profile::FecLookaside);
    QueueId qa = a.create_queue(0, 4);
    QueueId qb = b.create_queue(0, 4);
    a.enqueue_job(qa, encode_job({1, 0, 1, 0}));
    CHECK(a.pending_jobs() == 1);
    CHECK(b.pending_jobs() == 0);
    b.enqueue_job(qb, encode_job({0, 0, 0, 1}));
    CHECK(a.run_until_idle() == 1);
    CHECK(b.run_until_idle() == 1);
    auto ca = a.poll_completions(4);
    auto cb = b.poll_completions(4);
    REQUIRE(ca.size() == 1);
    REQUIRE(cb.size() == 1);
    CHECK(std::get<FecJobOutput>(ca[0].output).bits == phy::fec_encode({1, 0, 1, 0}, phy::CodeSpec::hamming74()));
    CHECK(std::get<FecJobOutput>(cb[0].output).bits == phy::fec_encode({0, 0, 0, 1}, phy::CodeSpec::hamming74()));
}

TEST_CASE("queue creation validates depth and assigns distinct ids") {
    Rig rig;
    ProfileInstance& inst = rig.lpu->create_profile_instance(Profile::FecLookaside);
    QueueId q0 = inst.create_queue(0, 8);
    QueueId q1 = inst.create_queue(1, 8);
    CHECK(q0 != q1);
    CHECK(code_of([&] { inst.create_queue(1, 0); }) == Errc::invalid_argument);
}

TEST_CASE("enqueue enforces depth and payload typing") {
    Rig rig;
    ProfileInstance& inst = rig.lpu->create_profile_instance(Profile::FecLookaside);
    QueueId q = inst.create_queue(0, 2);
    inst.enqueue_job(q, encode_job({1, 1, 0, 0}));
    inst.enqueue_job(q, encode_job({1, 1, 0, 1}));
    CHECK(code_of([&] { inst.enqueue_job(q, encode_job({0, 1, 0, 1})); }) == Errc::queue_full);

    HighPhyJob hp;
    hp.dir = HighPhyJob::Dir::Downlink;
    hp.tb = {1, 2};
    CHECK(code_of([&] { inst.enqueue_job(q, hp); }) == Errc::profile_mismatch);
    CHECK(code_of([&] { inst.enqueue_job(99, encode_job({1, 1, 0, 0})); }) ==
          Errc::invalid_argument);
}

TEST_CASE("scheduler serves strict priority with queue-id tie-break") {
    Rig rig;
    ProfileInstance& inst = rig.lpu->create_profile_instance(Profile::FecLookaside);
    QueueId p0 = inst.create_queue(0, 8);
    QueueId p1 = inst.create_queue(1, 8);

    JobId j2 = inst.enqueue_job(p1, encode_job({0, 0, 0, 1}));
    JobId j1 = inst.enqueue_job(p0, encode_job({0, 0, 1, 0}));
    auto sel = inst.scheduler_step();
    REQUIRE(sel.has_value());
    CHECK(sel->job == j1);  // p0 wins although enqueued later
    CHECK(code_of([&] { inst.complete_job(j2, true, FecJobOutput{}); }) == Errc::invalid_argument);
    inst.complete_job(j1, true, ProfileInstance::execute(sel->payload));

    auto sel2 = inst.scheduler_step();
    REQUIRE(sel2.has_value());
    CHECK(sel2->job == j2);
    inst.complete_job(j2, true, ProfileInstance::execute(sel2->payload));

    // Empty high-priority queue defers to the populated lower one.
    JobId j3 = inst.enqueue_job(p1, encode_job({1, 0, 0, 0}));
    auto sel3 = inst.scheduler_step();
    REQUIRE(sel3.has_value());
    CHECK(sel3->job == j3);
    inst.complete_job(j3, true, FecJobOutput{});

    // Equal priorities: the smaller QueueId goes first.
    QueueId qa = inst.create_queue(5, 8);
    QueueId qb = inst.create_queue(5, 8);
    REQUIRE(qa < qb);
    JobId jb = inst.enqueue_job(qb, encode_job({1, 1, 1, 1}));
    JobId ja = inst.enqueue_job(qa, encode_job({1, 1, 1, 0}));
    auto sel4 = inst.scheduler_step();
    REQUIRE(sel4.has_value());
    CHECK(sel4->job == ja);
    inst.complete_job(ja, true, FecJobOutput{});
    auto sel5 = inst.scheduler_step();
    CHECK(sel5->job == jb);
    inst.complete_job(jb, true, FecJobOutput{});
    CHECK_FALSE(inst.scheduler_step().has_value());
}

TEST_CASE("jobs are non-preemptible and complete in per-queue fifo order") {
    Rig rig;
    ProfileInstance& inst = rig.lpu->create_profile_instance(Profile::FecLookaside);
    QueueId q = inst.create_queue(0, 16);
    std::vector<JobId> submitted;
    for (int i = 0; i < 10; ++i)
        submitted.push_back(inst.enqueue_job(q, encode_job({1, 0, static_cast<std::uint8_t>(i & 1), 0})));

    auto first = inst.scheduler_step();
    REQUIRE(first.has_value());
    CHECK_FALSE(inst.scheduler_step().has_value());  // busy until completed
    inst.complete_job(first->job, true, FecJobOutput{});

    std::vector<JobId> completed = {first->job};
    while (auto sel = inst.scheduler_step()) {
        completed.push_back(sel->job);
        inst.complete_job(sel->job, true, FecJobOutput{});
    }
    CHECK(completed == submitted);
    auto polled = inst.poll_completions(100);
    REQUIRE(polled.size() == submitted.size());
    for (std::size_t i = 0; i < polled.size(); ++i) CHECK(polled[i].job == submitted[i]);
}

TEST_CASE("poll returns at most max_n and never re-delivers") {
    Rig rig;
    ProfileInstance& inst = rig.lpu->create_profile_instance(Profile::FecLookaside);
    QueueId q = inst.create_queue(0, 8);
    CHECK(inst.poll_completions(4).empty());
    for (int i = 0; i < 3; ++i) inst.enqueue_job(q, encode_job({1, 0, 1, 1}));
    inst.run_until_idle();
    CHECK(inst.poll_completions(2).size() == 2);
    CHECK(inst.poll_completions(2).size() == 1);
    CHECK(inst.poll_completions(2).empty());
    CHECK(code_of([&] { inst.poll_completions(0); }) == Errc::invalid_argument);
}

TEST_CASE("interrupt delivery is exactly-once and hands off to poll cleanly") {
    Rig rig;
    ProfileInstance& inst = rig.lpu->create_profile_instance(Profile::FecLookaside);
    QueueId q = inst.create_queue(0, 16);

    std::vector<JobId> via_interrupt;
    std::uint64_t reg = inst.register_interrupt(
        [&](const Completion& c) { via_interrupt.push_back(c.job); });
    CHECK(code_of([&] { inst.register_interrupt([](const Completion&) {}); }) ==
          Errc::registration_conflict);

    for (int i = 0; i < 5; ++i) inst.enqueue_job(q, encode_job({0, 1, 0, 1}));
    inst.run_until_idle();
    CHECK(via_interrupt.size() == 5);
    CHECK(inst.poll_completions(16).empty());  // nothing double-delivered

    // Unregister mid-stream: the remaining completions arrive via poll.
    inst.unregister_interrupt(reg);
    for (int i = 0; i < 3; ++i) inst.enqueue_job(q, encode_job({0, 1, 1, 1}));
    inst.run_until_idle();
    CHECK(via_interrupt.size() == 5);
    CHECK(inst.poll_completions(16).size() == 3);

    CHECK(code_of([&] { inst.unregister_interrupt(reg); }) == Errc::invalid_argument);
}

TEST_CASE("high-phy jobs run the pipeline kernels") {
    Rig rig;
    ProfileInstance& inst = rig.lpu->create_profile_instance(Profile::HighPhyInline);
    QueueId q = inst.create_queue(0, 4);

    phy::PipelineConfig cfg;
    HighPhyJob dl;
    dl.dir = HighPhyJob::Dir::Downlink;
    dl.cfg = cfg;
    dl.tb = {0x13, 0x37, 0x00, 0x7F};
    inst.enqueue_job(q, dl);
    inst.run_until_idle();
    auto done = inst.poll_completions(1);
    REQUIRE(done.size() == 1);
    auto& out = std::get<HighPhyJobOutput>(done[0].output);
    CHECK(out.iq == phy::dl_pipeline(dl.tb, cfg));

    HighPhyJob ul;
    ul.dir = HighPhyJob::Dir::Uplink;
    ul.cfg = cfg;
    ul.iq = out.iq;
    inst.enqueue_job(q, ul);
    inst.run_until_idle();
    auto done2 = inst.poll_completions(1);
    REQUIRE(done2.size() == 1);
    auto& out2 = std::get<HighPhyJobOutput>(done2[0].output);
    CHECK(out2.crc_ok);
    CHECK(out2.tb == dl.tb);
}

TEST_CASE("occupancy watermark spans every instance on the device") {
    Rig rig;
    ProfileInstance& a = rig.lpu->create_profile_instance(Profile::FecLookaside);
    ProfileInstance& b = rig.lpu->create_profile_instance(Profile::FecLookaside);
    QueueId qa = a.create_queue(0, 8);
    QueueId qb = b.create_queue(0, 8);
    a.enqueue_job(qa, encode_job({1, 0, 0, 0}));
    a.enqueue_job(qa, encode_job({0, 1, 0, 0}));
    b.enqueue_job(qb, encode_job({0, 0, 1, 0}));
    CHECK(rig.registry.perf_counters(0).queue_occupancy_high_watermark == 3);
    a.run_until_idle();
    b.run_until_idle();
    CHECK(rig.registry.perf_counters(0).queue_occupancy_high_watermark == 3);
    CHECK(rig.registry.perf_counters(0).jobs_completed == 3);
}

TEST_CASE("job failures feed the device counters and error events") {
    Rig rig;
    ProfileInstance& inst = rig.lpu->create_profile_instance(Profile::FecLookaside);
    QueueId q = inst.create_queue(0, 4);
    std::vector<std::string> errors;
    rig.registry.subscribe_errors(0, [&](const MgmtErrorEvent& e) { errors.push_back(e.kind); });

    JobId id = inst.enqueue_job(q, encode_job({1, 1, 1, 1}));
    auto sel = inst.scheduler_step();
    REQUIRE(sel.has_value());
    inst.complete_job(id, false, FecJobOutput{}, "induced");
    PerfCounters c = rig.registry.perf_counters(0);
    CHECK(c.jobs_failed == 1);
    CHECK(c.jobs_completed == 0);
    REQUIRE(errors.size() == 1);
    CHECK(errors[0] == "job_failure");
}

TEST_CASE("partition kind is invisible to the application") {
    // The same scripted workload against a hard-partitioned and a
    // soft-partitioned device must produce identical app-visible behavior.
    auto run_workload = [](PartitionKind kind) {
        Rig rig(kind);
        ProfileInstance& inst = rig.lpu->create_profile_instance(Profile::FecLookaside);
        QueueId q0 = inst.create_queue(0, 4);
        QueueId q1 = inst.create_queue(1, 4);

        std::vector<std::string> log;
        DetRng rng(606);
        for (int i = 0; i < 40; ++i) {
            QueueId q = rng.chance(0.5) ? q0 : q1;
            Bits bits(4);
            for (auto& b : bits) b = static_cast<std::uint8_t>(rng.bounded(2));
            try {
                JobId id = inst.enqueue_job(q, encode_job(bits));
                log.push_back("enq q=" + std::to_string(q) + " job=" + std::to_string(id));
            } catch (const Error& e) {
                log.push_back(std::string("err=") + errc_name(e.code()));
            }
            if (rng.chance(0.4)) inst.run_until_idle();
            for (const Completion& c : inst.poll_completions(2)) {
                log.push_back("done job=" + std::to_string(c.job) + " q=" +
                              std::to_string(c.queue) + " ok=" + (c.success ? "1" : "0") +
                              " bits=" +
                              std::to_string(std::get<FecJobOutput>(c.output).bits.size()));
            }
        }
        inst.run_until_idle();
        for (const Completion& c : inst.poll_completions(64))
            log.push_back("done job=" + std::to_string(c.job) + " q=" + std::to_string(c.queue));
        PerfCounters pc = rig.registry.perf_counters(0);
        log.push_back("jobs=" + std::to_string(pc.jobs_completed));
        return log;
    };

    CHECK(run_workload(PartitionKind::Hard) == run_workload(PartitionKind::Soft));
}

TEST_CASE("interrupt callbacks may re-enter the instance") {
    Rig rig;
    ProfileInstance& inst = rig.lpu->create_profile_instance(Profile::FecLookaside);
    QueueId q = inst.create_queue(0, 8);
    int fired = 0;
    inst.register_interrupt([&](const Completion&) {
        ++fired;
        CHECK(inst.poll_completions(2).empty());  // re-entrant poll is legal
    });
    inst.enqueue_job(q, encode_job({1, 1, 0, 0}));
    inst.run_until_idle();
    CHECK(fired == 1);
}

TEST_CASE("completions are delivered exactly once across poll and interrupt under contention") {
    Rig rig;
    ProfileInstance& inst = rig.lpu->create_profile_instance(Profile::FecLookaside);
    QueueId q = inst.create_queue(0, 4096);

    constexpr int kJobs = 600;
    std::mutex seen_mu;
    std::set<JobId> seen;
    std::atomic<int> delivered{0};
    std::atomic<bool> duplicate{false};

    auto record = [&](JobId id) {
        std::lock_guard lk(seen_mu);
        if (!seen.insert(id).second) duplicate = true;
        ++delivered;
    };

    for (int i = 0; i < kJobs; ++i) inst.enqueue_job(q, encode_job({1, 0, 1, 0}));

    std::atomic<bool> stop{false};
    std::thread engine([&] {
        while (auto sel = inst.scheduler_step()) {
            inst.complete_job(sel->job, true, ProfileInstance::execute(sel->payload));
        }
        stop = true;
    });

    // A poller races the engine; an interrupt consumer joins and leaves
    // partway through.
    std::thread poller([&] {
        DetRng rng(777);
        for (std::uint64_t spin = 0; spin < 50'000'000 && delivered < kJobs; ++spin) {
            std::uint64_t reg = 0;
            bool registered = false;
            if (rng.chance(0.2)) {
                try {
                    reg = inst.register_interrupt([&](const Completion& c) { record(c.job); });
                    registered = true;
                } catch (const Error&) {
                }
            }
            for (const Completion& c : inst.poll_completions(1 + rng.bounded(8))) record(c.job);
            if (registered) inst.unregister_interrupt(reg);
        }
    });

    engine.join();
    poller.join();
    for (const Completion& c : inst.poll_completions(4096)) record(c.job);

    CHECK_FALSE(duplicate.load());
    CHECK(delivered.load() == kJobs);
}

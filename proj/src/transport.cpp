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

#include "aalsim/transport.hpp"

#include <algorithm>

#include "aalsim/errors.hpp"

namespace aalsim {

Transport::Transport(MemorySystem& mem, EventTrace& trace, TransferCounters& counters)
    : mem_(mem), trace_(trace), counters_(counters) {}

void Transport::add_queue(std::uint32_t queue_id, std::size_t depth, PoolId hwa_pool) {
    if (depth < 1) fail(Errc::invalid_argument, "queue depth must be >= 1");
    std::lock_guard lk(mu_);
    if (queues_.contains(queue_id))
        fail(Errc::invalid_argument, "queue " + std::to_string(queue_id) + " already exists");
    queues_[queue_id] = Queue{depth, hwa_pool, {}, {}, {}, std::nullopt};
}

Transport::Queue& Transport::queue_ref(std::uint32_t id) {
    auto it = queues_.find(id);
    if (it == queues_.end()) fail(Errc::invalid_argument, "no such queue " + std::to_string(id));
    return it->second;
}

std::uint64_t Transport::submit(Request req) {
    Queue& q = queue_ref(req.is_send ? req.send.queue : req.recv.queue);
    if (q.pending.size() >= q.depth)
        fail(Errc::queue_full, "queue has " + std::to_string(q.pending.size()) +
                                   " pending requests at depth " + std::to_string(q.depth));
    req.id = next_request_++;
    // Submitted buffers pass to the HWA until the request completes.
    const auto& bufs = req.is_send ? req.send.buffers : req.recv.buffers;
    for (BufferId b : bufs) mem_.set_hwa_owned(b);
    q.pending.push_back(req.id);
    work_order_.push_back(req.id);
    std::uint64_t id = req.id;
    std::uint32_t queue_id = req.is_send ? req.send.queue : req.recv.queue;
    trace_.append("transport", req.is_send ? "transport.send_submit" : "transport.recv_submit",
                  {{"request", std::to_string(id)},
                   {"queue", std::to_string(queue_id)},
                   {"mode", (req.is_send ? req.send.mode : req.recv.mode) == IoMode::Sync
                                ? "sync"
                                : "async"},
                   {"buffers", std::to_string(bufs.size())}});
    requests_.emplace(id, std::move(req));
    return id;
}

TransportResult Transport::send_buffers(const SendRequest& req) {
    if (req.callback && req.mode == IoMode::Sync)
        fail(Errc::invalid_callback, "completion callbacks require Async mode");
    if (req.buffers.empty()) fail(Errc::invalid_argument, "send request has no buffers");

    std::unique_lock lk(mu_);
    for (BufferId b : req.buffers) {
        BufferInfo bi = mem_.info(b);
        if (bi.ownership != Ownership::AppOwned)
            fail(Errc::buffer_not_owned, "buffer " + std::to_string(b) + " is " +
                                             std::string(ownership_name(bi.ownership)) +
                                             ", submission needs AppOwned");
    }
    Request r;
    r.is_send = true;
    r.send = req;
    std::uint64_t id = submit(std::move(r));

    if (req.mode == IoMode::Async) {
        lk.unlock();
        return PendingToken{id};
    }
    std::vector<std::pair<CompletionStatus, TransportCallback>> fired;
    CompletionStatus mine = run_sync_locked(req.queue, id, fired);
    trace_.append("transport", "transport.send_return", {{"request", std::to_string(id)}});
    lk.unlock();
    for (auto& [st, cb] : fired) cb(st);
    return mine;
}

TransportResult Transport::receive_buffers(const ReceiveRequest& req) {
    if (req.callback && req.mode == IoMode::Sync)
        fail(Errc::invalid_callback, "completion callbacks require Async mode");
    if (req.destination == RxDestination::AppAllocated && req.buffers.empty())
        fail(Errc::invalid_argument, "AppAllocated receive needs destination buffers");
    if (req.destination == RxDestination::HwaAllocated && !req.buffers.empty())
        fail(Errc::invalid_argument, "HwaAllocated receive must not carry buffers");

    std::unique_lock lk(mu_);
    if (req.destination == RxDestination::AppAllocated) {
        for (BufferId b : req.buffers) {
            BufferInfo bi = mem_.info(b);
            if (bi.ownership != Ownership::AppOwned)
                fail(Errc::buffer_not_owned, "buffer " + std::to_string(b) + " is not AppOwned");
            if (req.max_payload_bytes > 0 && bi.capacity < req.max_payload_bytes)
                fail(Errc::buffer_too_small,
                     "buffer " + std::to_string(b) + " capacity " + std::to_string(bi.capacity) +
                         " below declared max payload " + std::to_string(req.max_payload_bytes));
        }
    }

    if (req.mode == IoMode::Sync) {
        // The mock HWA produces data only through hwa_push_payload; nothing
        // pending now cannot appear within the timeout window.
        if (queue_ref(req.queue).outbox.empty())
            fail(Errc::no_data_available, "nothing pending on queue " + std::to_string(req.queue));
    }

    Request r;
    r.is_send = false;
    r.recv = req;
    std::uint64_t id = submit(std::move(r));

    if (req.mode == IoMode::Async) {
        lk.unlock();
        return PendingToken{id};
    }
    std::vector<std::pair<CompletionStatus, TransportCallback>> fired;
    CompletionStatus mine = run_sync_locked(req.queue, id, fired);
    trace_.append("transport", "transport.recv_return", {{"request", std::to_string(id)}});
    lk.unlock();
    for (auto& [st, cb] : fired) cb(st);
    if (!mine.success && mine.failure_reason == "buffer_too_small")
        fail(Errc::buffer_too_small, "payload exceeds destination buffer capacity");
    return mine;
}

CompletionStatus Transport::run_sync_locked(
    std::uint32_t queue_id, std::uint64_t request_id,
    std::vector<std::pair<CompletionStatus, TransportCallback>>& fired) {
    // Drain this queue in FIFO order through our own request. Callbacks of
    // async requests processed along the way are collected for the caller to
    // fire after it releases the lock.
    Queue& q = queue_ref(queue_id);
    while (true) {
        std::uint64_t head = q.pending.front();
        auto done = process_locked(head);
        if (head == request_id) return done.first;
        if (done.second) fired.push_back(std::move(done));
    }
}

std::size_t Transport::advance(std::size_t max_ops) {
    std::size_t done = 0;
    while (done < max_ops) {
        std::pair<CompletionStatus, TransportCallback> fired;
        {
            std::lock_guard lk(mu_);
            if (work_order_.empty()) break;
            fired = process_locked(work_order_.front());
        }
        if (fired.second) fired.second(fired.first);
        ++done;
    }
    return done;
}

std::pair<CompletionStatus, TransportCallback> Transport::process_locked(std::uint64_t request_id) {
    auto it = requests_.find(request_id);
    if (it == requests_.end())
        fail(Errc::invalid_argument, "unknown request " + std::to_string(request_id));
    Request r = std::move(it->second);
    requests_.erase(it);

    std::erase(work_order_, request_id);
    Queue& q = queue_ref(r.is_send ? r.send.queue : r.recv.queue);
    std::erase(q.pending, request_id);

    CompletionStatus st = r.is_send ? process_send_locked(r) : process_receive_locked(r);
    finish_locked(r, st);

    TransportCallback cb = r.is_send ? r.send.callback : r.recv.callback;
    bool async = (r.is_send ? r.send.mode : r.recv.mode) == IoMode::Async;
    if (async && !cb) completed_.push_back(st);  // sync callers get st as the return value
    return {st, cb};
}

CompletionStatus Transport::process_send_locked(Request& r) {
    Queue& q = queue_ref(r.send.queue);
    CompletionStatus st;
    st.request_id = r.id;

    if (q.fail_next) {
        st.success = false;
        st.failure_reason = *q.fail_next;
        q.fail_next.reset();
        return st;
    }

    std::vector<BufferId> landed;
    for (BufferId b : r.send.buffers) {
        try {
            BufferId dev = mem_.copy_across(b, q.hwa_pool, counters_);
            mem_.set_hwa_owned(dev);
            landed.push_back(dev);
        } catch (const Error& e) {
            for (BufferId d : landed) mem_.hwa_release(d);
            st.success = false;
            st.failure_reason = errc_name(e.code());
            return st;
        }
    }
    for (BufferId d : landed) q.ingest.push_back(d);
    st.success = true;
    return st;
}

CompletionStatus Transport::process_receive_locked(Request& r) {
    Queue& q = queue_ref(r.recv.queue);
    CompletionStatus st;
    st.request_id = r.id;

    if (q.fail_next) {
        st.success = false;
        st.failure_reason = *q.fail_next;
        q.fail_next.reset();
        return st;
    }
    if (q.outbox.empty()) {
        st.success = false;
        st.failure_reason = "no_data_available";
        return st;
    }

    if (r.recv.destination == RxDestination::HwaAllocated) {
        BufferId dev = q.outbox.front();
        q.outbox.pop_front();
        mem_.set_app_owned(dev);
        st.returned_buffers.push_back(dev);
        st.success = true;
        return st;
    }

    // AppAllocated: one pending payload per destination buffer, and the whole
    // request is all-or-nothing so a short buffer never consumes data.
    std::size_t pairs = std::min(q.outbox.size(), r.recv.buffers.size());
    for (std::size_t i = 0; i < pairs; ++i) {
        if (mem_.info(q.outbox[i]).length > mem_.info(r.recv.buffers[i]).capacity) {
            st.success = false;
            st.failure_reason = "buffer_too_small";
            return st;
        }
    }
    for (std::size_t i = 0; i < pairs; ++i) {
        BufferId src = q.outbox.front();
        q.outbox.pop_front();
        mem_.copy_into(src, r.recv.buffers[i], counters_);
        mem_.hwa_release(src);
        st.returned_buffers.push_back(r.recv.buffers[i]);
    }
    st.success = true;
    return st;
}

void Transport::finish_locked(const Request& r, CompletionStatus& st) {
    if (r.is_send) {
        for (BufferId b : r.send.buffers) {
            if (st.success && r.send.ownership == SendOwnership::TransferToHwa) {
                mem_.hwa_release(b);  // auto-free, no explicit free call needed
            } else {
                // Retained buffers, and all buffers of failed sends, return to
                // the app for reuse or explicit freeing.
                mem_.set_app_owned(b);
                st.returned_buffers.push_back(b);
            }
        }
    } else {
        for (BufferId b : r.recv.buffers) mem_.set_app_owned(b);
    }
    trace_.append("transport", "transport.complete",
                  {{"request", std::to_string(st.request_id)},
                   {"ok", st.success ? "1" : "0"},
                   {"reason", st.failure_reason.empty() ? "-" : st.failure_reason}});
}

std::vector<CompletionStatus> Transport::poll_completions(std::size_t max_n) {
    if (max_n < 1) fail(Errc::invalid_argument, "poll_completions needs max_n >= 1");
    std::lock_guard lk(mu_);
    std::vector<CompletionStatus> out;
    while (!completed_.empty() && out.size() < max_n) {
        out.push_back(std::move(completed_.front()));
        completed_.pop_front();
    }
    return out;
}

std::vector<BufferId> Transport::hwa_take_ingest(std::uint32_t queue) {
    std::lock_guard lk(mu_);
    Queue& q = queue_ref(queue);
    std::vector<BufferId> out(q.ingest.begin(), q.ingest.end());
    q.ingest.clear();
    return out;
}

std::optional<BufferId> Transport::hwa_pop_ingest(std::uint32_t queue) {
    std::lock_guard lk(mu_);
    Queue& q = queue_ref(queue);
    if (q.ingest.empty()) return std::nullopt;
    BufferId b = q.ingest.front();
    q.ingest.pop_front();
    return b;
}

void Transport::hwa_push_payload(std::uint32_t queue, const Bytes& payload) {
    std::lock_guard lk(mu_);
    Queue& q = queue_ref(queue);
    BufferId dev = mem_.alloc(q.hwa_pool);
    mem_.write(dev, payload);
    mem_.set_hwa_owned(dev);
    q.outbox.push_back(dev);
}

void Transport::hwa_fail_next(std::uint32_t queue, const std::string& reason) {
    std::lock_guard lk(mu_);
    queue_ref(queue).fail_next = reason;
}

std::size_t Transport::pending_requests(std::uint32_t queue) const {
    std::lock_guard lk(mu_);
    auto it = queues_.find(queue);
    if (it == queues_.end()) fail(Errc::invalid_argument, "no such queue " + std::to_string(queue));
    return it->second.pending.size();
}

}  // namespace aalsim

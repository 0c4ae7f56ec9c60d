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

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "aalsim/memory.hpp"
#include "aalsim/trace.hpp"

namespace aalsim {

enum class SendOwnership { TransferToHwa, RetainByApp };
enum class IoMode { Sync, Async };

struct CompletionStatus {
    std::uint64_t request_id = 0;
    bool success = false;
    std::string failure_reason;
    std::vector<BufferId> returned_buffers;
};

using TransportCallback = std::function<void(const CompletionStatus&)>;

struct PendingToken {
    std::uint64_t request_id = 0;
};

struct SendRequest {
    std::uint32_t queue = 0;
    std::vector<BufferId> buffers;  // all AppOwned at submission
    SendOwnership ownership = SendOwnership::TransferToHwa;
    IoMode mode = IoMode::Sync;
    TransportCallback callback;  // Async only
};

enum class RxDestination { AppAllocated, HwaAllocated };

struct ReceiveRequest {
    std::uint32_t queue = 0;
    RxDestination destination = RxDestination::HwaAllocated;
    std::vector<BufferId> buffers;      // AppAllocated only; AppOwned at submission
    std::size_t max_payload_bytes = 0;  // optional capacity hint, 0 = skip check
    IoMode mode = IoMode::Sync;
    TransportCallback callback;  // Async only
    double timeout_us = 0.0;     // Sync only; 0 = immediate poll
};

using TransportResult = std::variant<CompletionStatus, PendingToken>;

/// The buffer-movement interface between an AAL application and a mock HWA.
/// Sync calls observe their completion before returning; async calls return a
/// token and complete on a later advance(), with the outcome delivered via the
/// registered callback or poll_completions, exactly once. The hwa_* methods
/// are the device side of the model: where sent data lands and where received
/// data comes from.
class Transport {
  public:
    Transport(MemorySystem& mem, EventTrace& trace, TransferCounters& counters);

    /// depth bounds the number of submitted-but-unprocessed requests.
    /// hwa_pool is the device-side pool backing this queue.
    void add_queue(std::uint32_t queue_id, std::size_t depth, PoolId hwa_pool);

    TransportResult send_buffers(const SendRequest& req);
    TransportResult receive_buffers(const ReceiveRequest& req);

    /// Processes up to max_ops pending async requests in submission order.
    std::size_t advance(std::size_t max_ops = 1);

    std::vector<CompletionStatus> poll_completions(std::size_t max_n);

    // Device-side surface of the mock HWA.
    std::vector<BufferId> hwa_take_ingest(std::uint32_t queue);
    std::optional<BufferId> hwa_pop_ingest(std::uint32_t queue);
    void hwa_push_payload(std::uint32_t queue, const Bytes& payload);
    void hwa_fail_next(std::uint32_t queue, const std::string& reason);

    std::size_t pending_requests(std::uint32_t queue) const;

  private:
    struct Request {
        std::uint64_t id = 0;
        bool is_send = false;
        SendRequest send;
        ReceiveRequest recv;
    };

    struct Queue {
        std::size_t depth = 0;
        PoolId hwa_pool = 0;
        std::deque<std::uint64_t> pending;        // request ids, submission order
        std::deque<BufferId> ingest;              // device-side buffers from sends
        std::deque<BufferId> outbox;              // device-side buffers awaiting receive
        std::optional<std::string> fail_next;
    };

    Queue& queue_ref(std::uint32_t id);
    std::uint64_t submit(Request req);
    CompletionStatus run_sync_locked(
        std::uint32_t queue_id, std::uint64_t request_id,
        std::vector<std::pair<CompletionStatus, TransportCallback>>& fired);
    // Returns the completion plus the callback to fire once the lock drops.
    std::pair<CompletionStatus, TransportCallback> process_locked(std::uint64_t request_id);
    CompletionStatus process_send_locked(Request& r);
    CompletionStatus process_receive_locked(Request& r);
    void finish_locked(const Request& r, CompletionStatus& st);

    MemorySystem& mem_;
    EventTrace& trace_;
    TransferCounters& counters_;

    mutable std::mutex mu_;
    std::map<std::uint32_t, Queue> queues_;
    std::map<std::uint64_t, Request> requests_;
    std::deque<std::uint64_t> work_order_;  // global FIFO of unprocessed requests
    std::deque<CompletionStatus> completed_;  // awaiting poll
    std::uint64_t next_request_ = 1;
};

}  // namespace aalsim

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

#include "aalsim/memory.hpp"

#include <algorithm>

#include "aalsim/errors.hpp"

namespace aalsim {

const char* ownership_name(Ownership o) {
    switch (o) {
        case Ownership::AppOwned: return "app";
        case Ownership::HwaOwned: return "hwa";
        case Ownership::Freed: return "freed";
    }
    return "?";
}

double transfer_time_us(std::uint64_t bytes, const LinkModel& link) {
    if (link.latency_us < 0.0 || link.bandwidth_bytes_per_us <= 0.0)
        fail(Errc::invalid_argument, "link needs latency >= 0 and bandwidth > 0");
    return link.latency_us + static_cast<double>(bytes) / link.bandwidth_bytes_per_us;
}

void MemorySystem::count_copy(const MemoryDomain& src, const MemoryDomain& dst, std::size_t bytes,
                              TransferCounters& counters) {
    if (src.is_host() != dst.is_host()) {
        counters.host_device_transfers += 1;
        counters.host_device_bytes += bytes;
    } else {
        counters.local_copies += 1;
    }
}

PoolId MemorySystem::create_pool(MemoryDomain domain, std::size_t buffer_size, std::size_t count) {
    if (buffer_size < 1) fail(Errc::invalid_argument, "buffer_size must be >= 1");
    if (count < 1) fail(Errc::invalid_argument, "pool count must be >= 1");
    std::lock_guard lk(mu_);
    PoolId id = next_pool_++;
    Pool p;
    p.info = {id, domain, buffer_size, count, count, PoolState::Active};
    pools_.emplace(id, std::move(p));
    if (trace_)
        trace_->append("mem", "pool.create",
                       {{"pool", std::to_string(id)},
                        {"domain", domain.to_string()},
                        {"buffer_size", std::to_string(buffer_size)},
                        {"count", std::to_string(count)}});
    return id;
}

void MemorySystem::terminate_pool(PoolId pool) {
    std::lock_guard lk(mu_);
    Pool& p = pool_ref(pool);
    if (p.info.state == PoolState::Terminated)
        fail(Errc::pool_terminated, "pool " + std::to_string(pool) + " already terminated");
    if (p.hwa_owned > 0)
        fail(Errc::pool_busy, "pool " + std::to_string(pool) + " has " +
                                  std::to_string(p.hwa_owned) + " HWA-owned buffers outstanding");
    p.info.state = PoolState::Terminated;
    if (trace_) trace_->append("mem", "pool.terminate", {{"pool", std::to_string(pool)}});
}

BufferId MemorySystem::alloc(PoolId pool) {
    std::lock_guard lk(mu_);
    Pool& p = pool_ref(pool);
    if (p.info.state == PoolState::Terminated)
        fail(Errc::pool_terminated, "alloc on terminated pool " + std::to_string(pool));
    if (p.info.free_count == 0)
        fail(Errc::pool_exhausted, "pool " + std::to_string(pool) + " has no free buffers");
    p.info.free_count -= 1;
    BufferId id = next_buffer_++;
    Slot s;
    s.id = id;
    s.pool = pool;
    s.length = 0;
    s.ownership = Ownership::AppOwned;
    auto [it, _] = buffers_.emplace(id, std::move(s));
    trace_buf("buf.alloc", it->second);
    return id;
}

void MemorySystem::free_buffer(BufferId buf) {
    std::lock_guard lk(mu_);
    Slot& s = slot(buf);
    if (s.ownership == Ownership::Freed)
        fail(Errc::double_free, "buffer " + std::to_string(buf) + " already freed");
    if (s.ownership == Ownership::HwaOwned)
        fail(Errc::not_owned, "buffer " + std::to_string(buf) + " is HWA-owned");
    s.ownership = Ownership::Freed;
    s.data.clear();
    s.length = 0;
    pool_ref(s.pool).info.free_count += 1;
    trace_buf("buf.freed", s, {{"via", "app"}});
}

BufferId MemorySystem::copy_across(BufferId src, PoolId dst_pool, TransferCounters& counters) {
    std::lock_guard lk(mu_);
    const Slot& from = slot(src);
    if (from.ownership == Ownership::Freed)
        fail(Errc::buffer_not_owned, "source buffer " + std::to_string(src) + " is freed");
    Pool& dst = pool_ref(dst_pool);
    if (dst.info.state == PoolState::Terminated)
        fail(Errc::pool_terminated, "copy into terminated pool " + std::to_string(dst_pool));
    if (dst.info.free_count == 0)
        fail(Errc::pool_exhausted, "destination pool " + std::to_string(dst_pool) + " exhausted");
    if (from.length > dst.info.buffer_size)
        fail(Errc::buffer_too_large, std::to_string(from.length) + " bytes exceed pool buffer size " +
                                         std::to_string(dst.info.buffer_size));

    MemoryDomain src_domain = pool_ref(from.pool).info.domain;
    dst.info.free_count -= 1;
    BufferId id = next_buffer_++;
    Slot s;
    s.id = id;
    s.pool = dst_pool;
    s.length = from.length;
    s.data = from.data;
    s.ownership = Ownership::AppOwned;
    auto [it, _] = buffers_.emplace(id, std::move(s));
    trace_buf("buf.alloc", it->second);
    count_copy(src_domain, dst.info.domain, it->second.length, counters);
    bool hd = src_domain.is_host() != dst.info.domain.is_host();
    if (trace_)
        trace_->append("mem", "mem.copy",
                       {{"src", std::to_string(src)},
                        {"dst", std::to_string(id)},
                        {"src_domain", src_domain.to_string()},
                        {"dst_domain", dst.info.domain.to_string()},
                        {"bytes", std::to_string(it->second.length)},
                        {"hd", hd ? "1" : "0"}});
    return id;
}

void MemorySystem::copy_into(BufferId src, BufferId dst, TransferCounters& counters) {
    std::lock_guard lk(mu_);
    const Slot& from = slot(src);
    Slot& to = slot(dst);
    if (from.ownership == Ownership::Freed || to.ownership == Ownership::Freed)
        fail(Errc::buffer_not_owned, "copy involving a freed buffer");
    const Pool& dst_pool = pool_ref(to.pool);
    if (from.length > dst_pool.info.buffer_size)
        fail(Errc::buffer_too_small, "destination capacity " +
                                         std::to_string(dst_pool.info.buffer_size) +
                                         " < payload " + std::to_string(from.length));
    MemoryDomain src_domain = pool_ref(from.pool).info.domain;
    to.data = from.data;
    to.length = from.length;
    count_copy(src_domain, dst_pool.info.domain, from.length, counters);
    bool hd = src_domain.is_host() != dst_pool.info.domain.is_host();
    if (trace_)
        trace_->append("mem", "mem.copy",
                       {{"src", std::to_string(src)},
                        {"dst", std::to_string(dst)},
                        {"src_domain", src_domain.to_string()},
                        {"dst_domain", dst_pool.info.domain.to_string()},
                        {"bytes", std::to_string(from.length)},
                        {"hd", hd ? "1" : "0"}});
}

void MemorySystem::write(BufferId buf, std::span<const std::uint8_t> data) {
    std::lock_guard lk(mu_);
    Slot& s = slot(buf);
    if (s.ownership == Ownership::Freed)
        fail(Errc::buffer_not_owned, "write to freed buffer " + std::to_string(buf));
    const Pool& p = pool_ref(s.pool);
    if (data.size() > p.info.buffer_size)
        fail(Errc::buffer_too_large, std::to_string(data.size()) + " bytes exceed capacity " +
                                         std::to_string(p.info.buffer_size));
    s.data.assign(data.begin(), data.end());
    s.length = data.size();
}

Bytes MemorySystem::read(BufferId buf) const {
    std::lock_guard lk(mu_);
    const Slot& s = slot(buf);
    if (s.ownership == Ownership::Freed)
        fail(Errc::buffer_not_owned, "read of freed buffer " + std::to_string(buf));
    return s.data;
}

BufferInfo MemorySystem::info(BufferId buf) const {
    std::lock_guard lk(mu_);
    const Slot& s = slot(buf);
    auto it = pools_.find(s.pool);
    BufferInfo bi;
    bi.id = s.id;
    bi.pool = s.pool;
    bi.domain = it->second.info.domain;
    bi.capacity = it->second.info.buffer_size;
    bi.length = s.length;
    bi.ownership = s.ownership;
    return bi;
}

PoolInfo MemorySystem::pool_info(PoolId pool) const {
    std::lock_guard lk(mu_);
    auto it = pools_.find(pool);
    if (it == pools_.end()) fail(Errc::invalid_argument, "no such pool " + std::to_string(pool));
    return it->second.info;
}

std::vector<PoolInfo> MemorySystem::pools() const {
    std::lock_guard lk(mu_);
    std::vector<PoolInfo> out;
    out.reserve(pools_.size());
    for (const auto& [_, p] : pools_) out.push_back(p.info);
    std::sort(out.begin(), out.end(), [](const PoolInfo& a, const PoolInfo& b) { return a.id < b.id; });
    return out;
}

void MemorySystem::set_hwa_owned(BufferId buf) {
    std::lock_guard lk(mu_);
    Slot& s = slot(buf);
    if (s.ownership != Ownership::AppOwned)
        fail(Errc::buffer_not_owned,
             "buffer " + std::to_string(buf) + " is " + ownership_name(s.ownership));
    s.ownership = Ownership::HwaOwned;
    pool_ref(s.pool).hwa_owned += 1;
    trace_buf("buf.to_hwa", s);
}

void MemorySystem::set_app_owned(BufferId buf) {
    std::lock_guard lk(mu_);
    Slot& s = slot(buf);
    if (s.ownership != Ownership::HwaOwned)
        fail(Errc::buffer_not_owned,
             "buffer " + std::to_string(buf) + " is " + ownership_name(s.ownership));
    s.ownership = Ownership::AppOwned;
    pool_ref(s.pool).hwa_owned -= 1;
    trace_buf("buf.to_app", s);
}

void MemorySystem::hwa_release(BufferId buf) {
    std::lock_guard lk(mu_);
    Slot& s = slot(buf);
    if (s.ownership != Ownership::HwaOwned)
        fail(Errc::buffer_not_owned, "hwa_release of buffer not HWA-owned");
    s.ownership = Ownership::Freed;
    s.data.clear();
    s.length = 0;
    Pool& p = pool_ref(s.pool);
    p.hwa_owned -= 1;
    p.info.free_count += 1;
    trace_buf("buf.freed", s, {{"via", "hwa"}});
}

std::uint64_t MemorySystem::live_buffers() const {
    std::lock_guard lk(mu_);
    std::uint64_t n = 0;
    for (const auto& [_, s] : buffers_)
        if (s.ownership != Ownership::Freed) ++n;
    return n;
}

MemorySystem::Slot& MemorySystem::slot(BufferId buf) {
    auto it = buffers_.find(buf);
    if (it == buffers_.end()) fail(Errc::invalid_argument, "no such buffer " + std::to_string(buf));
    return it->second;
}

const MemorySystem::Slot& MemorySystem::slot(BufferId buf) const {
    auto it = buffers_.find(buf);
    if (it == buffers_.end()) fail(Errc::invalid_argument, "no such buffer " + std::to_string(buf));
    return it->second;
}

MemorySystem::Pool& MemorySystem::pool_ref(PoolId pool) {
    auto it = pools_.find(pool);
    if (it == pools_.end()) fail(Errc::invalid_argument, "no such pool " + std::to_string(pool));
    return it->second;
}

void MemorySystem::trace_buf(const char* kind, const Slot& s, TraceFields extra) {
    if (!trace_) return;
    TraceFields f{{"buf", std::to_string(s.id)}, {"pool", std::to_string(s.pool)}};
    for (auto& kv : extra) f.push_back(std::move(kv));
    trace_->append("mem", kind, std::move(f));
}

}  // namespace aalsim

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
#include <mutex>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace aalsim {

/// Shortest representation that parses back to the identical double.
std::string fmt_double(double v);
double parse_double(std::string_view s);

using TraceFields = std::vector<std::pair<std::string, std::string>>;

struct TraceEvent {
    double time_us = 0.0;
    std::uint64_t seq = 0;
    std::string actor;
    std::string kind;
    TraceFields fields;

    const std::string* field(std::string_view key) const;
    std::uint64_t field_u64(std::string_view key) const;
    double field_double(std::string_view key) const;
};

/// Append-only log of everything observable. Execution order is
/// (time_us, seq) lexicographic; seq is the insertion index, so events at
/// equal times replay in the order they happened.
class EventTrace {
  public:
    /// Simulation clock. Standalone (non-simulated) users leave it at 0 and
    /// rely on seq for ordering.
    void set_time(double time_us);
    double time() const;

    /// Key/value pairs attached to every subsequent event, e.g. slot=3 while
    /// a slot is being simulated.
    void set_context(const std::string& key, const std::string& value);
    void clear_context(const std::string& key);

    std::uint64_t append(std::string actor, std::string kind, TraceFields fields = {});

    std::vector<TraceEvent> snapshot() const;
    std::size_t size() const;
    void clear();

  private:
    mutable std::mutex mu_;
    std::vector<TraceEvent> events_;
    TraceFields context_;
    std::uint64_t next_seq_ = 0;
    double now_us_ = 0.0;
};

/// One event per line: time_us seq actor kind key=value...
std::string format_event(const TraceEvent& e);
std::string serialize_trace(const std::vector<TraceEvent>& events);
std::vector<TraceEvent> parse_trace(std::string_view text);

struct TraceDiff {
    bool identical = true;
    std::size_t line = 0;  // 1-based line of first divergence
    std::string left;
    std::string right;
};

/// Line-level diff of two serialized traces.
TraceDiff diff_traces(std::string_view a, std::string_view b);

}  // namespace aalsim

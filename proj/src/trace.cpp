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

#include "aalsim/trace.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>

#include "aalsim/errors.hpp"

namespace aalsim {

std::string fmt_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) fail(Errc::io_error, "double formatting failed");
    return std::string(buf, ptr);
}

double parse_double(std::string_view s) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        fail(Errc::io_error, "bad double: " + std::string(s));
    return v;
}

const std::string* TraceEvent::field(std::string_view key) const {
    for (const auto& [k, v] : fields)
        if (k == key) return &v;
    return nullptr;
}

std::uint64_t TraceEvent::field_u64(std::string_view key) const {
    const std::string* v = field(key);
    if (!v) fail(Errc::io_error, "trace event missing field " + std::string(key));
    return std::strtoull(v->c_str(), nullptr, 10);
}

double TraceEvent::field_double(std::string_view key) const {
    const std::string* v = field(key);
    if (!v) fail(Errc::io_error, "trace event missing field " + std::string(key));
    return parse_double(*v);
}

void EventTrace::set_time(double time_us) {
    std::lock_guard lk(mu_);
    now_us_ = time_us;
}

double EventTrace::time() const {
    std::lock_guard lk(mu_);
    return now_us_;
}

void EventTrace::set_context(const std::string& key, const std::string& value) {
    std::lock_guard lk(mu_);
    for (auto& [k, v] : context_) {
        if (k == key) {
            v = value;
            return;
        }
    }
    context_.emplace_back(key, value);
}

void EventTrace::clear_context(const std::string& key) {
    std::lock_guard lk(mu_);
    std::erase_if(context_, [&](const auto& kv) { return kv.first == key; });
}

std::uint64_t EventTrace::append(std::string actor, std::string kind, TraceFields fields) {
    std::lock_guard lk(mu_);
    TraceEvent e;
    e.time_us = now_us_;
    e.seq = next_seq_++;
    e.actor = std::move(actor);
    e.kind = std::move(kind);
    e.fields = context_;
    for (auto& kv : fields) e.fields.push_back(std::move(kv));
    events_.push_back(std::move(e));
    return events_.back().seq;
}

std::vector<TraceEvent> EventTrace::snapshot() const {
    std::lock_guard lk(mu_);
    return events_;
}

std::size_t EventTrace::size() const {
    std::lock_guard lk(mu_);
    return events_.size();
}

void EventTrace::clear() {
    std::lock_guard lk(mu_);
    events_.clear();
    context_.clear();
    next_seq_ = 0;
    now_us_ = 0.0;
}

std::string format_event(const TraceEvent& e) {
    std::string line = fmt_double(e.time_us);
    line += ' ';
    line += std::to_string(e.seq);
    line += ' ';
    line += e.actor;
    line += ' ';
    line += e.kind;
    for (const auto& [k, v] : e.fields) {
        line += ' ';
        line += k;
        line += '=';
        line += v;
    }
    return line;
}

std::string serialize_trace(const std::vector<TraceEvent>& events) {
    std::string out;
    for (const auto& e : events) {
        out += format_event(e);
        out += '\n';
    }
    return out;
}

std::vector<TraceEvent> parse_trace(std::string_view text) {
    std::vector<TraceEvent> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        std::string_view line = text.substr(pos, eol - pos);
        pos = eol + 1;
        if (line.empty()) continue;

        std::vector<std::string_view> tokens;
        std::size_t t = 0;
        while (t < line.size()) {
            std::size_t sp = line.find(' ', t);
            if (sp == std::string_view::npos) sp = line.size();
            tokens.push_back(line.substr(t, sp - t));
            t = sp + 1;
        }
        if (tokens.size() < 4) fail(Errc::io_error, "malformed trace line: " + std::string(line));

        TraceEvent e;
        e.time_us = parse_double(tokens[0]);
        e.seq = std::strtoull(std::string(tokens[1]).c_str(), nullptr, 10);
        e.actor = std::string(tokens[2]);
        e.kind = std::string(tokens[3]);
        for (std::size_t i = 4; i < tokens.size(); ++i) {
            std::size_t eq = tokens[i].find('=');
            if (eq == std::string_view::npos)
                fail(Errc::io_error, "malformed trace field: " + std::string(tokens[i]));
            e.fields.emplace_back(std::string(tokens[i].substr(0, eq)),
                                  std::string(tokens[i].substr(eq + 1)));
        }
        out.push_back(std::move(e));
    }
    return out;
}

TraceDiff diff_traces(std::string_view a, std::string_view b) {
    TraceDiff d;
    std::size_t pa = 0, pb = 0, line = 1;
    while (pa < a.size() || pb < b.size()) {
        std::size_t ea = a.find('\n', pa);
        std::size_t eb = b.find('\n', pb);
        if (ea == std::string_view::npos) ea = a.size();
        if (eb == std::string_view::npos) eb = b.size();
        std::string_view la = pa < a.size() ? a.substr(pa, ea - pa) : std::string_view{};
        std::string_view lb = pb < b.size() ? b.substr(pb, eb - pb) : std::string_view{};
        if (la != lb) {
            d.identical = false;
            d.line = line;
            d.left = std::string(la);
            d.right = std::string(lb);
            return d;
        }
        pa = ea + 1;
        pb = eb + 1;
        ++line;
    }
    return d;
}

}  // namespace aalsim

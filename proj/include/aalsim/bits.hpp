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
#include <span>
#include <vector>

#include "aalsim/errors.hpp"

namespace aalsim {

using Bytes = std::vector<std::uint8_t>;
/// One bit per element, values 0/1. Wasteful but exhaustively checkable.
using Bits = std::vector<std::uint8_t>;

/// MSB-first within each byte.
inline Bits bytes_to_bits(std::span<const std::uint8_t> bytes) {
    Bits out;
    out.reserve(bytes.size() * 8);
    for (std::uint8_t b : bytes)
        for (int i = 7; i >= 0; --i) out.push_back((b >> i) & 1u);
    return out;
}

inline Bytes bits_to_bytes(const Bits& bits) {
    if (bits.size() % 8 != 0)
        fail(Errc::length_not_divisible, "bit count " + std::to_string(bits.size()) +
                                             " is not a whole number of bytes");
    Bytes out(bits.size() / 8, 0);
    for (std::size_t i = 0; i < bits.size(); ++i)
        out[i / 8] = static_cast<std::uint8_t>((out[i / 8] << 1) | (bits[i] & 1u));
    return out;
}

}  // namespace aalsim

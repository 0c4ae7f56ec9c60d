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

#include <stdexcept>
#include <string>

namespace aalsim {

enum class Errc {
    invalid_argument,
    pool_exhausted,
    pool_terminated,
    pool_busy,
    buffer_too_large,
    buffer_too_small,
    double_free,
    not_owned,
    buffer_not_owned,
    queue_full,
    invalid_callback,
    no_data_available,
    unsupported_profile,
    profile_mismatch,
    registration_conflict,
    illegal_transition,
    unknown_key,
    device_busy,
    length_mismatch,
    length_not_divisible,
    input_too_short,
    truncated,
    bad_version,
    mtu_too_small,
    duplicate_seq,
    unknown_slot,
    config_invalid,
    io_error,
};

const char* errc_name(Errc c);

/// All recoverable failures surface as Error with a machine-checkable code.
class Error : public std::runtime_error {
  public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

    Errc code() const { return code_; }

  private:
    Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

inline const char* errc_name(Errc c) {
    switch (c) {
        case Errc::invalid_argument: return "InvalidArgument";
        case Errc::pool_exhausted: return "PoolExhausted";
        case Errc::pool_terminated: return "PoolTerminated";
        case Errc::pool_busy: return "PoolBusy";
        case Errc::buffer_too_large: return "BufferTooLarge";
        case Errc::buffer_too_small: return "BufferTooSmall";
        case Errc::double_free: return "DoubleFree";
        case Errc::not_owned: return "NotOwned";
        case Errc::buffer_not_owned: return "BufferNotOwned";
        case Errc::queue_full: return "QueueFull";
        case Errc::invalid_callback: return "InvalidCallback";
        case Errc::no_data_available: return "NoDataAvailable";
        case Errc::unsupported_profile: return "UnsupportedProfile";
        case Errc::profile_mismatch: return "ProfileMismatch";
        case Errc::registration_conflict: return "RegistrationConflict";
        case Errc::illegal_transition: return "IllegalTransition";
        case Errc::unknown_key: return "UnknownKey";
        case Errc::device_busy: return "DeviceBusy";
        case Errc::length_mismatch: return "LengthMismatch";
        case Errc::length_not_divisible: return "LengthNotDivisible";
        case Errc::input_too_short: return "InputTooShort";
        case Errc::truncated: return "Truncated";
        case Errc::bad_version: return "BadVersion";
        case Errc::mtu_too_small: return "MtuTooSmall";
        case Errc::duplicate_seq: return "DuplicateSeq";
        case Errc::unknown_slot: return "UnknownSlot";
        case Errc::config_invalid: return "ConfigInvalid";
        case Errc::io_error: return "IoError";
    }
    return "UnknownError";
}

}  // namespace aalsim

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
#include <string>
#include <vector>

#include "aalsim/bits.hpp"

namespace aalsim::phy {

// ---------------------------------------------------------------- CRC-16 ---

/// CRC-16/XMODEM: poly 0x1021, init 0x0000, no reflection, no xor-out.
/// Computed MSB-first over the bit string. check("123456789") = 0x31C3.
std::uint16_t crc16_xmodem(const Bits& bits);

/// payload ++ 16 CRC bits (MSB-first). Payload must be nonempty.
Bits crc_attach(const Bits& payload);

struct CrcCheckResult {
    Bits payload;
    bool ok = false;
};

/// Strips the trailing 16 bits and verifies them against the payload.
CrcCheckResult crc_check(const Bits& bits);

// ------------------------------------------------------------------- FEC ---

/// Systematic linear block code, generator G = [I_k | P]. The built-in
/// Hamming(7,4) is the default; arbitrary codes load from a generator matrix.
struct CodeSpec {
    enum class Kind { Hamming74, GeneratorMatrix };

    Kind kind = Kind::Hamming74;
    int n = 7;
    int k = 4;
    int max_decode_iters = 8;
    std::vector<Bits> generator;  // k rows of n bits, systematic form

    static CodeSpec hamming74(int max_decode_iters = 8);
    static CodeSpec from_generator(std::vector<Bits> rows, int max_decode_iters = 8);
    /// Plain-text matrix file: one row per line, characters '0'/'1'.
    static CodeSpec from_matrix_file(const std::string& path, int max_decode_iters = 8);

    /// Parity-check rows H = [P^T | I_{n-k}], derived from the generator.
    std::vector<Bits> parity_checks() const;
};

/// msg (k bits) -> systematic codeword msg ++ parity (n bits).
Bits fec_encode(const Bits& msg, const CodeSpec& code);

struct DecodeResult {
    Bits msg;
    bool converged = false;
};

/// Greedy bit-flipping decoder: each iteration flips the single bit whose
/// flip most reduces the number of unsatisfied parity checks, stopping when
/// the syndrome clears, no flip strictly helps, or max_decode_iters runs out.
/// For any code whose parity-check columns are distinct and nonzero this
/// corrects every error pattern within the single-error radius exactly as
/// maximum-likelihood decoding would.
DecodeResult fec_decode(const Bits& received, const CodeSpec& code);

// ------------------------------------------------------------- scrambler ---

/// 7-bit Fibonacci LFSR keystream XORed onto the data; self-inverse.
/// Default taps 0x41 realize x^7 + x^6 + 1 (keystream bit = state LSB,
/// feedback = parity(state & taps) shifted into bit 6).
struct ScramblerSpec {
    std::uint8_t lfsr_taps = 0x41;
    std::uint8_t seed = 0x5A;  // nonzero; the all-zero state is degenerate
};

Bits scramble(const Bits& bits, const ScramblerSpec& spec);

// ------------------------------------------------------------ modulation ---

struct IqSample {
    double i = 0.0;
    double q = 0.0;
    bool operator==(const IqSample&) const = default;
};

inline constexpr std::size_t kIqSampleBytes = 2 * sizeof(double);

enum class Modulation { Qpsk, Qam16 };

int bits_per_symbol(Modulation m);
const char* modulation_name(Modulation m);

/// Unit-average-power mappings. QPSK: i = (1-2b0)/sqrt(2), q = (1-2b1)/sqrt(2).
/// 16-QAM: i = (1-2b0)*(2-(1-2b2))/sqrt(10), q = (1-2b1)*(2-(1-2b3))/sqrt(10).
/// Bit count must divide evenly into symbols; no implicit padding.
std::vector<IqSample> modulate(const Bits& bits, Modulation scheme);

/// Hard-decision nearest constellation point.
Bits demodulate(std::span<const IqSample> iq, Modulation scheme);

Bytes iq_to_bytes(std::span<const IqSample> iq);
std::vector<IqSample> iq_from_bytes(std::span<const std::uint8_t> bytes);

// -------------------------------------------------------------- pipeline ---

/// The high-PHY processing chain. Every stage is invertible in a noiseless
/// channel, so ul_pipeline(dl_pipeline(tb)) == tb with the CRC intact.
struct PipelineConfig {
    CodeSpec code = CodeSpec::hamming74();
    ScramblerSpec scrambler;
    Modulation modulation = Modulation::Qpsk;
};

/// crc_attach -> fec_encode per k-bit segment -> scramble -> modulate.
std::vector<IqSample> dl_pipeline(const Bytes& tb, const PipelineConfig& cfg);

struct UlResult {
    Bytes tb;
    bool crc_ok = false;
};

/// demodulate -> descramble -> fec_decode per n-bit segment -> crc_check.
UlResult ul_pipeline(std::span<const IqSample> iq, const PipelineConfig& cfg);

/// Coded bit count dl_pipeline produces for a tb of the given size; throws
/// the same divisibility errors the pipeline itself would.
std::size_t dl_output_symbols(std::size_t tb_bytes, const PipelineConfig& cfg);

}  // namespace aalsim::phy

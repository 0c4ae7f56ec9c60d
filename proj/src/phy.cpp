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

#include "aalsim/phy.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "aalsim/errors.hpp"

namespace aalsim::phy {

// ---------------------------------------------------------------- CRC-16 ---

std::uint16_t crc16_xmodem(const Bits& bits) {
    std::uint16_t crc = 0x0000;
    for (std::uint8_t bit : bits) {
        bool msb = (crc & 0x8000u) != 0;
        crc = static_cast<std::uint16_t>(crc << 1);
        if (msb != (bit != 0)) crc ^= 0x1021;
    }
    return crc;
}

Bits crc_attach(const Bits& payload) {
    if (payload.empty()) fail(Errc::invalid_argument, "crc_attach needs a nonempty bit string");
    std::uint16_t crc = crc16_xmodem(payload);
    Bits out = payload;
    for (int i = 15; i >= 0; --i) out.push_back((crc >> i) & 1u);
    return out;
}

CrcCheckResult crc_check(const Bits& bits) {
    if (bits.size() < 16)
        fail(Errc::input_too_short, "crc_check needs at least 16 bits, got " +
                                        std::to_string(bits.size()));
    CrcCheckResult r;
    r.payload.assign(bits.begin(), bits.end() - 16);
    std::uint16_t declared = 0;
    for (std::size_t i = bits.size() - 16; i < bits.size(); ++i)
        declared = static_cast<std::uint16_t>((declared << 1) | (bits[i] & 1u));
    r.ok = crc16_xmodem(r.payload) == declared;
    return r;
}

// ------------------------------------------------------------------- FEC ---

CodeSpec CodeSpec::hamming74(int max_decode_iters) {
    // p1 = d1+d2+d4, p2 = d1+d3+d4, p3 = d2+d3+d4
    std::vector<Bits> g = {
        {1, 0, 0, 0, 1, 1, 0},
        {0, 1, 0, 0, 1, 0, 1},
        {0, 0, 1, 0, 0, 1, 1},
        {0, 0, 0, 1, 1, 1, 1},
    };
    return from_generator(std::move(g), max_decode_iters);
}

CodeSpec CodeSpec::from_generator(std::vector<Bits> rows, int max_decode_iters) {
    if (rows.empty()) fail(Errc::invalid_argument, "generator matrix is empty");
    CodeSpec c;
    c.kind = Kind::GeneratorMatrix;
    c.k = static_cast<int>(rows.size());
    c.n = static_cast<int>(rows[0].size());
    c.max_decode_iters = max_decode_iters;
    if (c.n <= c.k) fail(Errc::invalid_argument, "code needs n > k");
    if (max_decode_iters < 0) fail(Errc::invalid_argument, "max_decode_iters must be >= 0");
    for (int r = 0; r < c.k; ++r) {
        if (static_cast<int>(rows[r].size()) != c.n)
            fail(Errc::invalid_argument, "generator rows have unequal lengths");
        for (int col = 0; col < c.n; ++col) {
            if (rows[r][col] > 1) fail(Errc::invalid_argument, "generator entries must be 0/1");
            if (col < c.k && rows[r][col] != (col == r ? 1 : 0))
                fail(Errc::invalid_argument, "generator is not in systematic form [I_k | P]");
        }
    }
    c.generator = std::move(rows);
    // Systematic form makes the identity block full rank by construction.
    if (c.n == 7 && c.k == 4) {
        CodeSpec h;
        h.kind = Kind::Hamming74;
        h.n = 7;
        h.k = 4;
        h.max_decode_iters = max_decode_iters;
        h.generator = c.generator;
        static const std::vector<Bits> kHammingRows = {
            {1, 0, 0, 0, 1, 1, 0},
            {0, 1, 0, 0, 1, 0, 1},
            {0, 0, 1, 0, 0, 1, 1},
            {0, 0, 0, 1, 1, 1, 1},
        };
        if (c.generator == kHammingRows) return h;
    }
    return c;
}

CodeSpec CodeSpec::from_matrix_file(const std::string& path, int max_decode_iters) {
    std::ifstream in(path);
    if (!in) fail(Errc::io_error, "cannot open matrix file " + path);
    std::vector<Bits> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        Bits row;
        for (char ch : line) {
            if (ch == '0')
                row.push_back(0);
            else if (ch == '1')
                row.push_back(1);
            else
                fail(Errc::io_error, "matrix file has a character other than 0/1: " + path);
        }
        rows.push_back(std::move(row));
    }
    return from_generator(std::move(rows), max_decode_iters);
}

std::vector<Bits> CodeSpec::parity_checks() const {
    std::vector<Bits> h(static_cast<std::size_t>(n - k), Bits(static_cast<std::size_t>(n), 0));
    for (int r = 0; r < n - k; ++r) {
        for (int c = 0; c < k; ++c) h[r][c] = generator[c][k + r];
        h[r][k + r] = 1;
    }
    return h;
}

Bits fec_encode(const Bits& msg, const CodeSpec& code) {
    if (static_cast<int>(msg.size()) != code.k)
        fail(Errc::length_mismatch, "message has " + std::to_string(msg.size()) +
                                        " bits, code expects k=" + std::to_string(code.k));
    Bits out(static_cast<std::size_t>(code.n), 0);
    for (int c = 0; c < code.n; ++c) {
        std::uint8_t acc = 0;
        for (int r = 0; r < code.k; ++r) acc ^= static_cast<std::uint8_t>(msg[r] & code.generator[r][c]);
        out[c] = acc;
    }
    return out;
}

DecodeResult fec_decode(const Bits& received, const CodeSpec& code) {
    if (static_cast<int>(received.size()) != code.n)
        fail(Errc::length_mismatch, "received word has " + std::to_string(received.size()) +
                                        " bits, code expects n=" + std::to_string(code.n));
    const std::vector<Bits> checks = code.parity_checks();
    const int m = static_cast<int>(checks.size());

    Bits word = received;
    std::vector<std::uint8_t> unsat(static_cast<std::size_t>(m), 0);
    auto recompute = [&]() {
        int weight = 0;
        for (int r = 0; r < m; ++r) {
            std::uint8_t acc = 0;
            for (int c = 0; c < code.n; ++c) acc ^= static_cast<std::uint8_t>(word[c] & checks[r][c]);
            unsat[r] = acc;
            weight += acc;
        }
        return weight;
    };

    int weight = recompute();
    for (int iter = 0; iter < code.max_decode_iters && weight > 0; ++iter) {
        // Flipping bit c toggles every check that contains it; the gain is
        // (unsatisfied checks hit) - (satisfied checks hit).
        int best_bit = -1;
        int best_gain = 0;
        for (int c = 0; c < code.n; ++c) {
            int gain = 0;
            for (int r = 0; r < m; ++r) {
                if (!checks[r][c]) continue;
                gain += unsat[r] ? 1 : -1;
            }
            if (gain > best_gain) {
                best_gain = gain;
                best_bit = c;
            }
        }
        if (best_bit < 0) break;  // no strictly improving flip
        word[best_bit] ^= 1u;
        weight = recompute();
    }

    DecodeResult r;
    r.converged = weight == 0;
    r.msg.assign(word.begin(), word.begin() + code.k);
    return r;
}

// ------------------------------------------------------------- scrambler ---

Bits scramble(const Bits& bits, const ScramblerSpec& spec) {
    if (spec.seed == 0) fail(Errc::invalid_argument, "scrambler seed must be nonzero");
    if ((spec.lfsr_taps & 0x7F) == 0) fail(Errc::invalid_argument, "scrambler taps must be nonzero");
    std::uint8_t state = spec.seed & 0x7F;
    Bits out;
    out.reserve(bits.size());
    for (std::uint8_t b : bits) {
        std::uint8_t ks = state & 1u;
        std::uint8_t fb = static_cast<std::uint8_t>(__builtin_popcount(state & spec.lfsr_taps) & 1);
        state = static_cast<std::uint8_t>((state >> 1) | (fb << 6));
        out.push_back((b ^ ks) & 1u);
    }
    return out;
}

// ------------------------------------------------------------ modulation ---

int bits_per_symbol(Modulation m) { return m == Modulation::Qpsk ? 2 : 4; }

const char* modulation_name(Modulation m) { return m == Modulation::Qpsk ? "qpsk" : "qam16"; }

namespace {

const double kQpskScale = 1.0 / std::sqrt(2.0);
const double kQamScale = 1.0 / std::sqrt(10.0);

IqSample map_symbol(const std::uint8_t* b, Modulation scheme) {
    if (scheme == Modulation::Qpsk)
        return {(1 - 2 * b[0]) * kQpskScale, (1 - 2 * b[1]) * kQpskScale};
    double i = (1 - 2 * b[0]) * (2 - (1 - 2 * b[2])) * kQamScale;
    double q = (1 - 2 * b[1]) * (2 - (1 - 2 * b[3])) * kQamScale;
    return {i, q};
}

}  // namespace

std::vector<IqSample> modulate(const Bits& bits, Modulation scheme) {
    const int bps = bits_per_symbol(scheme);
    if (bits.size() % static_cast<std::size_t>(bps) != 0)
        fail(Errc::length_not_divisible, std::to_string(bits.size()) + " bits do not divide into " +
                                             std::to_string(bps) + "-bit symbols");
    std::vector<IqSample> out;
    out.reserve(bits.size() / static_cast<std::size_t>(bps));
    for (std::size_t s = 0; s < bits.size(); s += static_cast<std::size_t>(bps))
        out.push_back(map_symbol(&bits[s], scheme));
    return out;
}

Bits demodulate(std::span<const IqSample> iq, Modulation scheme) {
    const int bps = bits_per_symbol(scheme);
    // Enumerate the constellation once; nearest point decides the bits.
    const unsigned points = 1u << bps;
    std::vector<IqSample> constellation(points);
    std::uint8_t sym[4];
    for (unsigned v = 0; v < points; ++v) {
        for (int i = 0; i < bps; ++i) sym[i] = (v >> (bps - 1 - i)) & 1u;
        constellation[v] = map_symbol(sym, scheme);
    }
    Bits out;
    out.reserve(iq.size() * static_cast<std::size_t>(bps));
    for (const IqSample& s : iq) {
        unsigned best = 0;
        double best_d = std::numeric_limits<double>::max();
        for (unsigned v = 0; v < points; ++v) {
            double di = s.i - constellation[v].i;
            double dq = s.q - constellation[v].q;
            double d = di * di + dq * dq;
            if (d < best_d) {
                best_d = d;
                best = v;
            }
        }
        for (int i = bps - 1; i >= 0; --i) out.push_back((best >> i) & 1u);
    }
    return out;
}

Bytes iq_to_bytes(std::span<const IqSample> iq) {
    Bytes out(iq.size() * kIqSampleBytes);
    std::memcpy(out.data(), iq.data(), out.size());
    return out;
}

std::vector<IqSample> iq_from_bytes(std::span<const std::uint8_t> bytes) {
    if (bytes.size() % kIqSampleBytes != 0)
        fail(Errc::length_mismatch, "byte count " + std::to_string(bytes.size()) +
                                        " is not a whole number of IQ samples");
    std::vector<IqSample> out(bytes.size() / kIqSampleBytes);
    std::memcpy(out.data(), bytes.data(), bytes.size());
    return out;
}

// -------------------------------------------------------------- pipeline ---

std::vector<IqSample> dl_pipeline(const Bytes& tb, const PipelineConfig& cfg) {
    if (tb.empty()) fail(Errc::invalid_argument, "transport block is empty");
    Bits bits = crc_attach(bytes_to_bits(tb));
    if (bits.size() % static_cast<std::size_t>(cfg.code.k) != 0)
        fail(Errc::length_not_divisible,
             std::to_string(bits.size()) + " bits do not segment into k=" +
                 std::to_string(cfg.code.k) + " messages");
    Bits coded;
    coded.reserve(bits.size() / static_cast<std::size_t>(cfg.code.k) *
                  static_cast<std::size_t>(cfg.code.n));
    Bits seg(static_cast<std::size_t>(cfg.code.k));
    for (std::size_t off = 0; off < bits.size(); off += static_cast<std::size_t>(cfg.code.k)) {
        std::copy(bits.begin() + static_cast<std::ptrdiff_t>(off),
                  bits.begin() + static_cast<std::ptrdiff_t>(off) + cfg.code.k, seg.begin());
        Bits cw = fec_encode(seg, cfg.code);
        coded.insert(coded.end(), cw.begin(), cw.end());
    }
    return modulate(scramble(coded, cfg.scrambler), cfg.modulation);
}

UlResult ul_pipeline(std::span<const IqSample> iq, const PipelineConfig& cfg) {
    Bits coded = scramble(demodulate(iq, cfg.modulation), cfg.scrambler);
    if (coded.size() % static_cast<std::size_t>(cfg.code.n) != 0)
        fail(Errc::length_not_divisible,
             std::to_string(coded.size()) + " coded bits do not segment into n=" +
                 std::to_string(cfg.code.n) + " codewords");
    Bits decoded;
    decoded.reserve(coded.size() / static_cast<std::size_t>(cfg.code.n) *
                    static_cast<std::size_t>(cfg.code.k));
    Bits seg(static_cast<std::size_t>(cfg.code.n));
    for (std::size_t off = 0; off < coded.size(); off += static_cast<std::size_t>(cfg.code.n)) {
        std::copy(coded.begin() + static_cast<std::ptrdiff_t>(off),
                  coded.begin() + static_cast<std::ptrdiff_t>(off) + cfg.code.n, seg.begin());
        DecodeResult d = fec_decode(seg, cfg.code);
        decoded.insert(decoded.end(), d.msg.begin(), d.msg.end());
    }
    CrcCheckResult crc = crc_check(decoded);
    UlResult r;
    r.crc_ok = crc.ok;
    r.tb = bits_to_bytes(crc.payload);
    return r;
}

std::size_t dl_output_symbols(std::size_t tb_bytes, const PipelineConfig& cfg) {
    if (tb_bytes == 0) fail(Errc::invalid_argument, "transport block is empty");
    std::size_t bits = tb_bytes * 8 + 16;
    if (bits % static_cast<std::size_t>(cfg.code.k) != 0)
        fail(Errc::length_not_divisible, "tb does not segment into k-bit messages");
    std::size_t coded = bits / static_cast<std::size_t>(cfg.code.k) *
                        static_cast<std::size_t>(cfg.code.n);
    if (coded % static_cast<std::size_t>(bits_per_symbol(cfg.modulation)) != 0)
        fail(Errc::length_not_divisible, "coded bits do not divide into symbols");
    return coded / static_cast<std::size_t>(bits_per_symbol(cfg.modulation));
}

}  // namespace aalsim::phy

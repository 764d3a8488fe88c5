// SPDX-License-Identifier: Apache-2.0
//
// chanforge - position-conditioned MIMO channel synthesis and augmentation
// Copyright (C) 2026 The chanforge Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef CHANFORGE_IO_HPP
#define CHANFORGE_IO_HPP

#include "chanforge/numerics/graph.hpp"
#include "chanforge/numerics/optim.hpp"
#include "chanforge/numerics/tensor.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

// Little-endian binary containers shared by dataset and checkpoint files.
//
// Layout: magic[4] | u32 version | u64 payload bytes | u32 crc32(payload) | payload
namespace chanforge::io
{

using Magic = std::array<char, 4>;

// Malformed, truncated, mismatched or corrupted file.
class FormatError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

class ByteWriter
{
public:
    void u8(std::uint8_t v);
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void f64(double v);
    void string(const std::string &s);
    void doubles(std::span<const double> values);
    void tensor(const nn::Tensor &t);
    void parameters(const nn::ParameterSet &params);
    void adam(const nn::AdamState &state);

    const std::vector<std::uint8_t> &bytes() const { return bytes_; }

private:
    std::vector<std::uint8_t> bytes_;
};

class ByteReader
{
public:
    explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::uint8_t u8();
    std::uint32_t u32();
    std::uint64_t u64();
    double f64();
    std::string string();
    void doubles(std::span<double> out);
    nn::Tensor tensor();
    // Reads into an existing set; names and shapes must match.
    void parameters(nn::ParameterSet &params);
    nn::AdamState adam();

    std::size_t remaining() const { return bytes_.size() - pos_; }
    void expect_end() const;

private:
    std::span<const std::uint8_t> take(std::size_t n);

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

void write_container(const std::filesystem::path &path, const Magic &magic, std::uint32_t version,
                     const std::vector<std::uint8_t> &payload);

// Throws std::runtime_error when the file cannot be opened, FormatError otherwise.
std::vector<std::uint8_t> read_container(const std::filesystem::path &path, const Magic &magic,
                                         std::uint32_t version);

// Reads only the magic tag of a container.
Magic peek_magic(const std::filesystem::path &path);

} // namespace chanforge::io

#endif

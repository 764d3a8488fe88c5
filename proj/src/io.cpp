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

#include "chanforge/io.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace chanforge::io
{

namespace
{

template <class T>
void append(std::vector<std::uint8_t> &out, T v)
{
    const auto *p = reinterpret_cast<const std::uint8_t *>(&v);
    out.insert(out.end(), p, p + sizeof(T));
}

template <class T>
T load(std::span<const std::uint8_t> bytes)
{
    T v;
    std::memcpy(&v, bytes.data(), sizeof(T));
    return v;
}

constexpr std::size_t header_size = 4 + 4 + 8 + 4;

} // namespace

void ByteWriter::u8(std::uint8_t v)
{
    bytes_.push_back(v);
}

void ByteWriter::u32(std::uint32_t v)
{
    append(bytes_, v);
}

void ByteWriter::u64(std::uint64_t v)
{
    append(bytes_, v);
}

void ByteWriter::f64(double v)
{
    append(bytes_, v);
}

void ByteWriter::string(const std::string &s)
{
    u32(static_cast<std::uint32_t>(s.size()));
    bytes_.insert(bytes_.end(), s.begin(), s.end());
}

void ByteWriter::doubles(std::span<const double> values)
{
    const auto *p = reinterpret_cast<const std::uint8_t *>(values.data());
    bytes_.insert(bytes_.end(), p, p + values.size_bytes());
}

void ByteWriter::tensor(const nn::Tensor &t)
{
    u32(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape())
        u64(d);
    doubles(t.data());
}

void ByteWriter::parameters(const nn::ParameterSet &params)
{
    u32(static_cast<std::uint32_t>(params.size()));
    for (std::size_t i = 0; i < params.size(); ++i)
    {
        string(params.name(i));
        tensor(params[i]);
    }
}

void ByteWriter::adam(const nn::AdamState &state)
{
    u64(state.step);
    f64(state.learning_rate);
    f64(state.beta1);
    f64(state.beta2);
    f64(state.epsilon);
    u32(static_cast<std::uint32_t>(state.first_moment.size()));
    for (std::size_t i = 0; i < state.first_moment.size(); ++i)
    {
        tensor(state.first_moment[i]);
        tensor(state.second_moment[i]);
    }
}

std::span<const std::uint8_t> ByteReader::take(std::size_t n)
{
    if (n > remaining())
        throw FormatError("unexpected end of data");
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
}

std::uint8_t ByteReader::u8()
{
    return take(1)[0];
}

std::uint32_t ByteReader::u32()
{
    return load<std::uint32_t>(take(4));
}

std::uint64_t ByteReader::u64()
{
    return load<std::uint64_t>(take(8));
}

double ByteReader::f64()
{
    return load<double>(take(8));
}

std::string ByteReader::string()
{
    const auto n = u32();
    auto s = take(n);
    return std::string(s.begin(), s.end());
}

void ByteReader::doubles(std::span<double> out)
{
    auto s = take(out.size_bytes());
    std::memcpy(out.data(), s.data(), s.size());
}

nn::Tensor ByteReader::tensor()
{
    const auto rank = u32();
    if (rank > 8)
        throw FormatError("tensor rank out of range");
    nn::Shape shape(rank);
    std::size_t count = 1;
    for (auto &d : shape)
    {
        d = u64();
        if (d != 0 && count > remaining() / d)
            throw FormatError("tensor larger than remaining data");
        count *= d;
    }
    if (count > remaining() / sizeof(double))
        throw FormatError("tensor larger than remaining data");
    nn::Tensor t(shape);
    doubles(t.data());
    return t;
}

void ByteReader::parameters(nn::ParameterSet &params)
{
    if (u32() != params.size())
        throw FormatError("parameter count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i)
    {
        if (string() != params.name(i))
            throw FormatError("parameter name mismatch at '" + params.name(i) + "'");
        nn::Tensor t = tensor();
        if (t.shape() != params[i].shape())
            throw FormatError("parameter shape mismatch at '" + params.name(i) + "'");
        params[i] = std::move(t);
    }
}

nn::AdamState ByteReader::adam()
{
    nn::AdamState s;
    s.step = u64();
    s.learning_rate = f64();
    s.beta1 = f64();
    s.beta2 = f64();
    s.epsilon = f64();
    const auto n = u32();
    for (std::uint32_t i = 0; i < n; ++i)
    {
        s.first_moment.push_back(tensor());
        s.second_moment.push_back(tensor());
    }
    return s;
}

void ByteReader::expect_end() const
{
    if (remaining() != 0)
        throw FormatError("trailing bytes after payload");
}

std::uint32_t crc32(std::span<const std::uint8_t> bytes)
{
    uLong crc = ::crc32(0L, Z_NULL, 0);
    std::size_t done = 0;
    while (done < bytes.size())
    {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - done, 1u << 30));
        crc = ::crc32(crc, bytes.data() + done, chunk);
        done += chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

void write_container(const std::filesystem::path &path, const Magic &magic, std::uint32_t version,
                     const std::vector<std::uint8_t> &payload)
{
    std::vector<std::uint8_t> header;
    header.insert(header.end(), magic.begin(), magic.end());
    append(header, version);
    append(header, static_cast<std::uint64_t>(payload.size()));
    append(header, crc32(payload));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    out.write(reinterpret_cast<const char *>(header.data()), std::streamsize(header.size()));
    out.write(reinterpret_cast<const char *>(payload.data()), std::streamsize(payload.size()));
    if (!out)
        throw std::runtime_error("write failed for '" + path.string() + "'");
}

std::vector<std::uint8_t> read_container(const std::filesystem::path &path, const Magic &magic,
                                         std::uint32_t version)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open '" + path.string() + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const std::string name = path.string();
    if (bytes.size() < header_size)
        throw FormatError(name + ": truncated header");
    std::span<const std::uint8_t> all(bytes);
    if (!std::equal(magic.begin(), magic.end(), all.begin()))
        throw FormatError(name + ": bad magic, expected '" + std::string(magic.begin(), magic.end()) + "'");
    const auto file_version = load<std::uint32_t>(all.subspan(4));
    if (file_version != version)
        throw FormatError(name + ": version " + std::to_string(file_version) + ", expected " +
                          std::to_string(version));
    const auto size = load<std::uint64_t>(all.subspan(8));
    const auto crc = load<std::uint32_t>(all.subspan(16));
    if (size != bytes.size() - header_size)
        throw FormatError(name + ": payload size mismatch (truncated or padded file)");
    std::vector<std::uint8_t> payload(bytes.begin() + header_size, bytes.end());
    if (crc32(payload) != crc)
        throw FormatError(name + ": checksum mismatch");
    return payload;
}

Magic peek_magic(const std::filesystem::path &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open '" + path.string() + "'");
    Magic m{};
    in.read(m.data(), 4);
    if (in.gcount() != 4)
        throw FormatError(path.string() + ": truncated header");
    return m;
}

} // namespace chanforge::io

/*
 * Copyright 2026 The afort Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace afort {

// Hex-encoded SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

// UTF-8 helpers. Spans in the corpus are counted in Unicode code points.
std::size_t utf8_length(std::string_view text);
// Byte offset of code point `index`; returns text.size() when index == length.
std::size_t utf8_byte_offset(std::string_view text, std::size_t index);
std::string utf8_substr(std::string_view text, std::size_t start, std::size_t end);
// Code point index of the first occurrence of `needle`, or npos.
std::size_t utf8_find(std::string_view text, std::string_view needle);

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
bool iequals(std::string_view a, std::string_view b);
bool icontains(std::string_view haystack, std::string_view needle);
std::vector<std::string> split(std::string_view s, char sep);

// Lowercase, drop ASCII punctuation, split on whitespace.
std::vector<std::string> normalized_tokens(std::string_view text);

// Counts sentences ending in . ! or ? followed by whitespace or end of text.
// Trailing text without terminal punctuation counts as one more sentence.
std::size_t count_sentences(std::string_view text);

// Natural ordering: digit runs compare numerically ("r2" < "r10").
bool natural_less(std::string_view a, std::string_view b);

std::string read_file(const std::filesystem::path& path);
// Writes to `<path>.partial` and renames into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

// Deterministic 64-bit seed derivation from a base seed and a label.
std::uint64_t derive_seed(std::uint64_t base, std::string_view label);

// Fisher-Yates with std::mt19937_64. Unlike std::shuffle the result does
// not depend on the standard library's distribution implementation.
template <class T>
void seeded_shuffle(std::vector<T>& items, std::uint64_t seed);

// Timestamp source. Deterministic runs use a logical clock so artifacts
// stay byte-identical.
class Clock {
public:
    virtual ~Clock() = default;
    virtual std::string now_iso8601() = 0;
};

class SystemClock final : public Clock {
public:
    std::string now_iso8601() override;
};

// Always returns the same instant.
class FixedClock final : public Clock {
public:
    explicit FixedClock(std::string instant = "1970-01-01T00:00:00Z") : instant_(std::move(instant)) {}
    std::string now_iso8601() override { return instant_; }

private:
    std::string instant_;
};

}  // namespace afort

#include <random>

template <class T>
void afort::seeded_shuffle(std::vector<T>& items, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (std::size_t i = items.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(items[i - 1], items[j]);
    }
}

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

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <functional>
#include <random>
#include <string>

#include "afort/backend.hpp"

namespace testing {

inline std::filesystem::path fixture(const std::string& name) { return std::filesystem::path(AFORT_FIXTURES) / name; }

// Fresh directory under the system temp dir, removed on scope exit.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("afort-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

private:
    std::filesystem::path path_;
};

// Provider driven by a callback; counts calls.
class LambdaProvider final : public afort::GenerationProvider {
public:
    explicit LambdaProvider(std::function<afort::ProviderReply(const afort::ProviderRequest&)> fn)
        : fn_(std::move(fn)) {}
    std::string name() const override { return "lambda"; }
    afort::ProviderReply generate(const afort::ProviderRequest& r) override {
        ++calls_;
        return fn_(r);
    }

private:
    std::function<afort::ProviderReply(const afort::ProviderRequest&)> fn_;
};

// Small generator helpers for hand-rolled property tests.
struct Gen {
    std::mt19937_64 rng;
    explicit Gen(std::uint64_t seed) : rng(seed) {}
    std::size_t below(std::size_t n) { return n ? static_cast<std::size_t>(rng() % n) : 0; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * (double(rng() >> 11) / double(1ull << 53)); }
    bool coin(double p = 0.5) { return uniform(0, 1) < p; }
    std::string word(std::size_t min_len = 1, std::size_t max_len = 8) {
        std::string w;
        std::size_t n = min_len + below(max_len - min_len + 1);
        for (std::size_t i = 0; i < n; ++i) w += char('a' + below(26));
        return w;
    }
};

}  // namespace testing

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

#include <stdexcept>
#include <string>

namespace afort {

/// Failure categories. The numeric values double as CLI exit codes.
enum class ErrorKind {
    Usage = 1,
    Data = 2,
    Provider = 3,
    Io = 4,
    Internal = 5,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

struct UsageError : Error {
    explicit UsageError(const std::string& what) : Error(ErrorKind::Usage, what) {}
};

struct DataError : Error {
    explicit DataError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

struct ProviderError : Error {
    explicit ProviderError(const std::string& what) : Error(ErrorKind::Provider, what) {}
};

struct IoError : Error {
    explicit IoError(const std::string& what) : Error(ErrorKind::Io, what) {}
};

// Unknown campaign, item or annotator.
struct NotFoundError : DataError {
    explicit NotFoundError(const std::string& what) : DataError(what) {}
};

// Prompt plus input plus reserved output would exceed the model window.
struct BudgetError : Error {
    explicit BudgetError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

// Retryable transport failure (timeouts, 429, 5xx).
struct TransientError : ProviderError {
    explicit TransientError(const std::string& what) : ProviderError(what) {}
};

const char* to_string(ErrorKind kind) noexcept;

}  // namespace afort

// Copyright 2026 The evoloop Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace evoloop {

/// Decodes UTF-8 into scalar values. Invalid sequences decode to U+FFFD one
/// byte at a time so the function is total.
std::u32string utf8_decode(std::string_view bytes);
std::string utf8_encode(std::u32string_view scalars);
std::string utf8_encode(char32_t scalar);

/// True iff `bytes` is well-formed UTF-8 (no overlongs, no surrogates).
bool utf8_valid(std::string_view bytes);

std::size_t scalar_count(std::string_view bytes);

/// Unicode White_Space property.
bool is_unicode_space(char32_t c) noexcept;

std::string_view trim_ascii(std::string_view s) noexcept;

/// Splits on runs of Unicode whitespace, dropping empty fields.
std::vector<std::string> split_whitespace(std::string_view s);

/// Lowercase hex SHA-256 of `bytes`.
std::string sha256_hex(std::string_view bytes);

/// Raw 32-byte digest.
std::string sha256_raw(std::string_view bytes);

}  // namespace evoloop

// Copyright 2026 The smarthome-qa Authors.
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

namespace shqa::text {

// Lowercases UTF-8 text with a simple (1:1) code point mapping covering
// ASCII, Latin-1, Latin Extended-A, Greek and Cyrillic. Invalid UTF-8 bytes
// are copied through untouched.
std::string to_lower(std::string_view s);

// Whitespace here is ASCII space, \t, \n, \v, \f, \r.
bool is_space(char c);

std::string_view trim(std::string_view s);

// Maximal non-whitespace runs.
std::vector<std::string_view> split_words(std::string_view s);
std::size_t word_count(std::string_view s);

// Number of UTF-8 code points (continuation bytes are not counted).
std::size_t char_count(std::string_view s);

bool starts_with_ci(std::string_view s, std::string_view prefix);

}  // namespace shqa::text

// Copyright (c) 2026 proso authors
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

#ifndef PROSO_CORE_TEXT_HPP_
#define PROSO_CORE_TEXT_HPP_

#include <string>
#include <string_view>
#include <vector>

namespace proso {

// Shortest decimal form that round-trips the exact double value.
std::string fmt_double(double v);
std::string fmt_int(long long v);

double parse_double(std::string_view s, const std::string& what);
long long parse_int(std::string_view s, const std::string& what);

std::string_view trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char delim);
std::vector<std::string> split_ws(std::string_view s);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);
std::vector<std::string> read_lines(const std::string& path);

}  // namespace proso

#endif  // PROSO_CORE_TEXT_HPP_

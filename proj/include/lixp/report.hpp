// Copyright 2026 The LIxP Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace lixp {

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

/// RFC-4180 field: quoted when it holds a comma, quote, CR or LF.
std::string csv_field(std::string_view s);
std::string csv_row(const std::vector<std::string>& fields);

/// RFC-4180 reader: quoted fields, doubled quotes, CRLF or LF line ends.
/// Throws std::invalid_argument on an unterminated quote.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view text);

}  // namespace lixp

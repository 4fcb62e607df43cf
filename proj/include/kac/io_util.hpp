#pragma once

#include <string>

namespace kac {

/// Write-temp-then-rename so readers never observe a partial file.
void write_file_atomic(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

/// printf-style %.6g with a '.' decimal point, locale-independent.
std::string format_sig6(double v);

/// Shortest decimal that round-trips the double bit-exactly (%.17g).
std::string format_exact(double v);

}  // namespace kac

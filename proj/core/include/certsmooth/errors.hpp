#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace certsmooth {

/// Malformed or unreadable input file. what() reads "path:line: message"
/// (the line part is omitted when unknown).
class InputError : public std::runtime_error {
public:
    InputError(std::string path, std::size_t line, const std::string& message);
    InputError(std::string path, const std::string& message);

    const std::string& path() const noexcept { return path_; }
    /// 1-based, 0 when unknown.
    std::size_t line() const noexcept { return line_; }

private:
    std::string path_;
    std::size_t line_ = 0;
};

/// Reads a whole file; throws InputError when it cannot be opened.
std::string read_text_file(const std::string& path);

} // namespace certsmooth

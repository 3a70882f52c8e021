#include "certsmooth/errors.hpp"

#include <fstream>
#include <sstream>

namespace certsmooth {

InputError::InputError(std::string path, std::size_t line, const std::string& message)
    : std::runtime_error(path + ":" + std::to_string(line) + ": " + message),
      path_(std::move(path)),
      line_(line)
{
}

InputError::InputError(std::string path, const std::string& message)
    : std::runtime_error(path + ": " + message), path_(std::move(path))
{
}

std::string read_text_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InputError(path, "cannot open file");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

} // namespace certsmooth

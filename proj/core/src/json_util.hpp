#pragma once

#include <nlohmann/json.hpp>

#include <cstddef>
#include <string>
#include <string_view>

#include "certsmooth/errors.hpp"

namespace certsmooth::detail {

/// 1-based line containing the byte offset.
inline std::size_t line_of(std::string_view text, std::size_t byte)
{
    std::size_t line = 1;
    const std::size_t end = byte < text.size() ? byte : text.size();
    for (std::size_t i = 0; i < end; ++i) {
        if (text[i] == '\n') ++line;
    }
    return line;
}

/// Runs parse(text) and rethrows any failure as InputError tagged with path
/// (and the line, for syntax errors).
template <class Parse>
auto load_with(const std::string& path, Parse&& parse)
{
    const std::string text = read_text_file(path);
    try {
        return parse(std::string_view(text));
    } catch (const nlohmann::json::parse_error& e) {
        throw InputError(path, line_of(text, e.byte == 0 ? 0 : e.byte - 1), e.what());
    } catch (const InputError&) {
        throw;
    } catch (const std::exception& e) {
        throw InputError(path, e.what());
    }
}

} // namespace certsmooth::detail

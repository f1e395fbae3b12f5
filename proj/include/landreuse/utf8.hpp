#pragma once

#include <string>
#include <string_view>
#include <vector>

// Minimal UTF-8 helpers. Character classes cover ASCII and the Latin-1
// supplement, which is enough for German text.
namespace landreuse::utf8 {

std::u32string decode(std::string_view text);
std::string encode(std::u32string_view text);
void append(std::string& out, char32_t cp);

bool is_alpha(char32_t cp);
bool is_upper(char32_t cp);
bool is_lower(char32_t cp);
bool is_digit(char32_t cp);
bool is_space(char32_t cp);
bool is_alnum(char32_t cp);
char32_t to_lower(char32_t cp);

std::string to_lower(std::string_view text);

}  // namespace landreuse::utf8

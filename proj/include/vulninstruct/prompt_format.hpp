#pragma once

#include <string>
#include <string_view>

namespace vulninstruct {

inline constexpr std::string_view kAlpacaPreambleWithInput =
    "Below is an instruction that describes a task, paired with an input that provides further context. "
    "Write a response that appropriately completes the request.";
inline constexpr std::string_view kAlpacaPreambleNoInput =
    "Below is an instruction that describes a task. Write a response that appropriately completes the request.";

// Alpaca prompt up to and including the "### Response:" header. The
// "### Input:" section is omitted when input is empty.
std::string render_alpaca_prompt(std::string_view instruction, std::string_view input);

// Extracts the "### Input:" body of an Alpaca prompt, or the whole text when
// the prompt has no input section.
std::string alpaca_input_of(std::string_view prompt);

} // namespace vulninstruct

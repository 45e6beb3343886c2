#include "vulninstruct/prompt_format.hpp"

namespace vulninstruct {

std::string render_alpaca_prompt(std::string_view instruction, std::string_view input) {
    std::string out;
    if (input.empty()) {
        out += kAlpacaPreambleNoInput;
        out += "\n\n### Instruction:\n";
        out += instruction;
    } else {
        out += kAlpacaPreambleWithInput;
        out += "\n\n### Instruction:\n";
        out += instruction;
        out += "\n\n### Input:\n";
        out += input;
    }
    out += "\n\n### Response:\n";
    return out;
}

std::string alpaca_input_of(std::string_view prompt) {
    constexpr std::string_view kInput = "### Input:\n";
    constexpr std::string_view kResponse = "\n\n### Response:";
    auto b = prompt.find(kInput);
    if (b == std::string_view::npos) return std::string(prompt);
    b += kInput.size();
    auto e = prompt.rfind(kResponse);
    if (e == std::string_view::npos || e < b) e = prompt.size();
    return std::string(prompt.substr(b, e - b));
}

} // namespace vulninstruct

#pragma once

#include <stdexcept>
#include <string>

namespace texpro {

// Exit-code taxonomy used by the CLI. Library code throws these; the tool
// maps them to process exit codes.
enum class ErrorCode : int {
    ok = 0,
    input = 2,
    agent = 3,
    numeric = 4,
};

class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
    ErrorCode code() const { return code_; }

  private:
    ErrorCode code_;
};

inline Error input_error(const std::string& msg) { return Error(ErrorCode::input, msg); }
inline Error agent_error(const std::string& msg) { return Error(ErrorCode::agent, msg); }
inline Error numeric_error(const std::string& msg) { return Error(ErrorCode::numeric, msg); }

}  // namespace texpro

#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

namespace ewallet::tools {

// Walks the Kayembe family story against a running service: salary
// recharge, a parked transfer to his wife, her registration, a second
// parked hop to a parent, a withdrawal code spent at a seller, and a
// partial ATM withdrawal. Expects a freshly started service. Returns the
// process exit code.
int run_scenario(const std::string& url, const std::filesystem::path& fixture, std::ostream& out);

}  // namespace ewallet::tools

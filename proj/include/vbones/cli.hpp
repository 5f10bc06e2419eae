#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace vbones::cli {

// Runs one subcommand. Returns the process exit status: 0 on success, 2 on a
// usage error, 1 on any other failure (reported as a single
// "error: code=<kind> msg=<text>" line on `err`).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

// 64-bit FNV-1a, hex encoded.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace vbones::cli

#ifndef DERAIN_ERRORS_HPP
#define DERAIN_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace derain {

/// Shape or argument mismatch between tensors (wrong channel count, misaligned sizes).
struct shape_error : std::invalid_argument {
    explicit shape_error(const std::string& msg) : std::invalid_argument(msg) {}
};

/// Missing or malformed files, directories, datasets, checkpoints.
struct data_error : std::runtime_error {
    explicit data_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Non-finite losses or other numeric breakdowns during optimization.
struct numeric_error : std::runtime_error {
    explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Bad command-line usage (maps to exit code 1 in the CLI).
struct usage_error : std::invalid_argument {
    explicit usage_error(const std::string& msg) : std::invalid_argument(msg) {}
};

}  // namespace derain

#endif

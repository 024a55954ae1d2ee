#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qmclab {

/// Requested work exceeds what the dense routines are allowed to handle.
class capability_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed external data (table files, cached shot counts).
class format_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class numerical_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The trial estimate at the evaluated state is zero.
class undefined_local_energy : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Projector shift does not dominate the local energy, b(x) <= 0.
class shift_too_small : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// A negative transition probability or weight factor appeared.
class sign_problem_error : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

class population_collapse : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Collects every problem found while resolving an experiment config.
class config_error : public std::runtime_error {
public:
    explicit config_error(std::vector<std::string> issues)
        : std::runtime_error(join(issues)), issues_(std::move(issues)) {}

    const std::vector<std::string>& issues() const noexcept { return issues_; }

private:
    static std::string join(const std::vector<std::string>& issues) {
        std::string out = "invalid config";
        for (const auto& issue : issues) {
            out += "\n  ";
            out += issue;
        }
        return out;
    }

    std::vector<std::string> issues_;
};

}  // namespace qmclab

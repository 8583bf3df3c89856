// Error types shared by the sqchaos headers.
#pragma once

#include <stdexcept>
#include <string>

namespace sqchaos {

// A width coordinate reached the centrifugal barrier (rho <= rho_min).
class singularity_error : public std::runtime_error {
public:
    singularity_error(const std::string& what, double t = 0.0)
        : std::runtime_error(what), time_(t) {}
    double time() const noexcept { return time_; }

private:
    double time_;
};

// No state of the requested convention has the requested energy.
class infeasible_energy_error : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// The structure matrix of a variational ansatz is singular or ill-conditioned.
class degenerate_ansatz_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Wavefunction lost probability through the box edge or its norm drifted.
class integrity_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class box_escape_error : public integrity_error {
public:
    box_escape_error(const std::string& what, double t)
        : integrity_error(what), time_(t) {}
    double time() const noexcept { return time_; }

private:
    double time_;
};

// Malformed checkpoint or data file.
class format_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace sqchaos

#pragma once

#include <stdexcept>
#include <string>

namespace pmq {

/// Base class for all library errors.
class error : public std::runtime_error {
public:
    explicit error(const std::string& what) : std::runtime_error(what) {}
};

/// Grid codewords are not strictly increasing or lie outside the support.
class invalid_grid_error : public error {
public:
    using error::error;
};

/// Optimizer started from codewords outside the distribution support.
class invalid_init_error : public error {
public:
    using error::error;
};

/// A Voronoi region carries no probability mass.
class empty_region_error : public error {
public:
    using error::error;
};

/// Hessian reciprocal condition estimate fell below the configured threshold.
class singular_hessian_error : public error {
public:
    using error::error;
};

/// Newton proposal broke codeword ordering or left the support.
class step_rejected_error : public error {
public:
    using error::error;
};

/// Coefficients outside the domain a scheme supports (e.g. mbar <= 0).
class unsupported_coefficient_error : public error {
public:
    using error::error;
};

/// Model parameters outside their admissible domain.
class parameter_domain_error : public error {
public:
    using error::error;
};

/// Requested configuration is inconsistent (schemes, dimensions, schema).
class config_error : public error {
public:
    using error::error;
};

/// Quadrature failed to reach the requested accuracy.
class quadrature_error : public error {
public:
    quadrature_error(const std::string& what, double achieved)
        : error(what), achieved_bound(achieved) {}
    double achieved_bound;
};

/// Root finding target lies outside the admissible bracket.
class no_solution_error : public error {
public:
    using error::error;
};

/// Grid file does not match the model/schedule it is used with.
class provenance_error : public error {
public:
    using error::error;
};

} // namespace pmq

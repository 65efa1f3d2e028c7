#pragma once
#include <stdexcept>
#include <string>

namespace gesso {

/// Base class for all errors raised by the library.
class gesso_error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Inconsistent vector/matrix sizes between inputs.
class dimension_error : public gesso_error
{
public:
    using gesso_error::gesso_error;
};

/// Invalid argument values (non-finite data, negative penalties, bad specs).
class value_error : public gesso_error
{
public:
    using gesso_error::gesso_error;
};

/// A dual point that violates the dual feasible region.
class infeasible_dual_error : public gesso_error
{
public:
    using gesso_error::gesso_error;
};

/// Malformed or unreadable input files.
class io_error : public gesso_error
{
public:
    using gesso_error::gesso_error;
};

} // namespace gesso

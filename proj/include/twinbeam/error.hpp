//---------------------------------------------------------------------------//
// Copyright 2026 twinbeam developers.
// SPDX-License-Identifier: Apache-2.0
//---------------------------------------------------------------------------//
//! \file twinbeam/error.hpp
//---------------------------------------------------------------------------//
#pragma once

#include <stdexcept>
#include <string>

namespace twinbeam
{
//---------------------------------------------------------------------------//
/*!
 * Base class for all errors raised by the library.
 *
 * Each subclass maps onto one process exit code of the command-line tool:
 * validation failures exit with 1, I/O and format failures with 2 and
 * numerical failures (undefined statistics, fit non-convergence) with 3.
 */
class Error : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
    virtual int exit_code() const noexcept = 0;
};

//! Invalid parameters or configuration values.
class ValidationError : public Error
{
  public:
    using Error::Error;
    int exit_code() const noexcept override { return 1; }
};

//! Unreadable, unwritable or malformed files.
class IoError : public Error
{
  public:
    using Error::Error;
    int exit_code() const noexcept override { return 2; }
};

//! Quantity undefined for the given data, or an iteration that failed.
class NumericalError : public Error
{
  public:
    using Error::Error;
    int exit_code() const noexcept override { return 3; }
};

//! Profile has no resolvable peak.
class NoPeakError : public NumericalError
{
  public:
    using NumericalError::NumericalError;
};

namespace detail
{
inline void require(bool cond, std::string const& msg)
{
    if (!cond)
    {
        throw ValidationError(msg);
    }
}
}  // namespace detail

}  // namespace twinbeam

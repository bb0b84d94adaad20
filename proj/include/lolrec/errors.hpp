#pragma once

#include <stdexcept>
#include <string>

namespace lolrec {

/// Base class for everything this library throws.
class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input-data problem (bad CSV cell, non-positive price, unordered dates...).
/// The message carries the file/row/column context.
class data_error : public error {
public:
    using error::error;
};

/// The weighted normal equations could not be solved. Only reachable with
/// ridge = 0; any positive ridge makes the system positive definite.
class singular_system : public error {
public:
    using error::error;
};

} // namespace lolrec

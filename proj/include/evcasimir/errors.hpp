#pragma once

#include <stdexcept>
#include <string>

namespace evc {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
    virtual const char* kind() const noexcept { return "Error"; }
};

#define EVC_ERROR(Name)                                                   \
    struct Name : Error {                                                 \
        using Error::Error;                                               \
        const char* kind() const noexcept override { return #Name; }      \
    };

EVC_ERROR(DomainError)
EVC_ERROR(HorizonError)
EVC_ERROR(PreconditionError)
EVC_ERROR(RangeError)
EVC_ERROR(GridMismatchError)
EVC_ERROR(SupportError)
EVC_ERROR(ParameterError)
EVC_ERROR(NoSupportError)
EVC_ERROR(InitError)
EVC_ERROR(UsageError)
EVC_ERROR(IoError)

#undef EVC_ERROR

} // namespace evc

#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace kffi {

/// Base of every error raised by the FFI runtime. `ename()` is the stable
/// class name carried across the wire in error responses.
class Error : public std::runtime_error {
public:
    Error(std::string ename, const std::string& message)
        : std::runtime_error(message), ename_(std::move(ename)) {}

    const std::string& ename() const noexcept { return ename_; }

private:
    std::string ename_;
};

#define KFFI_DEFINE_ERROR(Name)                                                \
    class Name : public Error {                                                \
    public:                                                                    \
        explicit Name(const std::string& message) : Error(#Name, message) {}   \
    }

KFFI_DEFINE_ERROR(MalformedIr);
KFFI_DEFINE_ERROR(UnsupportedIrKind);
KFFI_DEFINE_ERROR(ParseError);
KFFI_DEFINE_ERROR(UnknownReference);
KFFI_DEFINE_ERROR(MarshallingError);
KFFI_DEFINE_ERROR(MalformedArgs);
KFFI_DEFINE_ERROR(NotFound);
KFFI_DEFINE_ERROR(AmbiguousSymbol);
KFFI_DEFINE_ERROR(ArityMismatch);
KFFI_DEFINE_ERROR(UnsupportedLanguage);
KFFI_DEFINE_ERROR(MissingTemplate);
KFFI_DEFINE_ERROR(TimeoutError);
KFFI_DEFINE_ERROR(RecursionLimitError);
KFFI_DEFINE_ERROR(KernelUnavailable);
KFFI_DEFINE_ERROR(ConfigError);

#undef KFFI_DEFINE_ERROR

/// Source diagnostic with a 1-based position.
class SyntaxError : public Error {
public:
    SyntaxError(const std::string& message, int line, int column)
        : Error("SyntaxError", message + " at " + std::to_string(line) + ":" +
                                   std::to_string(column)),
          line_(line), column_(column) {}

    int line() const noexcept { return line_; }
    int column() const noexcept { return column_; }

private:
    int line_;
    int column_;
};

/// An exception raised inside another kernel, surfaced to the caller.
class ForeignError : public Error {
public:
    ForeignError(std::string origin_kernel, std::string ename, std::string evalue,
                 std::string trace)
        : Error(ename, "[" + origin_kernel + "] " + ename + ": " + evalue),
          origin_kernel_(std::move(origin_kernel)), evalue_(std::move(evalue)),
          trace_(std::move(trace)) {}

    const std::string& origin_kernel() const noexcept { return origin_kernel_; }
    const std::string& evalue() const noexcept { return evalue_; }
    const std::string& trace() const noexcept { return trace_; }

private:
    std::string origin_kernel_;
    std::string evalue_;
    std::string trace_;
};

} // namespace kffi

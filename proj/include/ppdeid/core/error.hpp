#pragma once

#include <stdexcept>
#include <string>

namespace ppdeid {

/// All recoverable failures carry the originating module and a stable
/// error kind (e.g. "MissingFile", "SchemaMismatch") so callers and the
/// CLI can report them in a machine-readable way.
class Error : public std::runtime_error {
public:
    Error(std::string module, std::string kind, const std::string& detail)
        : std::runtime_error(module + "/" + kind + ": " + detail),
          module_(std::move(module)),
          kind_(std::move(kind)),
          detail_(detail) {}

    const std::string& module() const noexcept { return module_; }
    const std::string& kind() const noexcept { return kind_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    std::string module_;
    std::string kind_;
    std::string detail_;
};

[[noreturn]] inline void raise(const char* module, const char* kind,
                               const std::string& detail) {
    throw Error(module, kind, detail);
}

} // namespace ppdeid

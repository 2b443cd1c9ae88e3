#ifndef LAMPERTI_TYPES_HPP_
#define LAMPERTI_TYPES_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>

namespace lamperti {

/// A state of a chain on the nonnegative integers.
using State = std::int64_t;

/// Raised when an operation's precondition does not hold for its input
/// (infeasible family parameters, singular truncation, non-positive V ...).
/// `witness` carries the offending state when there is one, otherwise -1.
class Rejected : public std::runtime_error {
public:
  explicit Rejected(const std::string &what, State witness = -1)
      : std::runtime_error(what), witness_(witness) {}

  State witness() const noexcept { return witness_; }

private:
  State witness_;
};

} // namespace lamperti

#endif /* LAMPERTI_TYPES_HPP_ */

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace crossway {

// Virtual time in integer milliseconds. Integer ordering keeps the event
// queue free of floating-point tie ambiguity.
using SimTime = std::int64_t;

using Pid = std::int32_t;

// Trace records attributed to the world rather than a process.
inline constexpr Pid kWorldPid = -1;

struct SimError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SchedulingInPast : SimError { using SimError::SimError; };
struct DuplicatePid : SimError { using SimError::SimError; };
struct InvalidDistributionParam : SimError { using SimError::SimError; };
struct UnknownPid : SimError { using SimError::SimError; };
struct SenderCrashed : SimError { using SimError::SimError; };

struct SlotAlreadyOwned : SimError { using SimError::SimError; };
struct NotOwner : SimError { using SimError::SimError; };
struct UnknownSlot : SimError { using SimError::SimError; };

struct AlreadyRegistering : SimError { using SimError::SimError; };
struct NotRegistered : SimError { using SimError::SimError; };
struct NotInPlist : SimError { using SimError::SimError; };
struct RequestPending : SimError { using SimError::SimError; };
struct NotHeld : SimError { using SimError::SimError; };

struct TooShort : SimError { using SimError::SimError; };
struct IllegalPair : SimError { using SimError::SimError; };

struct ParseError : SimError { using SimError::SimError; };
struct ValidationError : SimError { using SimError::SimError; };
struct MalformedTrace : SimError { using SimError::SimError; };
struct TimeOutOfRange : SimError { using SimError::SimError; };

}  // namespace crossway

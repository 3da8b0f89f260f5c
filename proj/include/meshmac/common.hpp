#pragma once

#include <chrono>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace meshmac {

/// Dense node index in [0, N). The coordinator is always node 0.
using NodeId = std::uint32_t;

inline constexpr NodeId kCoordinator = 0;

/// Simulation clock: integral microseconds, no floating-point time anywhere in the engine.
using SimTime = std::chrono::microseconds;

/// A directed unicast link.
struct Link {
    NodeId sender = 0;
    NodeId receiver = 0;

    friend bool operator==(const Link&, const Link&) = default;
    friend auto operator<=>(const Link&, const Link&) = default;
};

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DisconnectedTopology : public Error {
public:
    DisconnectedTopology(std::size_t unreachable)
        : Error("topology is disconnected: " + std::to_string(unreachable) +
                " node(s) unreachable from the coordinator"),
          unreachable_(unreachable) {}

    std::size_t unreachable() const noexcept { return unreachable_; }

private:
    std::size_t unreachable_;
};

class NotALink : public Error {
public:
    NotALink(NodeId sender, NodeId receiver)
        : Error("nodes " + std::to_string(sender) + " and " + std::to_string(receiver) +
                " are not neighbors") {}
};

class EmptyLinkSet : public Error {
public:
    EmptyLinkSet() : Error("link set is empty") {}
};

class OverflowGuard : public Error {
public:
    using Error::Error;
};

class IllegalTransition : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace meshmac
